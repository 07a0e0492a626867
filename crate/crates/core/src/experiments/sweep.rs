//! Parallel evaluation of parameter grids.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::config::{Axis, Reduce, RunConfig};
use super::output::{read_table, Cell, NumericTable, Table};
use crate::metrology::{
    find_transition, log_grid, point_average, power_fit, pure_trace, FitResult, PointAverage, StroboscopicTrace,
    TransitionPoint,
};
use crate::model::{FieldConfig, InitConfig, ProbeConfig, MAX_PURE_SITES};
use crate::open_system::{noisy_fisher, MAX_MIXED_SITES};
use crate::{Error, Result};

/// Propagation back end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Lindblad when `Γ > 0`, pure-state otherwise.
    Auto,
    Pure,
    Lindblad,
}

/// Model parameters at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub probe: ProbeConfig,
    pub field: FieldConfig,
    pub init: InitConfig,
    pub gamma: f64,
}

impl PointParams {
    fn set(&mut self, axis: Axis, value: f64) {
        match axis {
            Axis::Sites => self.probe.sites = value as usize,
            Axis::HA => self.field.h_a = value,
            Axis::Epsilon => self.probe.epsilon = value,
            Axis::DeltaF => self.field.delta_f = value,
            Axis::Eta => self.field.eta = value,
            Axis::Theta => self.init.theta = value,
            Axis::Gamma => self.gamma = value,
        }
    }

    fn validate(&self) -> Result<()> {
        let to_config = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.probe.validate().map_err(to_config)?;
        self.field.validate().map_err(to_config)?;
        self.init.validate().map_err(to_config)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    fn uses_lindblad(&self, engine: Engine) -> bool {
        match engine {
            Engine::Auto => self.gamma > 0.0,
            Engine::Pure => false,
            Engine::Lindblad => true,
        }
    }
}

/// Grid point coordinates and parameters, axes in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub coords: Vec<f64>,
    pub params: PointParams,
}

/// Cartesian product of the configured axes, skipping `exclude`.
pub fn grid_points(cfg: &RunConfig, exclude: &[Axis]) -> Result<(Vec<Axis>, Vec<GridPoint>)> {
    let axes: Vec<&_> = cfg.sweep.iter().filter(|a| !exclude.contains(&a.axis)).collect();
    let base = PointParams { probe: cfg.probe, field: cfg.field, init: cfg.init, gamma: cfg.gamma };
    let mut points = vec![GridPoint { coords: Vec::new(), params: base }];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut next = p.clone();
                    next.coords.push(v);
                    next.params.set(axis.axis, v);
                    next
                })
            })
            .collect();
    }
    for p in &points {
        p.params.validate()?;
    }
    Ok((axes.iter().map(|a| a.axis).collect(), points))
}

/// Rejects grids that would exceed the dense-state memory limits.
pub fn check_resource_gates(points: &[GridPoint], engine: Engine) -> Result<()> {
    for p in points {
        let sites = p.params.probe.sites;
        if p.params.uses_lindblad(engine) {
            if sites > MAX_MIXED_SITES {
                return Err(Error::ResourceGate(format!(
                    "density-matrix run with L = {sites} exceeds L <= {MAX_MIXED_SITES}"
                )));
            }
        } else if sites > MAX_PURE_SITES {
            return Err(Error::ResourceGate(format!(
                "pure-state run with L = {sites} exceeds L <= {MAX_PURE_SITES}"
            )));
        }
    }
    Ok(())
}

fn compare_coords(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Runs `f` on every point with `workers` threads and returns the results
/// sorted by coordinates.
fn run_parallel<T, F>(workers: usize, points: Vec<GridPoint>, f: F) -> Result<Vec<(GridPoint, T)>>
where
    T: Send,
    F: Fn(&GridPoint) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut results: Vec<(GridPoint, T)> = pool.install(|| {
        points.into_par_iter().map(|p| f(&p).map(|r| (p, r))).collect::<Result<Vec<_>>>()
    })?;
    results.sort_by(|a, b| compare_coords(&a.0.coords, &b.0.coords));
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub coords: Vec<f64>,
    pub trace: StroboscopicTrace,
    /// Point averages when the trace is long enough.
    pub averages: Option<Vec<PointAverage>>,
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    pub axes: Vec<Axis>,
    pub points: Vec<PointResult>,
}

/// Evaluates every grid point and returns results in deterministic order.
pub fn run_sweep(cfg: &RunConfig, engine: Engine) -> Result<SweepResults> {
    let (axes, points) = grid_points(cfg, &[])?;
    check_resource_gates(&points, engine)?;
    let avg = cfg.average;
    let results = run_parallel(cfg.workers, points, |p| {
        let q = &p.params;
        let (trace, averages) = if q.uses_lindblad(engine) {
            log::info!("lindblad point {:?}", p.coords);
            let noisy = noisy_fisher(
                &q.probe,
                &q.field,
                &q.init,
                q.gamma,
                cfg.cycles,
                avg.step,
                avg.intervals,
                cfg.substeps,
            )?;
            (noisy.trace, Some(noisy.points))
        } else {
            log::info!("pure point {:?}", p.coords);
            let trace = pure_trace(&q.probe, &q.field, &q.init, cfg.cycles)?;
            let averages = point_average(&trace, avg.step, avg.intervals).ok();
            (trace, averages)
        };
        Ok(PointResult { coords: p.coords.clone(), trace, averages })
    })?;
    Ok(SweepResults { axes, points: results.into_iter().map(|(_, r)| r).collect() })
}

fn axis_cells(axes: &[Axis], coords: &[f64]) -> Vec<Cell> {
    axes.iter()
        .zip(coords)
        .map(|(a, &v)| if a.is_integer() { Cell::Int(v as i64) } else { Cell::Real(v) })
        .collect()
}

fn axis_header(axes: &[Axis]) -> Vec<String> {
    axes.iter().map(|a| a.key().to_string()).collect()
}

/// One row per point and cycle.
pub fn trace_table(results: &SweepResults) -> Table {
    let mut header = axis_header(&results.axes);
    header.extend(["n", "imbalance", "qfi", "cfi_comp", "cfi_coll"].map(String::from));
    let mut table = Table::new(header);
    for p in &results.points {
        for r in &p.trace.records {
            let mut row = axis_cells(&results.axes, &p.coords);
            row.extend([
                Cell::Int(r.n as i64),
                Cell::Real(r.imbalance),
                Cell::Real(r.qfi),
                Cell::Real(r.cfi_computational),
                Cell::Real(r.cfi_collective),
            ]);
            table.push(row);
        }
    }
    table
}

/// One row per point and averaging interval.
pub fn average_table(results: &SweepResults) -> Table {
    let mut header = axis_header(&results.axes);
    header.extend(["interval", "n_end", "n_mid", "n_cumulative", "qfi", "cfi_comp", "cfi_coll"].map(String::from));
    let mut table = Table::new(header);
    for p in &results.points {
        for a in p.averages.iter().flatten() {
            let mut row = axis_cells(&results.axes, &p.coords);
            row.extend([
                Cell::Int(a.interval as i64),
                Cell::Real(a.n_end),
                Cell::Real(a.n_mid),
                Cell::Real(a.n_cumulative),
                Cell::Real(a.values.qfi),
                Cell::Real(a.values.cfi_computational),
                Cell::Real(a.values.cfi_collective),
            ]);
            table.push(row);
        }
    }
    table
}

#[derive(Debug, Clone)]
pub struct TransitionResults {
    pub axes: Vec<Axis>,
    pub points: Vec<(Vec<f64>, TransitionPoint)>,
}

/// QFI peak in `h_a` for every point of the remaining axes.
pub fn run_transition(cfg: &RunConfig) -> Result<TransitionResults> {
    let (axes, points) = grid_points(cfg, &[Axis::HA])?;
    check_resource_gates(&points, Engine::Pure)?;
    let t = cfg.transition;
    let grid = log_grid(t.h_min, t.h_max, t.grid_points);
    let results = run_parallel(cfg.workers, points, |p| {
        let q = &p.params;
        find_transition(&q.probe, &q.field, &q.init, t.cycle, &grid)
    })?;
    Ok(TransitionResults { axes, points: results.into_iter().map(|(p, r)| (p.coords, r)).collect() })
}

pub fn transition_table(results: &TransitionResults) -> Table {
    let mut header = axis_header(&results.axes);
    header.extend(["h_max_per_jz", "qfi_max", "boundary_peak"].map(String::from));
    let mut table = Table::new(header);
    for (coords, t) in &results.points {
        let mut row = axis_cells(&results.axes, coords);
        row.extend([Cell::Real(t.h_max), Cell::Real(t.value), Cell::Flag(t.boundary_peak)]);
        table.push(row);
    }
    table
}

/// Power-law fit of two columns of a results table.
pub fn fit_table(table: &NumericTable, cfg: &RunConfig) -> Result<FitResult> {
    let spec = &cfg.fit;
    let xc = table.column(&spec.x)?;
    let yc = table.column(&spec.y)?;
    let nc = table.column("n").ok();
    let keep = |row: &Vec<f64>| -> bool {
        let Some(nc) = nc else { return true };
        let n = row[nc];
        spec.cycle.is_none_or(|c| n == c as f64)
            && spec.n_min.is_none_or(|lo| n >= lo as f64)
            && spec.n_max.is_none_or(|hi| n <= hi as f64)
    };
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in table.rows.iter().filter(|r| keep(r)) {
        match groups.iter_mut().find(|(x, _)| *x == row[xc]) {
            Some((_, ys)) => ys.push(row[yc]),
            None => groups.push((row[xc], vec![row[yc]])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points = groups
        .into_iter()
        .map(|(x, ys)| match spec.reduce {
            Reduce::Single if ys.len() != 1 => Err(Error::Config(format!(
                "{} rows share {} = {x}; set fit.cycle or reduce = \"mean\"",
                ys.len(),
                spec.x
            ))),
            _ => Ok((x, ys.iter().sum::<f64>() / ys.len() as f64)),
        })
        .collect::<Result<Vec<_>>>()?;
    power_fit(&points)
}

pub fn run_fit(cfg: &RunConfig) -> Result<FitResult> {
    let input = cfg.fit.input.as_ref().ok_or_else(|| Error::Config("fit needs fit.input".into()))?;
    fit_table(&read_table(input)?, cfg)
}

pub fn fit_result_table(fit: &FitResult) -> Table {
    let mut table = Table::new(["exponent", "prefactor", "r_squared", "points"].map(String::from).to_vec());
    table.push(vec![
        Cell::Real(fit.exponent),
        Cell::Real(fit.prefactor),
        Cell::Real(fit.r_squared),
        Cell::Int(fit.points.len() as i64),
    ]);
    table
}

#[cfg(test)]
mod tests {
    use super::super::recipes::recipe;
    use super::*;
    use crate::experiments::config::SweepAxis;

    #[test]
    fn single_point_without_evolution() {
        let mut cfg = recipe("custom").unwrap();
        cfg.cycles = 0;
        cfg.workers = 1;
        let res = run_sweep(&cfg, Engine::Auto).unwrap();
        assert_eq!(res.points.len(), 1);
        let table = trace_table(&res);
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0][1], Cell::Real(1.0));
        assert_eq!(table.rows[0][2], Cell::Real(0.0));
        assert_eq!(table.to_csv_string().lines().count(), 2);
    }

    #[test]
    fn grid_order_and_gates() {
        let mut cfg = recipe("custom").unwrap();
        cfg.sweep = vec![
            SweepAxis { axis: Axis::Sites, values: vec![2.0, 1.0] },
            SweepAxis { axis: Axis::Eta, values: vec![0.1, 0.0] },
        ];
        let (axes, pts) = grid_points(&cfg, &[]).unwrap();
        assert_eq!(axes, vec![Axis::Sites, Axis::Eta]);
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].params.field.eta, 0.0);
        assert_eq!(pts[2].params.probe.sites, 1);

        cfg.sweep = vec![SweepAxis { axis: Axis::Sites, values: vec![6.0] }];
        cfg.gamma = 1e-3;
        assert!(matches!(run_sweep(&cfg, Engine::Auto), Err(Error::ResourceGate(_))));
        cfg.gamma = 0.0;
        cfg.sweep = vec![SweepAxis { axis: Axis::Sites, values: vec![9.0] }];
        assert!(matches!(run_sweep(&cfg, Engine::Auto), Err(Error::ResourceGate(_))));
    }

    #[test]
    fn output_independent_of_workers() {
        let mut cfg = recipe("custom").unwrap();
        cfg.cycles = 4;
        cfg.sweep = vec![
            SweepAxis { axis: Axis::Sites, values: vec![2.0, 1.0] },
            SweepAxis { axis: Axis::HA, values: vec![0.3, 1e-3, 0.05] },
        ];
        cfg.workers = 1;
        let one = trace_table(&run_sweep(&cfg, Engine::Auto).unwrap()).to_csv_string();
        cfg.workers = 3;
        let three = trace_table(&run_sweep(&cfg, Engine::Auto).unwrap()).to_csv_string();
        assert_eq!(one, three);
    }
}
