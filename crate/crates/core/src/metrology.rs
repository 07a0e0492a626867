//! Fisher information (quantum and classical), stroboscopic traces,
//! averaging, power-law fits, transition detection and the analytic QFI
//! bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::floquet::{FloquetEngine, ImbalanceMeter};
use crate::linalg::DenseMatrix;
use crate::model::{
    build_initial_state, observable_diagonal, qubit, reference_index, Chain, FieldConfig, InitConfig,
    ObservableKind, ProbeConfig, PureState,
};
use crate::{C64, Error, Result};

/// Outcomes with probability at or below this are dropped from CFI sums.
pub const PROBABILITY_CUTOFF: f64 = 1e-14;
/// Eigenvalue pairs with `λ_i + λ_j` at or below this are dropped from the
/// mixed-state QFI.
pub const EIGENVALUE_SUM_CUTOFF: f64 = 1e-12;
/// Tolerance for the Cramér-Rao and coarse-graining orderings.
pub const ORDERING_TOLERANCE: f64 = 1e-8;

const NEGATIVE_QFI_TOLERANCE: f64 = 1e-10;
const NEGATIVE_PROBABILITY_TOLERANCE: f64 = 1e-12;
/// Integrated density matrices only keep positivity to the monitored floor,
/// so their populations get the same slack.
const MIXED_NEGATIVE_PROBABILITY_TOLERANCE: f64 = 1e-8;

/// `4(⟨∂ψ|∂ψ⟩ - |⟨∂ψ|ψ⟩|²)` for a state carrying its tangent.
pub fn qfi_pure(state: &PureState) -> Result<f64> {
    let tangent = state.tangent.as_ref().ok_or_else(|| Error::invalid("QFI needs a tangent vector"))?;
    let dd: f64 = tangent.iter().map(|t| t.norm_sqr()).sum();
    let dpsi: C64 = tangent.iter().zip(&state.amplitudes).map(|(t, a)| t.conj() * a).sum();
    let qfi = 4.0 * (dd - dpsi.norm_sqr());
    clamp_nonnegative(qfi, "pure-state QFI")
}

fn clamp_nonnegative(value: f64, what: &str) -> Result<f64> {
    if value < -NEGATIVE_QFI_TOLERANCE {
        return Err(Error::Numerical(format!("{what} is negative: {value:e}")));
    }
    Ok(value.max(0.0))
}

/// Spectral mixed-state QFI `2 Σ |⟨i|∂ρ|j⟩|² / (λ_i + λ_j)`.
pub fn qfi_mixed(rho: &DenseMatrix, drho: &DenseMatrix) -> Result<f64> {
    if rho.dim() != drho.dim() {
        return Err(Error::invalid("rho and its derivative differ in dimension"));
    }
    let herm = rho.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::invalid(format!("density matrix is not Hermitian (error {herm:e})")));
    }
    let dherm = drho.hermiticity_error();
    if dherm > 1e-8 * drho.max_abs().max(1.0) {
        return Err(Error::invalid(format!("derivative is not Hermitian (error {dherm:e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
        return Err(Error::invalid(format!("density matrix trace is {tr}")));
    }
    let (values, vectors) = rho.hermitian_eigen();
    let m = vectors.adjoint() * drho.to_nalgebra() * &vectors;
    let dim = rho.dim();
    let mut qfi = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let s = values[i] + values[j];
            if s > EIGENVALUE_SUM_CUTOFF {
                qfi += 2.0 * m[(i, j)].norm_sqr() / s;
            }
        }
    }
    clamp_nonnegative(qfi, "mixed-state QFI")
}

/// A parameter-dependent state together with its `h_a` derivative.
#[derive(Debug, Clone, Copy)]
pub enum Measured<'a> {
    Pure(&'a PureState),
    Mixed { rho: &'a DenseMatrix, drho: &'a DenseMatrix },
}

impl Measured<'_> {
    fn negative_tolerance(&self) -> f64 {
        match self {
            Measured::Pure(_) => NEGATIVE_PROBABILITY_TOLERANCE,
            Measured::Mixed { .. } => MIXED_NEGATIVE_PROBABILITY_TOLERANCE,
        }
    }

    /// Computational-basis populations and their derivatives.
    pub fn populations(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Measured::Pure(state) => {
                let tangent =
                    state.tangent.as_ref().ok_or_else(|| Error::invalid("CFI needs a tangent vector"))?;
                let p = state.probabilities();
                let dp = state.amplitudes.iter().zip(tangent).map(|(a, t)| 2.0 * (a.conj() * t).re).collect();
                Ok((p, dp))
            }
            Measured::Mixed { rho, drho } => {
                if rho.dim() != drho.dim() {
                    return Err(Error::invalid("rho and its derivative differ in dimension"));
                }
                Ok((rho.diagonal_re(), drho.diagonal_re()))
            }
        }
    }
}

/// `Σ_{p > cutoff} (∂p)² / p`.
pub fn cfi_from_distribution(p: &[f64], dp: &[f64]) -> Result<f64> {
    cfi_with_tolerance(p, dp, NEGATIVE_PROBABILITY_TOLERANCE)
}

fn cfi_with_tolerance(p: &[f64], dp: &[f64], tolerance: f64) -> Result<f64> {
    if p.len() != dp.len() {
        return Err(Error::invalid("distribution and derivative lengths differ"));
    }
    let mut cfi = 0.0;
    for (&pi, &di) in p.iter().zip(dp) {
        if pi < -tolerance {
            return Err(Error::Numerical(format!("negative probability {pi:e}")));
        }
        if pi > PROBABILITY_CUTOFF {
            cfi += di * di / pi;
        }
    }
    Ok(cfi)
}

/// CFI of a projective measurement in the computational basis.
pub fn cfi_computational(measured: Measured<'_>) -> Result<f64> {
    let (p, dp) = measured.populations()?;
    cfi_with_tolerance(&p, &dp, measured.negative_tolerance())
}

/// CFI of measuring the collective magnetisation `S^{μz}` of one chain.
/// Outcomes are its eigenvalues `m ∈ {-L, -L+2, …, L}`.
pub fn cfi_collective(measured: Measured<'_>, cfg: &ProbeConfig, chain: Chain) -> Result<f64> {
    let (p, dp) = measured.populations()?;
    if p.len() != cfg.dim() {
        return Err(Error::invalid("state dimension does not match probe"));
    }
    let mask: usize = (1..=cfg.sites).map(|j| 1usize << qubit(chain, j)).sum();
    let mut pm = vec![0.0; cfg.sites + 1];
    let mut dpm = vec![0.0; cfg.sites + 1];
    for (z, (pz, dz)) in p.iter().zip(&dp).enumerate() {
        // outcome index = number of down spins in the chain
        let k = (z & mask).count_ones() as usize;
        pm[k] += pz;
        dpm[k] += dz;
    }
    cfi_with_tolerance(&pm, &dpm, measured.negative_tolerance())
}

/// Stroboscopic record at cycle `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub n: usize,
    pub imbalance: f64,
    pub qfi: f64,
    pub cfi_computational: f64,
    pub cfi_collective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub probe: ProbeConfig,
    pub field: FieldConfig,
    pub init: InitConfig,
    /// Dephasing rate; `None` for closed-system runs.
    pub gamma: Option<f64>,
}

/// Per-cycle record for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StroboscopicTrace {
    pub meta: RunMetadata,
    pub records: Vec<TraceRecord>,
}

impl StroboscopicTrace {
    pub fn cycles(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn at(&self, n: usize) -> Option<&TraceRecord> {
        self.records.get(n).filter(|r| r.n == n)
    }

    pub fn series(&self, quantity: FisherQuantity) -> Vec<f64> {
        self.records.iter().map(|r| quantity.of(r)).collect()
    }

    /// Cycles at which the Cramér-Rao or coarse-graining ordering fails.
    pub fn ordering_violations(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| {
                r.cfi_computational > r.qfi + ORDERING_TOLERANCE
                    || r.cfi_collective > r.qfi + ORDERING_TOLERANCE
                    || r.cfi_collective > r.cfi_computational + ORDERING_TOLERANCE
            })
            .map(|r| r.n)
            .collect()
    }

    /// Cycles at which the QFI exceeds `n²L²(L+1)²/π²`. The bound is
    /// meaningful for resonant runs from the unrotated reference state;
    /// rotated initial states can exceed it.
    pub fn bound_violations(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.qfi > qfi_bound(&self.meta.probe, r.n) * (1.0 + 1e-8))
            .map(|r| r.n)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherQuantity {
    Qfi,
    CfiComputational,
    CfiCollective,
}

impl FisherQuantity {
    pub const ALL: [FisherQuantity; 3] =
        [FisherQuantity::Qfi, FisherQuantity::CfiComputational, FisherQuantity::CfiCollective];

    pub fn of(self, r: &TraceRecord) -> f64 {
        match self {
            FisherQuantity::Qfi => r.qfi,
            FisherQuantity::CfiComputational => r.cfi_computational,
            FisherQuantity::CfiCollective => r.cfi_collective,
        }
    }
}

/// Pure-state trace: imbalance, QFI and both CFIs at every cycle.
pub fn pure_trace(cfg: &ProbeConfig, field: &FieldConfig, init: &InitConfig, cycles: usize) -> Result<StroboscopicTrace> {
    field.validate()?;
    let engine = FloquetEngine::new(cfg, field)?;
    let psi0 = build_initial_state(cfg, init)?;
    let meter = ImbalanceMeter::new(cfg, &psi0)?;
    let mut psi = psi0.with_zero_tangent();
    let mut records = Vec::with_capacity(cycles + 1);
    records.push(pure_record(0, &psi, &meter, cfg)?);
    for n in 1..=cycles {
        engine.propagate_with_tangent(&mut psi, n)?;
        records.push(pure_record(n, &psi, &meter, cfg)?);
    }
    Ok(StroboscopicTrace { meta: RunMetadata { probe: *cfg, field: *field, init: *init, gamma: None }, records })
}

fn pure_record(n: usize, psi: &PureState, meter: &ImbalanceMeter, cfg: &ProbeConfig) -> Result<TraceRecord> {
    Ok(TraceRecord {
        n,
        imbalance: meter.evaluate(psi),
        qfi: qfi_pure(psi)?,
        cfi_computational: cfi_computational(Measured::Pure(psi))?,
        cfi_collective: cfi_collective(Measured::Pure(psi), cfg, Chain::A)?,
    })
}

/// QFI after `n` cycles.
pub fn qfi_at(cfg: &ProbeConfig, field: &FieldConfig, init: &InitConfig, n: usize) -> Result<f64> {
    let engine = FloquetEngine::new(cfg, field)?;
    let mut psi = build_initial_state(cfg, init)?.with_zero_tangent();
    engine.evolve(&mut psi, 1, n)?;
    qfi_pure(&psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherAverages {
    pub qfi: f64,
    pub cfi_computational: f64,
    pub cfi_collective: f64,
}

impl FisherAverages {
    pub fn get(&self, quantity: FisherQuantity) -> f64 {
        match quantity {
            FisherQuantity::Qfi => self.qfi,
            FisherQuantity::CfiComputational => self.cfi_computational,
            FisherQuantity::CfiCollective => self.cfi_collective,
        }
    }
}

fn average_records(trace: &StroboscopicTrace, first: usize, last: usize) -> Result<FisherAverages> {
    let mut sum = [0.0; 3];
    for n in first..=last {
        let r = trace.at(n).ok_or_else(|| Error::invalid(format!("trace has no record for n = {n}")))?;
        for (s, q) in sum.iter_mut().zip(FisherQuantity::ALL) {
            *s += q.of(r);
        }
    }
    let count = (last + 1 - first) as f64;
    Ok(FisherAverages { qfi: sum[0] / count, cfi_computational: sum[1] / count, cfi_collective: sum[2] / count })
}

/// `(1/N) Σ_{n=1}^{N} F(n)` for every Fisher quantity.
pub fn time_average(trace: &StroboscopicTrace, cycles: usize) -> Result<FisherAverages> {
    if cycles < 1 {
        return Err(Error::invalid("time average needs N >= 1"));
    }
    if trace.cycles() < cycles {
        return Err(Error::invalid(format!("trace covers {} cycles, {cycles} requested", trace.cycles())));
    }
    average_records(trace, 1, cycles)
}

/// Average over the interval `((i-1)Δn, iΔn]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointAverage {
    /// Interval index `i`, 1-based.
    pub interval: usize,
    /// Right end `iΔn`; abscissa used for fits.
    pub n_end: f64,
    /// Midpoint `(i - 1/2)Δn`.
    pub n_mid: f64,
    /// Cumulative `Σ_{i'=1}^{i} i'Δn`.
    pub n_cumulative: f64,
    pub values: FisherAverages,
}

pub fn point_average(trace: &StroboscopicTrace, step: usize, intervals: usize) -> Result<Vec<PointAverage>> {
    if step == 0 || intervals == 0 {
        return Err(Error::invalid("point average needs non-empty intervals"));
    }
    if step * intervals > trace.cycles() {
        return Err(Error::invalid(format!(
            "K*dn = {} exceeds the {} recorded cycles",
            step * intervals,
            trace.cycles()
        )));
    }
    let mut cumulative = 0.0;
    (1..=intervals)
        .map(|i| {
            let end = (i * step) as f64;
            cumulative += end;
            Ok(PointAverage {
                interval: i,
                n_end: end,
                n_mid: end - 0.5 * step as f64,
                n_cumulative: cumulative,
                values: average_records(trace, (i - 1) * step + 1, i * step)?,
            })
        })
        .collect()
}

/// Straight-line fit of `ln y` against `ln x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn power_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("power fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(bad) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::invalid(format!("power fit needs positive data, got {bad:?}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let count = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power fit needs at least two distinct abscissae"));
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = logs.iter().map(|(_, y)| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult { exponent: slope, prefactor: intercept.exp(), r_squared, points: points.to_vec() })
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    pub h_max: f64,
    pub value: f64,
    /// Index of the best grid point.
    pub grid_index: usize,
    /// The grid maximum sat on the first or last grid point.
    pub boundary_peak: bool,
}

/// Stop golden-section search once `hi/lo - 1` falls below this.
const TRANSITION_REL_WIDTH: f64 = 1e-3;

/// Maximises `f` over a log-spaced grid, then refines the bracketing
/// interval by golden-section search in `ln h`.
pub fn find_peak<F>(grid: &[f64], mut f: F) -> Result<TransitionPoint>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.len() < 3 {
        return Err(Error::invalid("transition grid needs at least 3 points"));
    }
    if grid.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
        return Err(Error::invalid("transition grid must be positive and increasing"));
    }
    let values = grid.iter().map(|&h| f(h)).collect::<Result<Vec<f64>>>()?;
    let (best, &best_value) =
        values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("grid is non-empty");
    let boundary_peak = best == 0 || best == grid.len() - 1;
    if boundary_peak {
        log::warn!(
            "transition peak at grid boundary h = {:e}; widen the grid",
            grid[best]
        );
    }
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (h, value) = golden_section_max(lo, hi, |x| f(x.exp()))?;
    let point = if value >= best_value {
        TransitionPoint { h_max: h.exp(), value, grid_index: best, boundary_peak }
    } else {
        TransitionPoint { h_max: grid[best], value: best_value, grid_index: best, boundary_peak }
    };
    Ok(point)
}

fn golden_section_max<F>(mut a: f64, mut b: f64, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let width = (1.0 + TRANSITION_REL_WIDTH).ln();
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > width {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Field amplitude maximising the QFI after `n` cycles.
pub fn find_transition(
    cfg: &ProbeConfig,
    field_template: &FieldConfig,
    init: &InitConfig,
    n: usize,
    grid: &[f64],
) -> Result<TransitionPoint> {
    find_peak(grid, |h| qfi_at(cfg, &field_template.with_h_a(h), init, n))
}

/// Field amplitude at which the imbalance `I(nT)` drops most steeply
/// between neighbouring grid points. Independent detector of the DTC
/// melting, to be compared with [`find_transition`].
pub fn imbalance_drop(
    cfg: &ProbeConfig,
    field_template: &FieldConfig,
    init: &InitConfig,
    n: usize,
    grid: &[f64],
) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::invalid("imbalance grid needs at least 2 points"));
    }
    let psi0 = build_initial_state(cfg, init)?;
    let meter = ImbalanceMeter::new(cfg, &psi0)?;
    let values = grid
        .iter()
        .map(|&h| {
            let engine = FloquetEngine::new(cfg, &field_template.with_h_a(h))?;
            let mut psi = psi0.clone();
            engine.evolve(&mut psi, 1, n)?;
            Ok(meter.evaluate(&psi).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (k, _) = values
        .windows(2)
        .map(|w| w[0] - w[1])
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one interval");
    Ok((grid[k] * grid[k + 1]).sqrt())
}

/// `n² L² (L+1)² / π²`.
pub fn qfi_bound(cfg: &ProbeConfig, n: usize) -> f64 {
    let l = cfg.sites as f64;
    let n = n as f64;
    n * n * l * l * (l + 1.0) * (l + 1.0) / (PI * PI)
}

/// `4 n² (ΔG^{az})² / π²` with the variance taken in `state`.
pub fn variance_bound(cfg: &ProbeConfig, n: usize, state: &PureState) -> f64 {
    let g = observable_diagonal(cfg, ObservableKind::GradientZA);
    let mean = state.expectation_diagonal(&g);
    let second: f64 = state.amplitudes.iter().zip(&g).map(|(a, x)| a.norm_sqr() * x * x).sum();
    let var = (second - mean * mean).max(0.0);
    4.0 * (n * n) as f64 * var / (PI * PI)
}

/// `(|↑…↑⟩_a|↓…↓⟩_b + |↓…↓⟩_a|↑…↑⟩_b)/√2`, the state saturating the
/// variance bound.
pub fn ghz_reference(cfg: &ProbeConfig) -> PureState {
    let upper = reference_index(cfg);
    let flipped = upper ^ (cfg.dim() - 1);
    let mut amplitudes = vec![C64::new(0.0, 0.0); cfg.dim()];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    amplitudes[upper] = C64::new(s, 0.0);
    amplitudes[flipped] = C64::new(s, 0.0);
    PureState::new(amplitudes)
}
