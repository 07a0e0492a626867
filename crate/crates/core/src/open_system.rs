//! Density-matrix evolution under the piecewise-constant Lindblad equation
//! with local σ^z dephasing on every site, and mixed-state Fisher traces.
//!
//! The right-hand side is applied at operator level. With `K = Hρ` the
//! commutator is `-i(K - K†)`, and σ^z dephasing on all `2L` qubits scales
//! `ρ_xy` by `-2Γ·popcount(x ^ y)`.

use rayon::prelude::*;

use crate::floquet::{chain_energy_diagonal, Half, HalfPeriodSpec, ImbalanceMeter};
use crate::linalg::DenseMatrix;
use crate::metrology::{
    cfi_collective, cfi_computational, point_average, qfi_mixed, Measured, PointAverage, RunMetadata,
    StroboscopicTrace, TraceRecord,
};
use crate::model::{
    build_initial_state, observable_diagonal, Chain, FieldConfig, InitConfig, ObservableKind, ProbeConfig,
    PureState,
};
use crate::{C64, Error, Result};

/// Largest chain length accepted for density-matrix runs.
pub const MAX_MIXED_SITES: usize = 5;
pub const DEFAULT_SUBSTEPS: usize = 64;
/// Minimum eigenvalue below which a cycle is redone with a halved step.
pub const POSITIVITY_FAILURE: f64 = -1e-6;
pub const MAX_RETRIES: usize = 4;
/// Final-state max-norm change accepted by [`converge_substeps`].
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;

const HERMITICITY_TOLERANCE: f64 = 1e-10;
const PARALLEL_MIN_DIM: usize = 256;

/// Density matrix at a stroboscopic time.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub matrix: DenseMatrix,
    pub cycle: usize,
    pub gamma: f64,
}

impl MixedState {
    pub fn from_pure(psi: &PureState, gamma: f64) -> Self {
        MixedState { matrix: DenseMatrix::outer(&psi.amplitudes, &psi.amplitudes), cycle: 0, gamma }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn trace_drift(&self) -> f64 {
        (self.matrix.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal_re()
    }

    pub fn monitor(&self) -> Monitor {
        Monitor {
            cycle: self.cycle,
            trace_drift: self.trace_drift(),
            hermiticity_error: self.matrix.hermiticity_error(),
            min_eigenvalue: self.matrix.min_eigenvalue(),
        }
    }
}

/// Invariant readings taken after a cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub cycle: usize,
    pub trace_drift: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

/// Generator of one half period: `H = diag(d) + J Σ_j X_j` with `X_j` the
/// rung flip-flop, plus dephasing.
#[derive(Debug, Clone)]
struct Segment {
    diagonal: Vec<f64>,
    exchange: f64,
    pair_masks: Vec<usize>,
    duration: f64,
}

impl Segment {
    fn new(cfg: &ProbeConfig, spec: &HalfPeriodSpec, chain_energy: &[f64], field_weight: &[f64]) -> Self {
        let duration = spec.duration(cfg);
        let rate = spec.theta / duration;
        let (diagonal, exchange) = match spec.half {
            Half::Intra => (chain_energy.iter().zip(field_weight).map(|(e, w)| e + rate * w).collect(), 0.0),
            Half::Inter => (field_weight.iter().map(|w| rate * w).collect(), cfg.j_ab()),
        };
        let pair_masks = (0..cfg.sites).map(|j| 0b11usize << (2 * j)).collect();
        Segment { diagonal, exchange, pair_masks, duration }
    }

    /// Row `x` of `K = Hρ`.
    fn hamiltonian_row(&self, x: usize, rho: &[C64], dim: usize, out: &mut [C64]) {
        let d = self.diagonal[x];
        for (o, r) in out.iter_mut().zip(&rho[x * dim..(x + 1) * dim]) {
            *o = r * d;
        }
        if self.exchange == 0.0 {
            return;
        }
        for &mask in &self.pair_masks {
            if (x & mask).count_ones() == 1 {
                let src = x ^ mask;
                for (o, r) in out.iter_mut().zip(&rho[src * dim..(src + 1) * dim]) {
                    *o += r * self.exchange;
                }
            }
        }
    }

    /// `out = -i[H, ρ] + Γ Σ (σ^z ρ σ^z - ρ)`, using `k` as scratch for `Hρ`.
    fn rhs(&self, rho: &[C64], gamma: f64, k: &mut [C64], out: &mut [C64]) {
        let dim = self.diagonal.len();
        let fill_k = |(x, row): (usize, &mut [C64])| self.hamiltonian_row(x, rho, dim, row);
        if dim >= PARALLEL_MIN_DIM {
            k.par_chunks_mut(dim).enumerate().for_each(fill_k);
            let k = &*k;
            out.par_chunks_mut(dim).enumerate().for_each(|(x, row)| rhs_row(x, row, k, rho, gamma));
        } else {
            k.chunks_mut(dim).enumerate().for_each(fill_k);
            let k = &*k;
            out.chunks_mut(dim).enumerate().for_each(|(x, row)| rhs_row(x, row, k, rho, gamma));
        }
    }
}

/// Row `x` of `-i(K - K†) - 2Γ·popcount(x ^ y)·ρ`.
#[inline]
fn rhs_row(x: usize, row: &mut [C64], k: &[C64], rho: &[C64], gamma: f64) {
    let dim = row.len();
    for (y, o) in row.iter_mut().enumerate() {
        let comm = k[x * dim + y] - k[y * dim + x].conj();
        let damping = -2.0 * gamma * (x ^ y).count_ones() as f64;
        *o = C64::new(comm.im, -comm.re) + rho[x * dim + y] * damping;
    }
}

/// Scratch buffers for one RK4 trajectory.
#[derive(Debug, Clone)]
struct Rk4Workspace {
    k: Vec<C64>,
    stage: Vec<C64>,
    probe: Vec<C64>,
    acc: Vec<C64>,
}

impl Rk4Workspace {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Rk4Workspace { k: z.clone(), stage: z.clone(), probe: z.clone(), acc: z }
    }

    fn integrate(&mut self, seg: &Segment, gamma: f64, rho: &mut [C64], substeps: usize) {
        let h = seg.duration / substeps as f64;
        for _ in 0..substeps {
            // k1
            seg.rhs(rho, gamma, &mut self.k, &mut self.stage);
            axpy_into(&mut self.acc, rho, &self.stage, h / 6.0);
            axpy_into(&mut self.probe, rho, &self.stage, h / 2.0);
            // k2
            seg.rhs(&self.probe, gamma, &mut self.k, &mut self.stage);
            accumulate(&mut self.acc, &self.stage, h / 3.0);
            axpy_into(&mut self.probe, rho, &self.stage, h / 2.0);
            // k3
            seg.rhs(&self.probe, gamma, &mut self.k, &mut self.stage);
            accumulate(&mut self.acc, &self.stage, h / 3.0);
            axpy_into(&mut self.probe, rho, &self.stage, h);
            // k4
            seg.rhs(&self.probe, gamma, &mut self.k, &mut self.stage);
            accumulate(&mut self.acc, &self.stage, h / 6.0);
            rho.copy_from_slice(&self.acc);
        }
    }
}

/// `dst = x + s·y`.
fn axpy_into(dst: &mut [C64], x: &[C64], y: &[C64], s: f64) {
    for ((d, a), b) in dst.iter_mut().zip(x).zip(y) {
        *d = a + b * s;
    }
}

fn accumulate(dst: &mut [C64], y: &[C64], s: f64) {
    for (d, b) in dst.iter_mut().zip(y) {
        *d += b * s;
    }
}

fn check_hermitian(rho: &MixedState) -> Result<()> {
    let err = rho.matrix.hermiticity_error();
    if err > HERMITICITY_TOLERANCE {
        return Err(Error::invalid(format!("density matrix is not Hermitian (error {err:e})")));
    }
    Ok(())
}

/// Generator of the given half period applied to `rho`.
pub fn lindblad_rhs(
    rho: &MixedState,
    segment: &HalfPeriodSpec,
    cfg: &ProbeConfig,
    field: &FieldConfig,
    gamma: f64,
) -> Result<DenseMatrix> {
    check_hermitian(rho)?;
    if rho.dim() != cfg.dim() {
        return Err(Error::invalid("density matrix dimension does not match probe"));
    }
    let weight = field_weight(cfg, field);
    let seg = Segment::new(cfg, segment, &chain_energy_diagonal(cfg), &weight);
    let mut k = vec![C64::new(0.0, 0.0); cfg.dim() * cfg.dim()];
    let mut out = k.clone();
    seg.rhs(rho.matrix.as_slice(), gamma, &mut k, &mut out);
    DenseMatrix::from_row_major(cfg.dim(), out)
}

fn field_weight(cfg: &ProbeConfig, field: &FieldConfig) -> Vec<f64> {
    let ga = observable_diagonal(cfg, ObservableKind::GradientZA);
    let gb = observable_diagonal(cfg, ObservableKind::GradientZB);
    ga.iter().zip(&gb).map(|(a, b)| a + field.eta * b).collect()
}

fn check_gate(cfg: &ProbeConfig) -> Result<()> {
    if cfg.sites > MAX_MIXED_SITES {
        return Err(Error::ResourceGate(format!(
            "density-matrix runs need L <= {MAX_MIXED_SITES}, got L = {}",
            cfg.sites
        )));
    }
    Ok(())
}

/// Advances one density-matrix trajectory cycle by cycle.
#[derive(Debug, Clone)]
pub struct LindbladStepper {
    cfg: ProbeConfig,
    field: FieldConfig,
    gamma: f64,
    substeps: usize,
    chain_energy: Vec<f64>,
    field_weight: Vec<f64>,
    work: Rk4Workspace,
}

impl LindbladStepper {
    pub fn new(cfg: &ProbeConfig, field: &FieldConfig, gamma: f64, substeps: usize) -> Result<Self> {
        cfg.validate()?;
        field.validate_shape()?;
        check_gate(cfg)?;
        if substeps < 1 {
            return Err(Error::invalid("substeps must be at least 1"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("dephasing rate must be >= 0, got {gamma}")));
        }
        Ok(LindbladStepper {
            cfg: *cfg,
            field: *field,
            gamma,
            substeps,
            chain_energy: chain_energy_diagonal(cfg),
            field_weight: field_weight(cfg, field),
            work: Rk4Workspace::new(cfg.dim() * cfg.dim()),
        })
    }

    /// Current substeps per half period; grows after positivity retries.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    fn integrate_cycle(&mut self, rho: &mut [C64], n: usize, substeps: usize) {
        for half in [Half::Intra, Half::Inter] {
            let spec = HalfPeriodSpec::new(n, half, &self.field, &self.cfg);
            let seg = Segment::new(&self.cfg, &spec, &self.chain_energy, &self.field_weight);
            self.work.integrate(&seg, self.gamma, rho, substeps);
        }
    }

    /// Evolves `state` through its next cycle. A positivity loss beyond
    /// [`POSITIVITY_FAILURE`] redoes the cycle with a halved step.
    pub fn advance(&mut self, state: &mut MixedState) -> Result<Monitor> {
        if state.dim() != self.cfg.dim() {
            return Err(Error::invalid("density matrix dimension does not match probe"));
        }
        let n = state.cycle + 1;
        let start = state.matrix.clone();
        for attempt in 0..=MAX_RETRIES {
            self.integrate_cycle(state.matrix.as_mut_slice(), n, self.substeps);
            state.cycle = n;
            let monitor = state.monitor();
            if monitor.min_eigenvalue >= POSITIVITY_FAILURE {
                return Ok(monitor);
            }
            log::warn!(
                "cycle {n}: minimum eigenvalue {:e}, retry {} with {} substeps",
                monitor.min_eigenvalue,
                attempt + 1,
                2 * self.substeps
            );
            state.matrix = start.clone();
            state.cycle = n - 1;
            self.substeps *= 2;
        }
        Err(Error::IntegrationFailure(format!(
            "positivity lost in cycle {n} after {MAX_RETRIES} step halvings"
        )))
    }
}

/// Result of [`evolve_lindblad`].
#[derive(Debug, Clone)]
pub struct LindbladRun {
    pub final_state: MixedState,
    pub monitors: Vec<Monitor>,
    pub substeps: usize,
}

/// Integrates `cycles` drive periods, calling `observer` after each one.
pub fn evolve_lindblad<F>(
    rho: &MixedState,
    cycles: usize,
    cfg: &ProbeConfig,
    field: &FieldConfig,
    gamma: f64,
    substeps: usize,
    mut observer: F,
) -> Result<LindbladRun>
where
    F: FnMut(&MixedState) -> Result<()>,
{
    check_hermitian(rho)?;
    let mut stepper = LindbladStepper::new(cfg, field, gamma, substeps)?;
    let mut state = MixedState { gamma, ..rho.clone() };
    let mut monitors = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        monitors.push(stepper.advance(&mut state)?);
        observer(&state)?;
    }
    Ok(LindbladRun { final_state: state, monitors, substeps: stepper.substeps() })
}

/// Doubles the substep count from `start` until the final state changes by
/// less than [`CONVERGENCE_TOLERANCE`] in max-norm. Returns the converged
/// run, which used the returned `substeps`.
pub fn converge_substeps(
    rho: &MixedState,
    cycles: usize,
    cfg: &ProbeConfig,
    field: &FieldConfig,
    gamma: f64,
    start: usize,
    max_doublings: usize,
) -> Result<LindbladRun> {
    let mut previous = evolve_lindblad(rho, cycles, cfg, field, gamma, start, |_| Ok(()))?;
    for _ in 0..max_doublings {
        let next = evolve_lindblad(rho, cycles, cfg, field, gamma, 2 * previous.substeps, |_| Ok(()))?;
        let change = next.final_state.matrix.max_abs_diff(&previous.final_state.matrix);
        log::debug!("substeps {}: change {change:e}", next.substeps);
        if change < CONVERGENCE_TOLERANCE {
            return Ok(next);
        }
        previous = next;
    }
    Err(Error::IntegrationFailure(format!(
        "no convergence to {CONVERGENCE_TOLERANCE:e} after {max_doublings} doublings"
    )))
}

/// Noisy Fisher trace and its point averages.
#[derive(Debug, Clone)]
pub struct NoisyFisher {
    pub trace: StroboscopicTrace,
    pub points: Vec<PointAverage>,
    pub monitors: Vec<Monitor>,
}

/// Finite-difference step in `h_a` for `∂ρ`.
pub fn fd_step(h_a: f64) -> f64 {
    (1e-3 * h_a).max(1e-6)
}

/// Mixed-state QFI and CFIs over `cycles` under dephasing `gamma`, with
/// `∂ρ` from central differences. Returns the per-cycle trace and its
/// average over `intervals` blocks of `step` cycles.
#[allow(clippy::too_many_arguments)]
pub fn noisy_fisher(
    cfg: &ProbeConfig,
    field: &FieldConfig,
    init: &InitConfig,
    gamma: f64,
    cycles: usize,
    step: usize,
    intervals: usize,
    substeps: usize,
) -> Result<NoisyFisher> {
    check_gate(cfg)?;
    field.validate()?;
    if step * intervals > cycles {
        return Err(Error::invalid(format!("K*dn = {} exceeds N = {cycles}", step * intervals)));
    }
    let psi0 = build_initial_state(cfg, init)?;
    let meter = ImbalanceMeter::new(cfg, &psi0)?;
    let dh = fd_step(field.h_a);
    let fields = [field.with_h_a(field.h_a + dh), *field, field.with_h_a(field.h_a - dh)];
    let mut steppers = fields
        .iter()
        .map(|f| LindbladStepper::new(cfg, f, gamma, substeps))
        .collect::<Result<Vec<_>>>()?;
    let start = MixedState::from_pure(&psi0, gamma);
    let mut states = [start.clone(), start.clone(), start];

    let mut records = vec![TraceRecord { n: 0, imbalance: 1.0, qfi: 0.0, cfi_computational: 0.0, cfi_collective: 0.0 }];
    let mut monitors = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let (plus_stepper, rest) = steppers.split_at_mut(1);
        let (mid_stepper, minus_stepper) = rest.split_at_mut(1);
        let (plus_state, rest) = states.split_at_mut(1);
        let (mid_state, minus_state) = rest.split_at_mut(1);
        let (plus, (mid, minus)) = rayon::join(
            || plus_stepper[0].advance(&mut plus_state[0]),
            || {
                rayon::join(
                    || mid_stepper[0].advance(&mut mid_state[0]),
                    || minus_stepper[0].advance(&mut minus_state[0]),
                )
            },
        );
        plus?;
        minus?;
        monitors.push(mid?);

        let rho = &states[1].matrix;
        let mut drho = states[0].matrix.clone();
        drho.add_scaled(-1.0, &states[2].matrix);
        let drho = drho.scaled(1.0 / (2.0 * dh));
        let measured = Measured::Mixed { rho, drho: &drho };
        records.push(TraceRecord {
            n: states[1].cycle,
            imbalance: meter.evaluate_populations(&states[1].populations()),
            qfi: qfi_mixed(rho, &drho)?,
            cfi_computational: cfi_computational(measured)?,
            cfi_collective: cfi_collective(measured, cfg, Chain::A)?,
        });
    }
    let trace = StroboscopicTrace {
        meta: RunMetadata { probe: *cfg, field: *field, init: *init, gamma: Some(gamma) },
        records,
    };
    let points = point_average(&trace, step, intervals)?;
    Ok(NoisyFisher { trace, points, monitors })
}
