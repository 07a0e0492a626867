//! Stroboscopic Floquet propagation of the driven two-chain probe.
//!
//! One drive cycle `n` is the product of two half-period factors:
//!
//! 1. an intra-chain half, diagonal in the computational basis, with phase
//!    `φ(z) = t1·E_chain(z) + Θ_n^{(1)}·(g_a(z) + η g_b(z))`;
//! 2. an inter-chain half, factorised into `L` commuting 4×4 gates, one per
//!    rung `(a_j, b_j)`, each `exp(-i[t2 J_ab (σ^+σ^- + h.c.) + Θ_n^{(2)} j (σ^{az} + η σ^{bz})])`.
//!
//! The sinusoidal field enters only through its time integral `Θ` over
//! each half period. Durations are kept explicit so that `J_ab t2 = π/2` at
//! `ε = 0`, which is a full exchange per cycle.
//!
//! Every factor is also differentiated with respect to `h_a`, so a state
//! carrying a tangent vector is propagated together with `∂_{h_a}|ψ⟩`.

use std::f64::consts::PI;

use crate::linalg::{expm_neg_i_with_frechet, Mat4};
use crate::model::{
    observable_diagonal, qubit, spin, Chain, FieldConfig, ObservableKind, ProbeConfig, PureState, J_Z,
};
use crate::{C64, Error, Result};

/// Which half of a drive cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Half {
    /// Intra-chain Ising half, duration `t1`.
    Intra,
    /// Inter-chain exchange half, duration `t2`.
    Inter,
}

/// Accumulated field phase of one half period, and its `h_a` derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPeriodSpec {
    pub n: usize,
    pub half: Half,
    pub theta: f64,
    pub dtheta: f64,
}

impl HalfPeriodSpec {
    pub fn new(n: usize, half: Half, field: &FieldConfig, cfg: &ProbeConfig) -> Self {
        HalfPeriodSpec {
            n,
            half,
            theta: theta_half(n, half, field, cfg),
            dtheta: theta_half(n, half, &field.with_h_a(1.0), cfg),
        }
    }

    /// Duration of this half period.
    pub fn duration(&self, cfg: &ProbeConfig) -> f64 {
        match self.half {
            Half::Intra => cfg.t1(),
            Half::Inter => cfg.t2(),
        }
    }
}

/// `h_a ∫ sin(π(1+δf)τ/T) dτ` over the requested half of cycle `n ≥ 1`.
///
/// At resonance both halves give `(-1)^{n+1} h_a / (π J_z)`.
pub fn theta_half(n: usize, half: Half, field: &FieldConfig, cfg: &ProbeConfig) -> f64 {
    assert!(n >= 1, "cycle index starts at 1");
    let period = cfg.period();
    let omega = 1.0 + field.delta_f;
    let n = n as f64;
    let (start, end) = match half {
        Half::Intra => (n - 1.0, n - 0.5),
        Half::Inter => (n - 0.5, n),
    };
    let primitive = |s: f64| (PI * omega * s).cos();
    field.h_a * period / (PI * omega) * (primitive(start) - primitive(end))
}

/// Diagonal factor `exp(-iφ)` of the intra-chain half.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPhase {
    pub phase: Vec<f64>,
    /// `∂φ/∂h_a`.
    pub phase_derivative: Vec<f64>,
}

impl DiagonalPhase {
    pub fn apply(&self, state: &mut PureState) {
        let PureState { amplitudes, tangent } = state;
        match tangent {
            Some(t) => {
                for (((psi, tan), &phi), &dphi) in
                    amplitudes.iter_mut().zip(t.iter_mut()).zip(&self.phase).zip(&self.phase_derivative)
                {
                    let u = C64::from_polar(1.0, -phi);
                    // ∂(e^{-iφ}ψ) = e^{-iφ}(∂ψ - i ∂φ ψ)
                    *tan = u * (*tan - C64::new(0.0, dphi) * *psi);
                    *psi *= u;
                }
            }
            None => {
                for (psi, &phi) in amplitudes.iter_mut().zip(&self.phase) {
                    *psi *= C64::from_polar(1.0, -phi);
                }
            }
        }
    }
}

/// Exponent of the rung gate at site `site` (1-based) in the local basis
/// `p = a_bit + 2·b_bit`.
pub fn pair_exponent(cfg: &ProbeConfig, site: usize, theta: f64, eta: f64) -> Mat4 {
    let exchange = cfg.t2() * cfg.j_ab();
    let mut m = field_pair_generator(site, eta).map(|v| v * theta);
    m[(1, 2)] = C64::new(exchange, 0.0);
    m[(2, 1)] = C64::new(exchange, 0.0);
    m
}

/// `j (σ^{az} + η σ^{bz})` on one rung.
fn field_pair_generator(site: usize, eta: f64) -> Mat4 {
    let j = site as f64;
    let mut m = Mat4::zeros();
    for p in 0..4 {
        let sa = spin(p, 0);
        let sb = spin(p, 1);
        m[(p, p)] = C64::new(j * (sa + eta * sb), 0.0);
    }
    m
}

/// 4×4 unitary on the rung `(a_j, b_j)` and its `h_a` derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGate {
    /// 1-based site index.
    pub site: usize,
    pub unitary: Mat4,
    pub derivative: Mat4,
}

impl PairGate {
    pub fn new(cfg: &ProbeConfig, site: usize, eta: f64, spec: &HalfPeriodSpec) -> Self {
        let exponent = pair_exponent(cfg, site, spec.theta, eta);
        let direction = field_pair_generator(site, eta).map(|v| v * spec.dtheta);
        let (unitary, derivative) = expm_neg_i_with_frechet(&exponent, &direction);
        PairGate { site, unitary, derivative }
    }

    /// Applies the gate in place. Amplitudes outside the rung's four
    /// configurations of each block are untouched, so gates on distinct
    /// sites commute.
    pub fn apply(&self, state: &mut PureState) {
        let shift = qubit(Chain::A, self.site);
        let dim = state.dim();
        let lo_count = 1usize << shift;
        let hi_count = dim >> (shift + 2);
        let PureState { amplitudes, tangent } = state;
        let u = &self.unitary;
        let du = &self.derivative;
        for hi in 0..hi_count {
            for lo in 0..lo_count {
                let base = (hi << (shift + 2)) | lo;
                let idx = [base, base | (1 << shift), base | (2 << shift), base | (3 << shift)];
                let psi = idx.map(|i| amplitudes[i]);
                if let Some(t) = tangent.as_mut() {
                    let tan = idx.map(|i| t[i]);
                    for (p, &i) in idx.iter().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for q in 0..4 {
                            acc += u[(p, q)] * tan[q] + du[(p, q)] * psi[q];
                        }
                        t[i] = acc;
                    }
                }
                for (p, &i) in idx.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..4 {
                        acc += u[(p, q)] * psi[q];
                    }
                    amplitudes[i] = acc;
                }
            }
        }
    }
}

/// Both half-period factors of one drive cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub n: usize,
    pub intra: HalfPeriodSpec,
    pub inter: HalfPeriodSpec,
    pub diagonal: DiagonalPhase,
    pub gates: Vec<PairGate>,
}

impl Cycle {
    /// Assembles a cycle from explicit half-period phases. `field_weight` is
    /// the diagonal of the field generator `G^{az} + η G^{bz}`.
    pub fn assemble(
        cfg: &ProbeConfig,
        eta: f64,
        chain_energy: &[f64],
        field_weight: &[f64],
        intra: HalfPeriodSpec,
        inter: HalfPeriodSpec,
    ) -> Self {
        let t1 = cfg.t1();
        let phase = chain_energy.iter().zip(field_weight).map(|(e, w)| t1 * e + intra.theta * w).collect();
        let phase_derivative = field_weight.iter().map(|w| intra.dtheta * w).collect();
        let gates = (1..=cfg.sites).map(|site| PairGate::new(cfg, site, eta, &inter)).collect();
        Cycle {
            n: intra.n,
            intra,
            inter,
            diagonal: DiagonalPhase { phase, phase_derivative },
            gates,
        }
    }

    /// Diagonal half first, then every rung gate.
    pub fn apply(&self, state: &mut PureState) {
        self.diagonal.apply(state);
        for gate in &self.gates {
            gate.apply(state);
        }
    }
}

/// Eigenvalues of `H_a + H_b = -J_z Σ_μ Σ_j σ^{μz}_j σ^{μz}_{j+1}` (open
/// boundaries) over the computational basis.
pub fn chain_energy_diagonal(cfg: &ProbeConfig) -> Vec<f64> {
    (0..cfg.dim())
        .map(|z| {
            let mut e = 0.0;
            for j in 1..cfg.sites {
                for chain in [Chain::A, Chain::B] {
                    e -= J_Z * spin(z, qubit(chain, j)) * spin(z, qubit(chain, j + 1));
                }
            }
            e
        })
        .collect()
}

/// Per-trajectory propagator: precomputed diagonals for a fixed probe and
/// field. Holds no mutable state; distinct trajectories may share one
/// engine across threads.
#[derive(Debug, Clone)]
pub struct FloquetEngine {
    cfg: ProbeConfig,
    field: FieldConfig,
    chain_energy: Vec<f64>,
    field_weight: Vec<f64>,
}

impl FloquetEngine {
    pub fn new(cfg: &ProbeConfig, field: &FieldConfig) -> Result<Self> {
        cfg.validate()?;
        field.validate_shape()?;
        let ga = observable_diagonal(cfg, ObservableKind::GradientZA);
        let gb = observable_diagonal(cfg, ObservableKind::GradientZB);
        let field_weight = ga.iter().zip(&gb).map(|(a, b)| a + field.eta * b).collect();
        Ok(FloquetEngine { cfg: *cfg, field: *field, chain_energy: chain_energy_diagonal(cfg), field_weight })
    }

    pub fn probe(&self) -> &ProbeConfig {
        &self.cfg
    }

    pub fn field(&self) -> &FieldConfig {
        &self.field
    }

    pub fn chain_energy(&self) -> &[f64] {
        &self.chain_energy
    }

    /// Diagonal of `G^{az} + η G^{bz}`.
    pub fn field_weight(&self) -> &[f64] {
        &self.field_weight
    }

    pub fn half_spec(&self, n: usize, half: Half) -> HalfPeriodSpec {
        HalfPeriodSpec::new(n, half, &self.field, &self.cfg)
    }

    pub fn build_cycle(&self, n: usize) -> Result<Cycle> {
        if n == 0 {
            return Err(Error::invalid("cycle index starts at 1"));
        }
        Ok(Cycle::assemble(
            &self.cfg,
            self.field.eta,
            &self.chain_energy,
            &self.field_weight,
            self.half_spec(n, Half::Intra),
            self.half_spec(n, Half::Inter),
        ))
    }

    fn check_dim(&self, state: &PureState) -> Result<()> {
        if state.dim() != self.cfg.dim() {
            return Err(Error::invalid(format!(
                "state has dimension {}, probe with L = {} needs {}",
                state.dim(),
                self.cfg.sites,
                self.cfg.dim()
            )));
        }
        if let Some(t) = &state.tangent {
            if t.len() != state.dim() {
                return Err(Error::invalid("tangent length differs from state length"));
            }
        }
        Ok(())
    }

    /// Advances `state` through cycle `n`; an attached tangent is
    /// co-propagated.
    pub fn apply_cycle(&self, state: &mut PureState, n: usize) -> Result<()> {
        self.check_dim(state)?;
        self.build_cycle(n)?.apply(state);
        Ok(())
    }

    /// Like [`apply_cycle`](Self::apply_cycle) but requires a tangent.
    pub fn propagate_with_tangent(&self, state: &mut PureState, n: usize) -> Result<()> {
        if state.tangent.is_none() {
            return Err(Error::invalid("state carries no tangent vector"));
        }
        self.apply_cycle(state, n)
    }

    /// Applies cycles `first..first + count`.
    pub fn evolve(&self, state: &mut PureState, first: usize, count: usize) -> Result<()> {
        for n in first..first + count {
            self.apply_cycle(state, n)?;
        }
        Ok(())
    }
}

/// Normalised imbalance `I(nT) = ⟨Σ_j (σ^{az}_j - σ^{bz}_j)⟩ / I(0)`.
#[derive(Debug, Clone)]
pub struct ImbalanceMeter {
    weights: Vec<f64>,
    initial: f64,
}

impl ImbalanceMeter {
    /// Below this `|I(0)|` the normalisation is refused.
    pub const MIN_INITIAL: f64 = 1e-12;

    pub fn new(cfg: &ProbeConfig, initial: &PureState) -> Result<Self> {
        let weights = observable_diagonal(cfg, ObservableKind::ImbalanceNumerator);
        if weights.len() != initial.dim() {
            return Err(Error::invalid("initial state dimension does not match probe"));
        }
        let value = initial.expectation_diagonal(&weights);
        if value.abs() < Self::MIN_INITIAL {
            return Err(Error::DegenerateNormalization(value));
        }
        Ok(ImbalanceMeter { weights, initial: value })
    }

    /// Unnormalised `I(0)`.
    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn evaluate(&self, state: &PureState) -> f64 {
        state.expectation_diagonal(&self.weights) / self.initial
    }

    /// Imbalance from computational-basis populations.
    pub fn evaluate_populations(&self, populations: &[f64]) -> f64 {
        populations.iter().zip(&self.weights).map(|(p, w)| p * w).sum::<f64>() / self.initial
    }
}

pub fn imbalance(state: &PureState, initial: &PureState, cfg: &ProbeConfig) -> Result<f64> {
    Ok(ImbalanceMeter::new(cfg, initial)?.evaluate(state))
}

/// Rung factor `a_j^k` evaluated with the printed form of the
/// ultimate-precision condition, using the intra-half phase `Θ_k` and the
/// bare coupling `J_ab` (no duration factor). Diagnostic only: the
/// propagator itself uses `J_ab·t2` as rotation angle.
pub fn a_factor(site: usize, k: usize, cfg: &ProbeConfig, field: &FieldConfig) -> f64 {
    let theta = theta_half(k, Half::Intra, field, cfg);
    let jt2 = (site as f64 * theta).powi(2);
    let jab2 = cfg.j_ab().powi(2);
    let total = jt2 + jab2;
    if total == 0.0 {
        return 1.0;
    }
    (jt2 + jab2 * total.sqrt().cos().powi(2)) / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_state, reference_index, InitConfig};

    fn probe(sites: usize, eps: f64) -> ProbeConfig {
        ProbeConfig::new(sites, eps).unwrap()
    }

    #[test]
    fn resonant_phase_values() {
        let cfg = probe(3, 0.1);
        let f = FieldConfig::resonant(0.1);
        let expected = 0.1 / PI;
        assert!((theta_half(1, Half::Intra, &f, &cfg) - expected).abs() < 1e-15);
        assert!((theta_half(1, Half::Intra, &f, &cfg) - 0.0318310).abs() < 1e-7);
        assert!((theta_half(1, Half::Inter, &f, &cfg) - expected).abs() < 1e-15);
        assert!((theta_half(2, Half::Intra, &f, &cfg) + expected).abs() < 1e-15);
        assert!((theta_half(2, Half::Inter, &f, &cfg) + expected).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_zero_phase() {
        let cfg = probe(2, 0.1);
        for df in [0.0, 0.01, 0.3] {
            let f = FieldConfig { h_a: 0.0, delta_f: df, eta: 0.0 };
            for n in 1..20 {
                assert_eq!(theta_half(n, Half::Intra, &f, &cfg), 0.0);
                assert_eq!(theta_half(n, Half::Inter, &f, &cfg), 0.0);
            }
        }
    }

    #[test]
    fn off_resonant_cycle_total() {
        let cfg = probe(2, 0.1);
        for &df in &[0.01, 0.05, -0.2] {
            let f = FieldConfig { h_a: 0.3, delta_f: df, eta: 0.0 };
            for n in 1..200usize {
                let total = theta_half(n, Half::Intra, &f, &cfg) + theta_half(n, Half::Inter, &f, &cfg);
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let nf = n as f64;
                let closed = sign * 0.3 / (PI * (1.0 + df))
                    * ((nf * PI * df).cos() + ((nf - 1.0) * PI * df).cos());
                assert!((total - closed).abs() < 1e-12, "n={n} df={df}");
            }
        }
    }

    #[test]
    fn full_exchange_at_perfect_quench() {
        let cfg = probe(2, 0.0);
        let engine = FloquetEngine::new(&cfg, &FieldConfig::resonant(0.0)).unwrap();
        let cycle = engine.build_cycle(1).unwrap();
        for gate in &cycle.gates {
            let amp = gate.unitary[(2, 1)];
            assert!((amp - C64::new(0.0, -1.0)).norm() < 1e-12);
            assert!(gate.unitary[(1, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn partial_exchange_amplitude() {
        let cfg = probe(3, 0.1);
        let engine = FloquetEngine::new(&cfg, &FieldConfig::resonant(0.0)).unwrap();
        let cycle = engine.build_cycle(4).unwrap();
        let expected = (PI * 0.9 / 2.0).sin();
        for gate in &cycle.gates {
            assert!((gate.unitary[(1, 2)].norm() - expected).abs() < 1e-12);
            assert!((expected - 0.98769).abs() < 1e-5);
        }
    }

    #[test]
    fn pair_gates_are_unitary_and_block_diagonal() {
        let cfg = probe(4, 0.17);
        let field = FieldConfig { h_a: 0.8, delta_f: 0.03, eta: 0.2 };
        let engine = FloquetEngine::new(&cfg, &field).unwrap();
        for n in [1, 2, 7] {
            for gate in engine.build_cycle(n).unwrap().gates {
                let err = (gate.unitary.adjoint() * gate.unitary - Mat4::identity())
                    .iter()
                    .map(|x| x.norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12);
                // {↑↑} and {↓↓} do not mix with anything
                for p in 0..4 {
                    for q in 0..4 {
                        let same_sector = p == q || (p == 1 && q == 2) || (p == 2 && q == 1);
                        if !same_sector {
                            assert!(gate.unitary[(p, q)].norm() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn period_doubling_without_field() {
        let cfg = probe(3, 0.0);
        let engine = FloquetEngine::new(&cfg, &FieldConfig::resonant(0.0)).unwrap();
        let psi0 = build_initial_state(&cfg, &InitConfig::default()).unwrap();
        let meter = ImbalanceMeter::new(&cfg, &psi0).unwrap();
        assert_eq!(meter.evaluate(&psi0), 1.0);
        let mut psi = psi0.clone();
        engine.apply_cycle(&mut psi, 1).unwrap();
        assert!((meter.evaluate(&psi) + 1.0).abs() < 1e-12);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        engine.apply_cycle(&mut psi, 2).unwrap();
        assert!((meter.evaluate(&psi) - 1.0).abs() < 1e-12);
        assert!((psi.amplitudes[reference_index(&cfg)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_imbalance_is_refused() {
        let cfg = probe(2, 0.1);
        let psi = build_initial_state(&cfg, &InitConfig::new(std::f64::consts::FRAC_PI_4).unwrap()).unwrap();
        assert!(matches!(ImbalanceMeter::new(&cfg, &psi), Err(Error::DegenerateNormalization(_))));
    }

    #[test]
    fn dimension_mismatch_and_missing_tangent() {
        let cfg = probe(2, 0.1);
        let engine = FloquetEngine::new(&cfg, &FieldConfig::resonant(0.1)).unwrap();
        let mut wrong = PureState::basis(4, 0);
        assert!(engine.apply_cycle(&mut wrong, 1).is_err());
        let mut psi = build_initial_state(&cfg, &InitConfig::default()).unwrap();
        assert!(engine.propagate_with_tangent(&mut psi, 1).is_err());
        assert!(engine.build_cycle(0).is_err());
    }

    #[test]
    fn parameter_independent_cycle_keeps_zero_tangent() {
        let cfg = probe(2, 0.1);
        let engine = FloquetEngine::new(&cfg, &FieldConfig::resonant(0.2)).unwrap();
        let mut psi = build_initial_state(&cfg, &InitConfig::new(0.3).unwrap()).unwrap().with_zero_tangent();
        for n in 1..6 {
            let mut intra = engine.half_spec(n, Half::Intra);
            let mut inter = engine.half_spec(n, Half::Inter);
            intra.dtheta = 0.0;
            inter.dtheta = 0.0;
            let cycle = Cycle::assemble(&cfg, 0.0, engine.chain_energy(), engine.field_weight(), intra, inter);
            cycle.apply(&mut psi);
        }
        assert!(psi.tangent.unwrap().iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn a_factor_limits() {
        let cfg = probe(4, 0.0);
        let tiny = FieldConfig::resonant(1e-9);
        assert!((a_factor(1, 1, &cfg, &tiny) - 1.0).abs() < 1e-12);
        let huge = FieldConfig::resonant(1e9);
        assert!((a_factor(2, 1, &cfg, &huge) - 1.0).abs() < 1e-9);
        // direct evaluation at j = 1, ε = 0.1, h_a = 0.1, k = 1
        let cfg = probe(4, 0.1);
        let theta = 0.1 / PI;
        let jab = PI * 0.9;
        let s = theta * theta + jab * jab;
        let expected = (theta * theta + jab * jab * s.sqrt().cos().powi(2)) / s;
        let got = a_factor(1, 1, &cfg, &FieldConfig::resonant(0.1));
        assert!((got - expected).abs() < 1e-15);
    }
}
