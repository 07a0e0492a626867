//! Probe, field and initialisation parameters; basis encoding; diagonal
//! observables; initial product states.
//!
//! Basis convention: chain-a site `j` (1-based) lives on qubit `2(j-1)`,
//! chain-b site `j` on qubit `2(j-1)+1`. A clear bit is spin up
//! (`σ^z = +1`), a set bit spin down. Qubit 0 is the least significant bit of
//! the basis integer, so the pair `(a_j, b_j)` occupies two adjacent bits.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::{C64, Error, Result};

/// Intra-chain coupling; sets the energy unit.
pub const J_Z: f64 = 1.0;

/// Largest chain length accepted for dense pure-state simulation.
pub const MAX_PURE_SITES: usize = 8;

/// Static model parameters of the two-chain probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Sites per chain (`L`).
    pub sites: usize,
    /// Quench imperfection `ε`.
    pub epsilon: f64,
}

impl ProbeConfig {
    pub fn new(sites: usize, epsilon: f64) -> Result<Self> {
        let cfg = ProbeConfig { sites, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::invalid("chain length L must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "quench imperfection must satisfy 0 <= epsilon < 1, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Inter-chain exchange `J_ab = π J_z (1 - ε)`.
    pub fn j_ab(&self) -> f64 {
        std::f64::consts::PI * J_Z * (1.0 - self.epsilon)
    }

    /// Duration of the intra-chain half period.
    pub fn t1(&self) -> f64 {
        1.0 / (2.0 * J_Z)
    }

    /// Duration of the inter-chain half period.
    pub fn t2(&self) -> f64 {
        1.0 / (2.0 * J_Z)
    }

    /// Drive period `T = t1 + t2`.
    pub fn period(&self) -> f64 {
        self.t1() + self.t2()
    }

    pub fn num_qubits(&self) -> usize {
        2 * self.sites
    }

    /// Hilbert-space dimension `2^{2L}`.
    pub fn dim(&self) -> usize {
        1usize << self.num_qubits()
    }
}

/// Periodic-field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Field amplitude `h_a` (units of `J_z`).
    pub h_a: f64,
    /// Relative frequency offset `δf`; zero is resonance with the DTC.
    pub delta_f: f64,
    /// Crosstalk fraction `η` picked up by chain b.
    pub eta: f64,
}

impl FieldConfig {
    pub fn new(h_a: f64, delta_f: f64, eta: f64) -> Result<Self> {
        let field = FieldConfig { h_a, delta_f, eta };
        field.validate()?;
        Ok(field)
    }

    /// Resonant field without crosstalk.
    pub fn resonant(h_a: f64) -> Self {
        FieldConfig { h_a, delta_f: 0.0, eta: 0.0 }
    }

    pub fn with_h_a(self, h_a: f64) -> Self {
        FieldConfig { h_a, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_a >= 0.0 && self.h_a.is_finite()) {
            return Err(Error::invalid(format!("field amplitude must be >= 0, got {}", self.h_a)));
        }
        self.validate_shape()
    }

    /// Checks everything except the sign of `h_a`. Finite-difference
    /// evaluations legitimately step to slightly negative amplitudes.
    pub(crate) fn validate_shape(&self) -> Result<()> {
        if !self.h_a.is_finite() {
            return Err(Error::invalid("field amplitude must be finite"));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("crosstalk must satisfy 0 <= eta < 1, got {}", self.eta)));
        }
        if !(self.delta_f > -1.0 && self.delta_f.is_finite()) {
            return Err(Error::invalid(format!("frequency offset must exceed -1, got {}", self.delta_f)));
        }
        Ok(())
    }
}

/// Single-site rotation of the initial product state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitConfig {
    /// Rotation angle `ϑ ∈ [0, π/4]`.
    pub theta: f64,
}

impl InitConfig {
    pub fn new(theta: f64) -> Result<Self> {
        let init = InitConfig { theta };
        init.validate()?;
        Ok(init)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=FRAC_PI_4).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "initial rotation must lie in [0, pi/4], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chain {
    A,
    B,
}

/// Qubit index of site `site` (1-based) of `chain`.
pub fn qubit(chain: Chain, site: usize) -> usize {
    debug_assert!(site >= 1);
    match chain {
        Chain::A => 2 * (site - 1),
        Chain::B => 2 * (site - 1) + 1,
    }
}

/// `σ^z` eigenvalue of qubit `q` in basis configuration `z`.
#[inline]
pub fn spin(z: usize, q: usize) -> f64 {
    if (z >> q) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal observables used by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    /// `G^{az} = Σ_j j σ^{az}_j`.
    GradientZA,
    /// `G^{bz} = Σ_j j σ^{bz}_j`.
    GradientZB,
    /// `S^{az} = Σ_j σ^{az}_j`.
    CollectiveZA,
    /// `Σ_j (σ^{az}_j - σ^{bz}_j)`.
    ImbalanceNumerator,
}

/// Diagonal of `kind` over all basis integers.
pub fn observable_diagonal(cfg: &ProbeConfig, kind: ObservableKind) -> Vec<f64> {
    let sites = cfg.sites;
    (0..cfg.dim())
        .map(|z| {
            (1..=sites)
                .map(|j| {
                    let sa = spin(z, qubit(Chain::A, j));
                    let sb = spin(z, qubit(Chain::B, j));
                    match kind {
                        ObservableKind::GradientZA => j as f64 * sa,
                        ObservableKind::GradientZB => j as f64 * sb,
                        ObservableKind::CollectiveZA => sa,
                        ObservableKind::ImbalanceNumerator => sa - sb,
                    }
                })
                .sum()
        })
        .collect()
}

/// Pure state over the two-chain Hilbert space, optionally carrying its
/// derivative with respect to `h_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
    pub tangent: Option<Vec<C64>>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        PureState { amplitudes, tangent: None }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        PureState::new(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Attaches a zero tangent, the derivative of a parameter-independent
    /// initial state.
    pub fn with_zero_tangent(mut self) -> Self {
        self.tangent = Some(vec![C64::new(0.0, 0.0); self.amplitudes.len()]);
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `⟨ψ|D|ψ⟩` for a diagonal operator `D`.
    pub fn expectation_diagonal(&self, diag: &[f64]) -> f64 {
        self.amplitudes.iter().zip(diag).map(|(a, d)| a.norm_sqr() * d).sum()
    }

    /// Computational-basis probabilities `|⟨z|ψ⟩|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `⟨u|v⟩`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Product state `⊗_j (cos ϑ|↑⟩ + sin ϑ|↓⟩)_a ⊗ (-sin ϑ|↑⟩ + cos ϑ|↓⟩)_b`.
pub fn build_initial_state(cfg: &ProbeConfig, init: &InitConfig) -> Result<PureState> {
    cfg.validate()?;
    init.validate()?;
    let (s, c) = init.theta.sin_cos();
    let a = [c, s];
    let b = [-s, c];
    // local pair index p = a_bit + 2 b_bit
    let pair = [a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]];
    let amplitudes = (0..cfg.dim())
        .map(|z| {
            let amp: f64 = (0..cfg.sites).map(|j| pair[(z >> (2 * j)) & 3]).product();
            C64::new(amp, 0.0)
        })
        .collect();
    Ok(PureState::new(amplitudes))
}

/// Basis integer of `|↑…↑⟩_a ⊗ |↓…↓⟩_b`.
pub fn reference_index(cfg: &ProbeConfig) -> usize {
    (1..=cfg.sites).map(|j| 1usize << qubit(Chain::B, j)).sum()
}
