//! Run configuration. Files are TOML with the unit in each key name; every
//! key is optional and layers over the defaults of the selected recipe.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::expcalc::ExpcalcInput;
use crate::model::{FieldConfig, InitConfig, ProbeConfig};
use crate::{Error, Result};

/// Parameters that may be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    Sites,
    HA,
    Epsilon,
    DeltaF,
    Eta,
    Theta,
    Gamma,
}

impl Axis {
    /// Canonical column order.
    pub const ALL: [Axis; 7] = [Axis::Sites, Axis::HA, Axis::Epsilon, Axis::DeltaF, Axis::Eta, Axis::Theta, Axis::Gamma];

    /// Key used in config files and as CSV column name.
    pub fn key(self) -> &'static str {
        match self {
            Axis::Sites => "sites",
            Axis::HA => "h_a_per_jz",
            Axis::Epsilon => "epsilon",
            Axis::DeltaF => "delta_f_rel",
            Axis::Eta => "eta",
            Axis::Theta => "theta_rad",
            Axis::Gamma => "gamma_per_jz",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.key() == key)
            .ok_or_else(|| {
                let known: Vec<&str> = Axis::ALL.iter().map(|a| a.key()).collect();
                Error::Config(format!("unknown sweep axis '{key}' (expected one of {})", known.join(", ")))
            })
    }

    pub fn is_integer(self) -> bool {
        self == Axis::Sites
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSpec {
    pub step: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub h_min: f64,
    pub h_max: f64,
    pub grid_points: usize,
    pub cycle: usize,
}

/// How `fit` collapses several rows sharing an abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    /// Exactly one row per abscissa is expected.
    Single,
    /// Mean over the rows; with `n_min = 1` this is the time average.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub input: Option<PathBuf>,
    pub x: String,
    pub y: String,
    pub cycle: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub reduce: Reduce,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub probe: ProbeConfig,
    pub field: FieldConfig,
    pub init: InitConfig,
    pub gamma: f64,
    pub cycles: usize,
    pub substeps: usize,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    pub output: Option<PathBuf>,
    /// Sorted by [`Axis::ALL`] order.
    pub sweep: Vec<SweepAxis>,
    pub average: AverageSpec,
    pub transition: TransitionSpec,
    pub fit: FitSpec,
    pub expcalc: ExpcalcInput,
}

// ---- file layout ----

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipe: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expcalc: Option<ExpcalcSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub sites: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub h_a_per_jz: Option<f64>,
    pub delta_f_rel: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub theta_rad: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub gamma_per_jz: Option<f64>,
    pub substeps_per_half: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub cycles: Option<usize>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    /// Must be `true`; every computation is random-free.
    pub deterministic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageSection {
    pub step_cycles: Option<usize>,
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    pub h_min_per_jz: Option<f64>,
    pub h_max_per_jz: Option<f64>,
    pub grid_points: Option<usize>,
    pub cycle: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub x: Option<String>,
    pub y: Option<String>,
    pub cycle: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub reduce: Option<Reduce>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpcalcSection {
    pub pair_frequency_hz: Option<f64>,
    pub coherence_time_s: Option<f64>,
    pub sites: Option<usize>,
    pub unit_scale: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    /// Resolves a file over recipe defaults. `recipe_override` (from the
    /// command line) wins over the file's `recipe` key.
    pub fn resolve(file: &ConfigFile, recipe_override: Option<&str>) -> Result<Self> {
        let name = recipe_override.or(file.recipe.as_deref()).unwrap_or(super::recipes::CUSTOM);
        let mut cfg = super::recipes::recipe(name)?;
        cfg.overlay(file)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn overlay(&mut self, file: &ConfigFile) -> Result<()> {
        if let Some(p) = &file.probe {
            set(&mut self.probe.sites, p.sites);
            set(&mut self.probe.epsilon, p.epsilon);
        }
        if let Some(f) = &file.field {
            set(&mut self.field.h_a, f.h_a_per_jz);
            set(&mut self.field.delta_f, f.delta_f_rel);
            set(&mut self.field.eta, f.eta);
        }
        if let Some(i) = &file.init {
            set(&mut self.init.theta, i.theta_rad);
        }
        if let Some(n) = &file.noise {
            set(&mut self.gamma, n.gamma_per_jz);
            set(&mut self.substeps, n.substeps_per_half);
        }
        if let Some(r) = &file.run {
            set(&mut self.cycles, r.cycles);
            set(&mut self.workers, r.workers);
            if let Some(out) = &r.output {
                self.output = Some(out.clone());
            }
            if r.deterministic == Some(false) {
                return Err(Error::Config("deterministic = false is not supported; all runs are random-free".into()));
            }
        }
        if let Some(a) = &file.average {
            set(&mut self.average.step, a.step_cycles);
            set(&mut self.average.intervals, a.intervals);
        }
        if let Some(t) = &file.transition {
            set(&mut self.transition.h_min, t.h_min_per_jz);
            set(&mut self.transition.h_max, t.h_max_per_jz);
            set(&mut self.transition.grid_points, t.grid_points);
            set(&mut self.transition.cycle, t.cycle);
        }
        if let Some(f) = &file.fit {
            if let Some(p) = &f.input {
                self.fit.input = Some(p.clone());
            }
            if let Some(x) = &f.x {
                self.fit.x = x.clone();
            }
            if let Some(y) = &f.y {
                self.fit.y = y.clone();
            }
            self.fit.cycle = f.cycle.or(self.fit.cycle);
            self.fit.n_min = f.n_min.or(self.fit.n_min);
            self.fit.n_max = f.n_max.or(self.fit.n_max);
            set(&mut self.fit.reduce, f.reduce);
        }
        if let Some(e) = &file.expcalc {
            set(&mut self.expcalc.pair_frequency_hz, e.pair_frequency_hz);
            set(&mut self.expcalc.coherence_time_s, e.coherence_time_s);
            set(&mut self.expcalc.sites, e.sites);
            set(&mut self.expcalc.unit_scale, e.unit_scale);
        }
        if let Some(sweep) = &file.sweep {
            // a file sweep replaces the recipe sweep entirely
            self.sweep = sweep
                .iter()
                .map(|(k, v)| Ok(SweepAxis { axis: Axis::from_key(k)?, values: v.clone() }))
                .collect::<Result<_>>()?;
            self.sweep.sort_by_key(|a| a.axis);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.probe.validate().map_err(cfg_err)?;
        self.field.validate().map_err(cfg_err)?;
        self.init.validate().map_err(cfg_err)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma_per_jz must be >= 0, got {}", self.gamma)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps_per_half must be at least 1".into()));
        }
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep axis '{}' has no values", axis.axis.key())));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sweep axis '{}' has non-finite values", axis.axis.key())));
            }
            if axis.axis.is_integer() && axis.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                return Err(Error::Config("sweep values for 'sites' must be positive integers".into()));
            }
        }
        if self.sweep.windows(2).any(|w| w[0].axis == w[1].axis) {
            return Err(Error::Config("sweep axis listed twice".into()));
        }
        let t = &self.transition;
        if !(t.h_min > 0.0 && t.h_max > t.h_min) || t.grid_points < 3 || t.cycle == 0 {
            return Err(Error::Config("transition grid needs 0 < h_min < h_max, >= 3 points, cycle >= 1".into()));
        }
        if self.average.step == 0 || self.average.intervals == 0 {
            return Err(Error::Config("average step_cycles and intervals must be positive".into()));
        }
        Ok(())
    }

    pub fn axis(&self, axis: Axis) -> Option<&SweepAxis> {
        self.sweep.iter().find(|a| a.axis == axis)
    }

    /// Inverse of [`resolve`](Self::resolve): a file that reproduces this
    /// configuration when loaded.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            recipe: Some(self.experiment.clone()),
            probe: Some(ProbeSection { sites: Some(self.probe.sites), epsilon: Some(self.probe.epsilon) }),
            field: Some(FieldSection {
                h_a_per_jz: Some(self.field.h_a),
                delta_f_rel: Some(self.field.delta_f),
                eta: Some(self.field.eta),
            }),
            init: Some(InitSection { theta_rad: Some(self.init.theta) }),
            noise: Some(NoiseSection { gamma_per_jz: Some(self.gamma), substeps_per_half: Some(self.substeps) }),
            run: Some(RunSection {
                cycles: Some(self.cycles),
                workers: Some(self.workers),
                output: self.output.clone(),
                deterministic: Some(true),
            }),
            average: Some(AverageSection {
                step_cycles: Some(self.average.step),
                intervals: Some(self.average.intervals),
            }),
            transition: Some(TransitionSection {
                h_min_per_jz: Some(self.transition.h_min),
                h_max_per_jz: Some(self.transition.h_max),
                grid_points: Some(self.transition.grid_points),
                cycle: Some(self.transition.cycle),
            }),
            fit: Some(FitSection {
                input: self.fit.input.clone(),
                x: Some(self.fit.x.clone()),
                y: Some(self.fit.y.clone()),
                cycle: self.fit.cycle,
                n_min: self.fit.n_min,
                n_max: self.fit.n_max,
                reduce: Some(self.fit.reduce),
            }),
            expcalc: Some(ExpcalcSection {
                pair_frequency_hz: Some(self.expcalc.pair_frequency_hz),
                coherence_time_s: Some(self.expcalc.coherence_time_s),
                sites: Some(self.expcalc.sites),
                unit_scale: Some(self.expcalc.unit_scale),
            }),
            sweep: Some(self.sweep.iter().map(|a| (a.axis.key().to_string(), a.values.clone())).collect()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serialises")
    }
}
