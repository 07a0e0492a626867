//! Named experiments with figure-caption defaults, shrunk to desk scale.

use super::config::{AverageSpec, Axis, FitSpec, Reduce, RunConfig, SweepAxis, TransitionSpec};
use super::expcalc::ExpcalcInput;
use crate::metrology::log_grid;
use crate::model::{FieldConfig, InitConfig, ProbeConfig};
use crate::open_system::DEFAULT_SUBSTEPS;
use crate::{Error, Result};

pub const CUSTOM: &str = "custom";

pub const RECIPES: [&str; 11] = [
    CUSTOM,
    "fig1-imbalance",
    "fig2-qfi-sweep",
    "fig2-scaling",
    "fig3-offresonance",
    "fig4-crosstalk",
    "fig5-init",
    "fig6-epsilon",
    "fig7-cfi",
    "fig8-noise",
    "expcalc",
];

/// Quench imperfection used by every figure.
const EPSILON: f64 = 0.1;
/// Representative DTC-phase field amplitude.
const H_DTC: f64 = 1e-5;

fn base() -> RunConfig {
    RunConfig {
        experiment: CUSTOM.to_string(),
        probe: ProbeConfig { sites: 3, epsilon: EPSILON },
        field: FieldConfig::resonant(H_DTC),
        init: InitConfig::default(),
        gamma: 0.0,
        cycles: 10,
        substeps: DEFAULT_SUBSTEPS,
        workers: 0,
        output: None,
        sweep: Vec::new(),
        average: AverageSpec { step: 5, intervals: 10 },
        transition: TransitionSpec { h_min: 1e-4, h_max: 1.0, grid_points: 40, cycle: 10 },
        fit: FitSpec {
            input: None,
            x: "sites".to_string(),
            y: "qfi".to_string(),
            cycle: None,
            n_min: None,
            n_max: None,
            reduce: Reduce::Single,
        },
        expcalc: ExpcalcInput::dysprosium(7),
    }
}

fn axis(axis: Axis, values: Vec<f64>) -> SweepAxis {
    SweepAxis { axis, values }
}

fn sizes(lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi).map(|l| l as f64).collect()
}

/// Default configuration of a named experiment.
pub fn recipe(name: &str) -> Result<RunConfig> {
    let mut cfg = base();
    cfg.experiment = name.to_string();
    match name {
        CUSTOM => {}
        "fig1-imbalance" => {
            cfg.probe.sites = 6;
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::HA, vec![0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.25, 0.5, 1.0])];
        }
        "fig2-qfi-sweep" => {
            cfg.probe.sites = 7;
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::HA, log_grid(1e-5, 1.0, 40))];
        }
        "fig2-scaling" => {
            cfg.cycles = 10;
            cfg.sweep = vec![axis(Axis::Sites, sizes(3, 7))];
            cfg.fit.cycle = Some(10);
        }
        "fig3-offresonance" => {
            cfg.probe.sites = 5;
            cfg.field = FieldConfig { h_a: 1e-2, delta_f: 1e-2, eta: 0.0 };
            cfg.cycles = 100;
            cfg.sweep = vec![axis(Axis::Sites, sizes(3, 7))];
        }
        "fig4-crosstalk" => {
            cfg.probe.sites = 7;
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::HA, vec![1e-3, 1e-2]), axis(Axis::Eta, vec![0.0, 0.05, 0.1, 0.2])];
        }
        "fig5-init" => {
            cfg.probe.sites = 7;
            cfg.field.h_a = 1e-2;
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::Theta, vec![0.0, 1e-2 * std::f64::consts::PI])];
        }
        "fig6-epsilon" => {
            cfg.probe.sites = 6;
            cfg.cycles = 50;
            cfg.sweep = vec![
                axis(Axis::HA, log_grid(1e-4, 1.0, 9)),
                axis(Axis::Epsilon, (0..=6).map(|k| 0.05 * k as f64).collect()),
            ];
        }
        "fig7-cfi" => {
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::Sites, sizes(3, 7))];
            cfg.fit.y = "cfi_comp".to_string();
            cfg.fit.n_min = Some(1);
            cfg.fit.reduce = Reduce::Mean;
        }
        "fig8-noise" => {
            cfg.gamma = 1e-3;
            cfg.cycles = 50;
            cfg.sweep = vec![axis(Axis::Sites, sizes(3, 4))];
        }
        "expcalc" => {}
        other => {
            return Err(Error::Config(format!(
                "unknown recipe '{other}' (expected one of {})",
                RECIPES.join(", ")
            )))
        }
    }
    Ok(cfg)
}
