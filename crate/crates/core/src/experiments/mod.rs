//! Configuration, named recipes, parallel sweeps, tabular output and the
//! laboratory-units calculator.

pub mod config;
pub mod expcalc;
pub mod output;
pub mod recipes;
pub mod sweep;

pub use config::{Axis, ConfigFile, RunConfig, SweepAxis};
pub use expcalc::{calibrate_unit_scale, expcalc, ExpcalcInput, ExpcalcRecord};
pub use output::{emit_table, read_table, Cell, NumericTable, Table};
pub use recipes::{recipe, RECIPES};
pub use sweep::{run_fit, run_sweep, run_transition, Engine, SweepResults};
