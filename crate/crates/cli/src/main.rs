use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtc_core::experiments::output::emit_table;
use dtc_core::experiments::sweep::{
    average_table, fit_result_table, trace_table, transition_table, Engine,
};
use dtc_core::experiments::{expcalc, run_fit, run_sweep, run_transition, Axis, Cell, ConfigFile, RunConfig, Table};
use dtc_core::metrology::power_fit;
use dtc_core::Error;

#[derive(Debug, Parser)]
#[command(name = "dtc-sense", version, about = "Discrete time crystal field-sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single stroboscopic trace.
    Simulate(RunArgs),
    /// Cartesian sweep over the configured axes.
    Sweep(RunArgs),
    /// Power-law fit of two columns of a results file.
    Fit(RunArgs),
    /// Field amplitude of maximal QFI.
    Transition(RunArgs),
    /// Density-matrix runs with dephasing.
    Noise(RunArgs),
    /// Laboratory-units sensitivity calculator.
    Expcalc(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; a `.toml` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Named recipe supplying defaults.
    #[arg(long)]
    recipe: Option<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Sweep(a) => ("sweep", a),
            Command::Fit(a) => ("fit", a),
            Command::Transition(a) => ("transition", a),
            Command::Noise(a) => ("noise", a),
            Command::Expcalc(a) => ("expcalc", a),
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::ResourceGate(_) => 3,
        Error::Numerical(_) | Error::IntegrationFailure(_) | Error::DegenerateNormalization(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

fn resolve(name: &str, args: &RunArgs) -> Result<RunConfig, Error> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None if args.recipe.is_some() || name == "expcalc" => ConfigFile::default(),
        None => return Err(Error::Config("either --config or --recipe is required".into())),
    };
    let recipe = args.recipe.as_deref().or(if name == "expcalc" && file.recipe.is_none() { Some("expcalc") } else { None });
    let mut cfg = RunConfig::resolve(&file, recipe)?;
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn write(table: &Table, path: Option<&Path>, command: &str, cfg: &RunConfig) -> Result<(), Error> {
    match path {
        Some(p) => {
            emit_table(table, p, command, cfg)?;
            log::info!("wrote {}", p.display());
            Ok(())
        }
        None => {
            table.write_csv(std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run(command: &Command) -> Result<(), Error> {
    let (name, args) = command.parts();
    let cfg = resolve(name, args)?;
    eprintln!("# resolved configuration ({name})\n{}", cfg.to_toml());
    let out = cfg.output.clone();
    match command {
        Command::Simulate(_) => {
            if !cfg.sweep.is_empty() {
                return Err(Error::Config("simulate runs a single point; use `sweep` for axes".into()));
            }
            let results = run_sweep(&cfg, Engine::Auto)?;
            write(&trace_table(&results), out.as_deref(), name, &cfg)
        }
        Command::Sweep(_) => {
            let results = run_sweep(&cfg, Engine::Auto)?;
            write(&trace_table(&results), out.as_deref(), name, &cfg)
        }
        Command::Noise(_) => {
            let results = run_sweep(&cfg, Engine::Lindblad)?;
            for p in &results.points {
                let pts: Vec<(f64, f64)> =
                    p.averages.iter().flatten().map(|a| (a.n_end, a.values.qfi)).collect();
                match power_fit(&pts) {
                    Ok(fit) => eprintln!("point {:?}: alpha = {:.4} (R^2 = {:.4})", p.coords, fit.exponent, fit.r_squared),
                    Err(e) => eprintln!("point {:?}: no fit ({e})", p.coords),
                }
            }
            write(&trace_table(&results), out.as_deref(), name, &cfg)?;
            if let Some(path) = &out {
                emit_table(&average_table(&results), &sibling(path, "points"), name, &cfg)?;
            }
            Ok(())
        }
        Command::Transition(_) => {
            let results = run_transition(&cfg)?;
            if results.axes == [Axis::Sites] && results.points.len() >= 3 {
                let pts: Vec<(f64, f64)> = results.points.iter().map(|(c, t)| (c[0], t.h_max)).collect();
                if let Ok(fit) = power_fit(&pts) {
                    eprintln!("h_max ~ L^{:.4} (R^2 = {:.4})", fit.exponent, fit.r_squared);
                }
            }
            write(&transition_table(&results), out.as_deref(), name, &cfg)
        }
        Command::Fit(_) => {
            let fit = run_fit(&cfg)?;
            eprintln!(
                "{} ~ {:.6e} * {}^{:.6} (R^2 = {:.6}, {} points)",
                cfg.fit.y,
                fit.prefactor,
                cfg.fit.x,
                fit.exponent,
                fit.r_squared,
                fit.points.len()
            );
            write(&fit_result_table(&fit), out.as_deref(), name, &cfg)
        }
        Command::Expcalc(_) => {
            let r = expcalc(&cfg.expcalc)?;
            let mut table = Table::new(
                ["t2_ms", "period_ms", "n_max", "shots_per_s", "sensitivity", "sensitivity_coefficient"]
                    .map(String::from)
                    .to_vec(),
            );
            table.push(vec![
                Cell::Real(r.t2_ms),
                Cell::Real(r.period_ms),
                Cell::Int(r.n_max as i64),
                Cell::Real(r.shots_per_s),
                Cell::Real(r.sensitivity),
                Cell::Real(r.sensitivity_coefficient),
            ]);
            write(&table, out.as_deref(), name, &cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
