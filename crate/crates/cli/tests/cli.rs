use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtc-sense")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "
[probe]
sites = 2
epsilon = 0.1

[field]
h_a_per_jz = 1e-3

[run]
cycles = 6
";

#[test]
fn simulate_without_cycles_writes_initial_record_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[probe]\nsites = 2\n[run]\ncycles = 0\n");
    let out = dir.path().join("t.csv");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,imbalance,qfi"));
    assert!(lines[1].starts_with("0,1.00000000000e0,0.00000000000e0"), "{}", lines[1]);
    let sidecar = fs::read_to_string(dir.path().join("t.toml")).unwrap();
    assert!(sidecar.contains(env!("CARGO_PKG_VERSION")));
    assert!(sidecar.contains("command = \"simulate\""));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[sweep]\nh_a_per_jz = [1e-4, 1e-2, 0.3]\neta = [0.0, 0.1]\n");
    let cfg = write_config(dir.path(), "c.toml", &body);
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.csv"));
        let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    // header + 6 points x 7 records
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 1 + 6 * 7);
}

#[test]
fn csv_values_carry_twelve_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("t.csv");
    assert!(run(&["simulate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let csv = fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let imbalance = header.iter().position(|h| *h == "imbalance").unwrap();
    for line in csv.lines().skip(1) {
        let field = line.split(',').nth(imbalance).unwrap();
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 12, "{field}");
        let v: f64 = field.parse().unwrap();
        assert!(v.abs() <= 1.0 + 1e-9);
    }
}

#[test]
fn fit_reads_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_config(
        dir.path(),
        "sweep.toml",
        "[probe]\nepsilon = 0.1\n[field]\nh_a_per_jz = 1e-5\n[run]\ncycles = 10\n[sweep]\nsites = [2, 3, 4]\n",
    );
    let table = dir.path().join("sweep.csv");
    assert!(run(&["sweep", "--config", s(&sweep), "--out", s(&table)]).status.success());
    let fit_cfg = write_config(
        dir.path(),
        "fit.toml",
        &format!("[fit]\ninput = \"{}\"\nx = \"sites\"\ny = \"qfi\"\ncycle = 10\n", s(&table)),
    );
    let out = dir.path().join("fit.csv");
    let o = run(&["fit", "--config", s(&fit_cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let exponent: f64 = row[header.iter().position(|h| *h == "exponent").unwrap()].parse().unwrap();
    assert!(exponent > 2.0 && exponent < 5.0, "QFI size exponent {exponent}");
}

#[test]
fn expcalc_defaults_to_dysprosium() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = run(&["expcalc", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let t2: f64 = row[0].parse().unwrap();
    let n_max: i64 = row[2].parse().unwrap();
    assert!((t2 - 2.6526).abs() < 1e-3, "t2 {t2}");
    assert_eq!(n_max, 37);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "[probe]\nepsilon = 2.0\n");
    assert_eq!(run(&["simulate", "--config", s(&bad)]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "unknown.toml", "[probe]\nlength = 3\n");
    assert_eq!(run(&["simulate", "--config", s(&unknown)]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["simulate", "--config", s(&missing)]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--recipe", "no-such-recipe"]).status.code(), Some(2));
}

#[test]
fn oversized_density_matrix_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[probe]\nsites = 6\n[noise]\ngamma_per_jz = 1e-3\n[run]\ncycles = 2\n");
    let o = run(&["noise", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn degenerate_imbalance_normalisation_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("[probe]\nsites = 2\n[init]\ntheta_rad = {}\n[run]\ncycles = 2\n", std::f64::consts::FRAC_PI_4);
    let cfg = write_config(dir.path(), "c.toml", &body);
    let o = run(&["simulate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
