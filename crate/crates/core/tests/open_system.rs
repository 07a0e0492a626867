use dtc_core::floquet::ImbalanceMeter;
use dtc_core::metrology::{point_average, power_fit, pure_trace};
use dtc_core::model::{build_initial_state, FieldConfig, InitConfig, ProbeConfig};
use dtc_core::open_system::{converge_substeps, evolve_lindblad, noisy_fisher, MixedState};
use dtc_core::Error;

fn setup(sites: usize) -> (ProbeConfig, FieldConfig, MixedState, ImbalanceMeter) {
    let cfg = ProbeConfig::new(sites, 0.1).unwrap();
    let psi = build_initial_state(&cfg, &InitConfig::default()).unwrap();
    let meter = ImbalanceMeter::new(&cfg, &psi).unwrap();
    (cfg, FieldConfig::resonant(1e-5), MixedState::from_pure(&psi, 0.0), meter)
}

#[test]
fn closed_limit_two_sites() {
    let (cfg, field, rho, meter) = setup(2);
    let run = converge_substeps(&rho, 20, &cfg, &field, 0.0, 64, 8).unwrap();
    let mut lindblad = Vec::new();
    evolve_lindblad(&rho, 20, &cfg, &field, 0.0, run.substeps, |s| {
        lindblad.push(meter.evaluate_populations(&s.populations()));
        Ok(())
    })
    .unwrap();
    let unitary = pure_trace(&cfg, &field, &InitConfig::default(), 20).unwrap();
    for (l, r) in lindblad.iter().zip(&unitary.records[1..]) {
        assert!((l - r.imbalance).abs() < 1e-7, "n = {}: {l} vs {}", r.n, r.imbalance);
    }
}

#[test]
fn dephased_dtc_keeps_subharmonic_response() {
    let (cfg, field, rho, meter) = setup(3);
    let mut imbalance = Vec::new();
    let run = evolve_lindblad(&rho, 50, &cfg, &field, 1e-3, 256, |s| {
        imbalance.push(meter.evaluate_populations(&s.populations()));
        Ok(())
    })
    .unwrap();
    for (k, i) in imbalance.iter().enumerate() {
        let n = k + 1;
        assert!(i.signum() == if n % 2 == 0 { 1.0 } else { -1.0 }, "n = {n}: I = {i}");
    }
    // slowly decaying envelope: still well ordered at n = 50
    assert!(imbalance[49] > 0.5);
    let drift = run.monitors.iter().map(|m| m.trace_drift).fold(0.0, f64::max);
    assert!(drift < 1e-7, "trace drift {drift:e}");
    assert!(run.monitors.iter().all(|m| m.hermiticity_error < 1e-10 && m.min_eigenvalue >= -1e-8));
}

#[test]
fn dephasing_does_not_add_information() {
    let cfg = ProbeConfig::new(2, 0.1).unwrap();
    for h in [1e-5, 1e-2] {
        let field = FieldConfig::resonant(h);
        let noisy = noisy_fisher(&cfg, &field, &InitConfig::default(), 1e-3, 20, 5, 4, 128).unwrap();
        let clean = noisy_fisher(&cfg, &field, &InitConfig::default(), 0.0, 20, 5, 4, 128).unwrap();
        for (a, b) in noisy.trace.records.iter().zip(&clean.trace.records) {
            if a.qfi > b.qfi + 1e-6 {
                eprintln!("warning: dephased QFI exceeds closed QFI at h = {h}, n = {}: {} > {}", a.n, a.qfi, b.qfi);
            }
        }
        assert!(noisy.trace.ordering_violations().is_empty());
    }
}

#[test]
fn closed_noisy_fisher_matches_pure_time_exponent() {
    let cfg = ProbeConfig::new(3, 0.1).unwrap();
    let field = FieldConfig::resonant(1e-5);
    let init = InitConfig::default();
    let noisy = noisy_fisher(&cfg, &field, &init, 0.0, 50, 5, 10, 256).unwrap();
    let pure = pure_trace(&cfg, &field, &init, 50).unwrap();
    let fit = |pts: Vec<(f64, f64)>| power_fit(&pts).unwrap().exponent;
    let a_noisy = fit(noisy.points.iter().map(|p| (p.n_end, p.values.qfi)).collect());
    let a_pure = fit(point_average(&pure, 5, 10).unwrap().iter().map(|p| (p.n_end, p.values.qfi)).collect());
    assert!((a_noisy - a_pure).abs() < 0.05, "alpha {a_noisy} vs {a_pure}");
}

#[test]
fn density_matrix_gate() {
    let cfg = ProbeConfig::new(6, 0.1).unwrap();
    let err = noisy_fisher(&cfg, &FieldConfig::resonant(1e-5), &InitConfig::default(), 1e-3, 10, 5, 2, 64);
    assert!(matches!(err, Err(Error::ResourceGate(_))));
}
