use dtc_core::metrology::{
    find_transition, imbalance_drop, log_grid, pure_trace, qfi_bound, time_average, FisherQuantity,
};
use dtc_core::model::{FieldConfig, InitConfig, ProbeConfig};

#[test]
fn qfi_peak_and_imbalance_drop_agree() {
    let grid = log_grid(1e-4, 1.0, 40);
    let step = grid[1] / grid[0];
    for sites in [3, 5] {
        let cfg = ProbeConfig::new(sites, 0.1).unwrap();
        let init = InitConfig::default();
        let peak = find_transition(&cfg, &FieldConfig::resonant(0.0), &init, 10, &grid).unwrap();
        let drop = imbalance_drop(&cfg, &FieldConfig::resonant(0.0), &init, 10, &grid).unwrap();
        let ratio = (peak.h_max / drop).ln().abs();
        assert!(ratio <= 2.0 * step.ln(), "L = {sites}: QFI peak {} vs imbalance drop {drop}", peak.h_max);
    }
}

#[test]
fn time_averaged_fisher_peaks_with_instantaneous_qfi() {
    let cfg = ProbeConfig::new(5, 0.1).unwrap();
    let grid = log_grid(1e-3, 1.0, 16);
    let mut inst = Vec::new();
    let mut avg = Vec::new();
    for &h in &grid {
        let t = pure_trace(&cfg, &FieldConfig::resonant(h), &InitConfig::default(), 100).unwrap();
        inst.push(t.at(100).unwrap().qfi);
        avg.push(time_average(&t, 100).unwrap());
    }
    let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let k = argmax(&inst);
    for q in FisherQuantity::ALL {
        let series: Vec<f64> = avg.iter().map(|a| a.get(q)).collect();
        let j = argmax(&series);
        assert!(j.abs_diff(k) <= 1, "{q:?}: averaged peak at grid {j}, instantaneous at {k}");
    }
}

#[test]
fn dtc_traces_respect_bound_and_orderings() {
    for sites in 1..=5 {
        let cfg = ProbeConfig::new(sites, 0.1).unwrap();
        for h in [0.0, 1e-5, 1e-2, 0.3] {
            let t = pure_trace(&cfg, &FieldConfig::resonant(h), &InitConfig::default(), 40).unwrap();
            assert!(t.bound_violations().is_empty(), "L = {sites}, h = {h}");
            assert!(t.ordering_violations().is_empty(), "L = {sites}, h = {h}");
            let last = t.at(40).unwrap();
            assert!(last.qfi <= qfi_bound(&cfg, 40) * (1.0 + 1e-8));
        }
    }
}
