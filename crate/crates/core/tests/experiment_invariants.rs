use markov_gap::experiments::{
    ensemble_randthm, fit_scaling, render_report, scan, ExperimentRow, FitMode, ReportFormat, ScanConfig,
    ScanMethod,
};
use markov_gap::families::{Probability, Step, TorusProbSpec};
use markov_gap::ChainSpec;
use proptest::prelude::*;

fn p(text: &str) -> Probability {
    Probability::parse(text).unwrap()
}

fn agree(template: &ChainSpec, ns: &[usize]) {
    let closed = scan(template, ns, ScanConfig { method: ScanMethod::ClosedForm, extended: false }).unwrap();
    let svd = scan(template, ns, ScanConfig { method: ScanMethod::Svd, extended: false }).unwrap();
    for (a, b) in closed.iter().zip(&svd) {
        assert_eq!(a.n, b.n);
        assert_eq!(a.params_digest, b.params_digest);
        assert!((a.tau - b.tau).abs() <= 1e-9 * b.tau, "N={}: {} vs {}", a.n, a.tau, b.tau);
    }
}

#[test]
fn closed_form_and_svd_scans_agree() {
    agree(
        &ChainSpec::Circulant { n: 5, steps: vec![Step { shift: 1, prob: p("1/3") }, Step { shift: -2, prob: p("2/3") }] },
        &[5, 16, 31, 64],
    );
    agree(
        &ChainSpec::Torus {
            n: 4,
            d: 2,
            probs: TorusProbSpec {
                stay: p("0"),
                plus: vec![p("1/sqrt(2)"), p("1 - 1/sqrt(2)")],
                minus: vec![p("0"), p("0")],
            },
        },
        &[4, 9, 16, 25, 40],
    );
}

#[test]
fn ensemble_is_monotone_and_reproducible() {
    let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let a = ensemble_randthm(101, &[0.5, 0.5], 300, &grid, 99).unwrap();
    let b = ensemble_randthm(101, &[0.5, 0.5], 300, &grid, 99).unwrap();
    assert!(a.windows(2).all(|w| w[1].fraction <= w[0].fraction));
    let csv_a = render_report(a.as_slice(), ReportFormat::Csv).unwrap();
    let csv_b = render_report(b.as_slice(), ReportFormat::Csv).unwrap();
    assert_eq!(csv_a.as_bytes(), csv_b.as_bytes());
}

fn synthetic(ns: &[usize], tau: impl Fn(f64) -> f64) -> Vec<ExperimentRow> {
    ns.iter()
        .map(|&n| ExperimentRow {
            family: "synthetic".into(),
            params_digest: String::new(),
            n,
            gamma: 1.0 / tau(n as f64),
            tau: tau(n as f64),
            method: "closed_form".into(),
            wall_ms: 0.0,
        })
        .collect()
}

proptest! {
    #[test]
    fn power_fit_recovers_exponent(exponent in -3.0f64..4.0, scale in 0.01f64..100.0) {
        let rows = synthetic(&[8, 16, 64, 100, 1024], |n| scale * n.powf(exponent));
        let fit = fit_scaling(&rows, FitMode::Power).unwrap();
        prop_assert!((fit.slope - exponent).abs() <= 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() <= 1e-8);
    }

    #[test]
    fn log_fit_recovers_exponent(exponent in 0.2f64..3.0, scale in 0.1f64..10.0) {
        let rows = synthetic(&[11, 101, 211, 809, 1601], |n| scale * n.ln().powf(exponent));
        let fit = fit_scaling(&rows, FitMode::Log).unwrap();
        prop_assert!((fit.slope - exponent).abs() <= 1e-9);
    }
}
