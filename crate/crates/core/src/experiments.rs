//! Scaling scans over a family parameter, exponent fits, the random step-set
//! ensemble and CSV/JSON reports.
//!
//! Everything here is deterministic given its inputs and seed, except the
//! `wall_ms` timing column of scan rows.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::BoundAudit;
use crate::empirical::DeltaCurve;
use crate::error::{Error, Result};
use crate::families::{circulant_gap, numeric_steps, torus_gap_closed_form, ChainSpec};
use crate::spectral::{weighted_singular_spectrum, SpectrumMethod};

/// Card decks above this size need `extended`.
pub const DEFAULT_MAX_DECK: usize = 6;

fn serialize_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// One `(family, N)` point of a scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub family: String,
    /// First 16 hex digits of the SHA-256 of the spec's canonical JSON.
    pub params_digest: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub gamma: f64,
    /// `∞` when `γ` is numerically zero.
    #[serde(serialize_with = "serialize_real")]
    pub tau: f64,
    pub method: String,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScanMethod {
    /// Closed form where the family has one, dense SVD otherwise.
    #[default]
    Auto,
    ClosedForm,
    Svd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanConfig {
    pub method: ScanMethod,
    /// Allow the slow grid points (a 7-card deck).
    pub extended: bool,
}

/// Canonical-JSON digest of a spec.
pub fn params_digest(spec: &ChainSpec) -> Result<String> {
    // serde_json's default map is ordered, so keys come out sorted.
    let canonical = serde_json::to_string(&serde_json::to_value(spec)?)?;
    let hash = Sha256::digest(canonical.as_bytes());
    Ok(hex::encode(&hash[..8]))
}

fn has_closed_form(spec: &ChainSpec) -> bool {
    matches!(spec, ChainSpec::Circulant { .. } | ChainSpec::Torus { .. })
}

fn scan_point(spec: &ChainSpec, method: ScanMethod) -> Result<(f64, f64, SpectrumMethod)> {
    let closed = match method {
        ScanMethod::Auto => has_closed_form(spec),
        ScanMethod::ClosedForm if has_closed_form(spec) => true,
        ScanMethod::ClosedForm => {
            return Err(Error::InvalidArgument(format!(
                "no closed form for family {}",
                spec.family()
            )))
        }
        ScanMethod::Svd => false,
    };
    if closed {
        let (gap, relaxation) = match spec {
            ChainSpec::Circulant { n, steps } => circulant_gap(*n, &numeric_steps(steps))?,
            ChainSpec::Torus { n, d, probs } => {
                let g = torus_gap_closed_form(*n, *d, &probs.to_probs())?;
                (g.gap, g.relaxation)
            }
            _ => unreachable!(),
        };
        return Ok((gap, relaxation.value(), SpectrumMethod::ClosedForm));
    }
    let s = weighted_singular_spectrum(&spec.build()?)?;
    Ok((s.gap, s.relaxation.value(), SpectrumMethod::WeightedSvd))
}

/// `γ` and `τ` of `template` at every `N` in `n_list`, sorted by `N`.
pub fn scan(template: &ChainSpec, n_list: &[usize], config: ScanConfig) -> Result<Vec<ExperimentRow>> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    if let ChainSpec::Cardshuffle { .. } = template {
        if let Some(&big) = ns.iter().find(|&&n| n > DEFAULT_MAX_DECK) {
            if !config.extended {
                return Err(Error::InvalidArgument(format!(
                    "a {big}-card deck needs the extended setting"
                )));
            }
        }
    }
    ns.into_iter()
        .map(|n| {
            let spec = template.with_size(n)?;
            let start = Instant::now();
            let (gamma, tau, method) = scan_point(&spec, config.method)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            log::info!("{} N={n}: gamma={gamma:e} ({wall_ms:.1} ms)", spec.family());
            Ok(ExperimentRow {
                family: spec.family().to_string(),
                params_digest: params_digest(&spec)?,
                n,
                gamma,
                tau,
                method: method.as_str().to_string(),
                wall_ms,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    /// `ln τ` against `ln N`.
    Power,
    /// `ln τ` against `ln ln N`.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `ln τ` on `ln N` (or `ln ln N`).
pub fn fit_scaling(rows: &[ExperimentRow], mode: FitMode) -> Result<ScalingFit> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!("{} rows; need at least 3", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !r.tau.is_finite() || r.tau <= 0.0) {
        return Err(Error::InsufficientData(format!("tau at N={} is {}", r.n, r.tau)));
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match mode {
            FitMode::Power => (r.n as f64).ln(),
            FitMode::Log => (r.n as f64).ln().ln(),
        })
        .collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InsufficientData("N too small for the log-log axis".into()));
    }
    let ys: Vec<f64> = rows.iter().map(|r| r.tau.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all N are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        n_points: rows.len(),
    })
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Empirical tail `P(τ > L · N^{2/(k+1)})` at one `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub threshold: f64,
    pub exceed: u64,
    pub trials: u64,
    pub fraction: f64,
}

fn validate_ensemble(n: u64, probs: &[f64], trials: u64) -> Result<()> {
    if !is_prime(n) {
        return Err(Error::NotPrime(n));
    }
    if trials < 100 {
        return Err(Error::InvalidArgument(format!("{trials} trials; need at least 100")));
    }
    if probs.is_empty() || probs.len() as u64 > n {
        return Err(Error::InvalidSteps(format!("{} steps on {n} residues", probs.len())));
    }
    Ok(())
}

/// `τ` for `trials` circulant walks on `ℤ/Nℤ` whose `k = probs.len()` step
/// residues are drawn uniformly; draws with repeated residues are redrawn.
/// Trial `t` uses ChaCha8 seeded with `seed` on stream `t`.
pub fn ensemble_taus(n: u64, probs: &[f64], trials: u64, seed: u64) -> Result<Vec<f64>> {
    validate_ensemble(n, probs, trials)?;
    (0..trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let residues = loop {
                let draw: Vec<i64> = probs.iter().map(|_| rng.random_range(0..n) as i64).collect();
                let mut sorted = draw.clone();
                sorted.sort_unstable();
                if sorted.windows(2).all(|w| w[0] != w[1]) {
                    break draw;
                }
            };
            let steps: Vec<(i64, f64)> = residues.into_iter().zip(probs.iter().copied()).collect();
            Ok(circulant_gap(n as usize, &steps)?.1.value())
        })
        .collect()
}

/// Tail fractions of the random step-set ensemble at every `L` in `l_grid`.
pub fn ensemble_randthm(
    n: u64,
    probs: &[f64],
    trials: u64,
    l_grid: &[f64],
    seed: u64,
) -> Result<Vec<TailRow>> {
    let taus = ensemble_taus(n, probs, trials, seed)?;
    let scale = (n as f64).powf(2.0 / (probs.len() as f64 + 1.0));
    Ok(l_grid
        .iter()
        .map(|&l| {
            let threshold = l * scale;
            let exceed = taus.iter().filter(|&&t| t > threshold).count() as u64;
            TailRow {
                l,
                threshold,
                exceed,
                trials,
                fraction: exceed as f64 / trials as f64,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// A table that can be written as CSV or JSON.
pub trait Report {
    fn header(&self) -> Vec<&'static str>;
    fn records(&self) -> Vec<Vec<String>>;
    fn to_json(&self) -> Result<Value>;
}

/// 17 significant digits; `inf`/`-inf` for infinities, empty for NaN.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

impl Report for [ExperimentRow] {
    fn header(&self) -> Vec<&'static str> {
        vec!["family", "params_digest", "N", "gamma", "tau", "method", "wall_ms"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.family.clone(),
                    r.params_digest.clone(),
                    r.n.to_string(),
                    format_real(r.gamma),
                    format_real(r.tau),
                    r.method.clone(),
                    format_real(r.wall_ms),
                ]
            })
            .collect()
    }

    fn to_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }
}

impl Report for BoundAudit {
    fn header(&self) -> Vec<&'static str> {
        vec!["check", "lhs", "relation", "rhs", "margin", "applicable", "pass", "detail"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    format_real(c.lhs),
                    c.relation.symbol().to_string(),
                    format_real(c.rhs),
                    format_real(c.margin),
                    c.applicable.to_string(),
                    c.pass.to_string(),
                    c.detail.clone(),
                ]
            })
            .collect()
    }

    fn to_json(&self) -> Result<Value> {
        Ok(json!({ "all_pass": self.all_pass(), "checks": serde_json::to_value(&self.checks)? }))
    }
}

impl Report for DeltaCurve {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "delta_exact", "delta_mc", "mc_stderr"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                vec![
                    e.n.to_string(),
                    format_real(e.delta_exact),
                    format_opt(e.delta_mc),
                    format_opt(e.mc_stderr),
                ]
            })
            .collect()
    }

    fn to_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }
}

impl Report for [TailRow] {
    fn header(&self) -> Vec<&'static str> {
        vec!["L", "threshold", "exceed", "trials", "fraction"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    format_real(r.l),
                    format_real(r.threshold),
                    r.exceed.to_string(),
                    r.trials.to_string(),
                    format_real(r.fraction),
                ]
            })
            .collect()
    }

    fn to_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }
}

/// The report as text: LF-terminated CSV with a fixed header, or pretty
/// JSON with sorted keys.
pub fn render_report<R: Report + ?Sized>(report: &R, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
            w.write_record(report.header()).map_err(csv_err)?;
            for r in report.records() {
                w.write_record(&r).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report.to_json()?)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit_report<R: Report + ?Sized>(report: &R, path: &Path, format: ReportFormat) -> Result<()> {
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Probability, Step, TorusProbSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn row(n: usize, tau: f64) -> ExperimentRow {
        ExperimentRow {
            family: "synthetic".into(),
            params_digest: String::new(),
            n,
            gamma: 1.0 / tau,
            tau,
            method: "closed_form".into(),
            wall_ms: 0.0,
        }
    }

    fn lazy_right() -> ChainSpec {
        ChainSpec::Circulant {
            n: 4,
            steps: vec![
                Step { shift: 0, prob: Probability::exact(0.5) },
                Step { shift: 1, prob: Probability::exact(0.5) },
            ],
        }
    }

    #[test]
    fn scan_lazy_right_walk() {
        let rows = scan(&lazy_right(), &[8, 4], ScanConfig::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 8]);
        assert_relative_eq!(rows[0].tau, 1.0 / (PI / 4.0).sin(), max_relative = 1e-12);
        assert_relative_eq!(rows[1].tau, 1.0 / (PI / 8.0).sin(), max_relative = 1e-12);
        assert!(rows.iter().all(|r| r.method == "closed_form"));
        assert!(rows.iter().all(|r| (r.tau * r.gamma - 1.0).abs() < 1e-9));
        assert_ne!(rows[0].params_digest, rows[1].params_digest);
        let svd = scan(&lazy_right(), &[4, 8], ScanConfig { method: ScanMethod::Svd, ..Default::default() }).unwrap();
        for (a, b) in rows.iter().zip(&svd) {
            assert_relative_eq!(a.gamma, b.gamma, max_relative = 1e-9);
            assert_eq!(a.params_digest, b.params_digest);
        }
        assert!(scan(&lazy_right(), &[], ScanConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn scan_torus_half() {
        let spec = ChainSpec::Torus {
            n: 2,
            d: 2,
            probs: TorusProbSpec {
                stay: 0.0.into(),
                plus: vec![0.5.into(), 0.5.into()],
                minus: vec![0.0.into(), 0.0.into()],
            },
        };
        let rows = scan(&spec, &[2, 4], ScanConfig::default()).unwrap();
        assert_relative_eq!(rows[0].gamma, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rows[1].gamma, 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn card_scan_gates_large_decks() {
        let spec = ChainSpec::Cardshuffle { n: 3 };
        assert!(scan(&spec, &[7], ScanConfig::default()).is_err());
        assert!(scan(&spec, &[3], ScanConfig { method: ScanMethod::ClosedForm, ..Default::default() }).is_err());
        let rows = scan(&spec, &[3], ScanConfig::default()).unwrap();
        assert_eq!(rows[0].method, "weighted_svd");
    }

    #[test]
    fn fits_exact_power_laws() {
        let rows: Vec<_> = [4, 8, 16, 32].iter().map(|&n| row(n, (n * n) as f64)).collect();
        let f = fit_scaling(&rows, FitMode::Power).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat: Vec<_> = [4, 8, 16].iter().map(|&n| row(n, 7.0)).collect();
        let f = fit_scaling(&flat, FitMode::Power).unwrap();
        assert!(f.slope.abs() < 1e-9);
        assert!(matches!(fit_scaling(&rows[..2], FitMode::Power), Err(Error::InsufficientData(_))));
        let logs: Vec<_> = [10, 100, 1000].iter().map(|&n| row(n, 3.0 * (n as f64).ln())).collect();
        assert!((fit_scaling(&logs, FitMode::Log).unwrap().slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residuals_are_orthogonal() {
        let rows: Vec<_> = [5, 9, 17, 40, 77].iter().map(|&n| row(n, (n as f64).powf(1.3) * (1.0 + 0.1 * (n as f64).sin()))).collect();
        let f = fit_scaling(&rows, FitMode::Power).unwrap();
        let (mut s0, mut s1) = (0.0, 0.0);
        for r in &rows {
            let x = (r.n as f64).ln();
            let e = r.tau.ln() - f.intercept - f.slope * x;
            s0 += e;
            s1 += e * x;
        }
        assert!(s0.abs() < 1e-9 && s1.abs() < 1e-9);
        assert!((0.0..=1.0).contains(&f.r_squared));
    }

    #[test]
    fn primes() {
        let small: Vec<u64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(is_prime(499) && is_prime(1601) && !is_prime(1599));
    }

    #[test]
    fn ensemble_is_monotone_and_seeded() {
        let probs = [0.5, 0.5];
        let grid = [1.0, 2.0, 4.0];
        let a = ensemble_randthm(101, &probs, 200, &grid, 5).unwrap();
        let b = ensemble_randthm(101, &probs, 200, &grid, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[1].fraction <= w[0].fraction));
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.fraction)));
        assert!(matches!(ensemble_randthm(100, &probs, 200, &grid, 5), Err(Error::NotPrime(100))));
        assert!(ensemble_randthm(101, &probs, 99, &grid, 5).is_err());
    }

    #[test]
    fn csv_reports() {
        let empty: Vec<ExperimentRow> = Vec::new();
        assert_eq!(
            render_report(empty.as_slice(), ReportFormat::Csv).unwrap(),
            "family,params_digest,N,gamma,tau,method,wall_ms\n"
        );
        let one = vec![row(4, f64::INFINITY)];
        let text = render_report(one.as_slice(), ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains(",inf,"));
        assert!(!text.contains('\r'));
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn json_reports_sort_keys_and_null_infinity() {
        let one = vec![row(4, f64::INFINITY)];
        let text = render_report(one.as_slice(), ReportFormat::Json).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v[0]["tau"].is_null());
        let keys: Vec<&String> = v[0].as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn files_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(4, 2.0), row(8, 3.5)];
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_report(rows.as_slice(), &a, ReportFormat::Csv).unwrap();
        emit_report(rows.as_slice(), &b, ReportFormat::Csv).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert!(matches!(
            emit_report(rows.as_slice(), &dir.path().join("missing/x.csv"), ReportFormat::Json),
            Err(Error::Io(_))
        ));
    }
}
