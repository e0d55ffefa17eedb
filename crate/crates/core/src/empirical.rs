//! Worst-case deviation of empirical averages from their mean.
//!
//! For a stationary chain and a real test function `g` with `μ g = 0` and
//! `‖g‖_μ = 1`,
//!
//! ```text
//! E[(μ_n g)²] = (1/n²) Σ_{i,j<n} ⟨g, P^{|i-j|} g⟩_μ = ⟨g, M_n g⟩_μ,
//! M_n = (1/n²) Σ_{|k|<n} (n - |k|) H_|k|,   H_k = (P^k + (P^k)*) / 2.
//! ```
//!
//! `Δ_n²` is therefore the top eigenvalue of `M_n` on the mean-zero subspace.
//! In conjugated coordinates (`u = D^{1/2} g`) `M_n` is a symmetric matrix and
//! the constants become the unit vector `√μ`, which `P` and `P*` both fix.
//! Everything below works in an orthonormal basis of `√μ`'s complement.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution as _;
use serde::Serialize;

use crate::bounds::BoundAudit;
use crate::chain::FiniteChain;
use crate::error::{Error, Result};
use crate::spectral::spectral_gap;

/// Eigenvalues of `M_n` below this are rounding noise; `Δ_n` is reported as 0.
const EIGEN_FLOOR: f64 = 1e-14;

/// Row samplers switch from inverse-CDF to alias tables above this size.
const ALIAS_THRESHOLD: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaEntry {
    pub n: u64,
    pub delta_exact: f64,
    pub delta_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximizer: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DeltaCurve {
    pub entries: Vec<DeltaEntry>,
}

impl DeltaCurve {
    pub fn get(&self, n: u64) -> Option<&DeltaEntry> {
        self.entries.iter().find(|e| e.n == n)
    }
}

/// Monte Carlo estimate of `‖μ_n g‖_{L²}` with a delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Orthonormal basis of the complement of `√μ`, from the Householder
/// reflection sending `√μ` to `-e_0`.
fn complement_basis(root_mu: &DVector<f64>) -> DMatrix<f64> {
    let n = root_mu.len();
    let mut w = root_mu.clone();
    w[0] += 1.0;
    let scale = 2.0 / w.norm_squared();
    let h = DMatrix::identity(n, n) - (&w * w.transpose()) * scale;
    h.columns(1, n - 1).into_owned()
}

/// The transition operator restricted to mean-zero functions, in conjugated
/// coordinates, plus the basis used to get there.
fn restricted_operator(chain: &FiniteChain) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    chain.require_irreducible()?;
    if chain.size() < 2 {
        return Err(Error::InvalidArgument(
            "a single-state chain has no mean-zero test functions".into(),
        ));
    }
    let root_mu = DVector::from_iterator(
        chain.size(),
        chain.stationary().weights().iter().map(|w| w.sqrt()),
    );
    let basis = complement_basis(&root_mu);
    let restricted = basis.transpose() * chain.conjugated() * &basis;
    Ok((restricted, basis, root_mu))
}

/// Accumulates `Σ_{k=1}^{n-1} H_k` and `Σ k H_k` one power at a time.
struct GramAccumulator {
    step: DMatrix<f64>,
    power: DMatrix<f64>,
    sum: DMatrix<f64>,
    weighted: DMatrix<f64>,
    /// Largest `k` folded into the sums.
    k: u64,
}

impl GramAccumulator {
    fn new(step: DMatrix<f64>) -> Self {
        let m = step.nrows();
        Self {
            power: DMatrix::identity(m, m),
            sum: DMatrix::zeros(m, m),
            weighted: DMatrix::zeros(m, m),
            step,
            k: 0,
        }
    }

    /// `n² M_n = n I + 2 (n Σ H_k - Σ k H_k)` for `k < n`, scaled by `1/n²`.
    fn gram(&mut self, n: u64) -> DMatrix<f64> {
        while self.k + 1 < n {
            self.k += 1;
            self.power = &self.power * &self.step;
            let h = (&self.power + self.power.transpose()) * 0.5;
            self.sum += &h;
            self.weighted += h * self.k as f64;
        }
        let m = self.step.nrows();
        let nf = n as f64;
        let total = DMatrix::identity(m, m) * nf + (&self.sum * nf - &self.weighted) * 2.0;
        total / (nf * nf)
    }
}

fn top_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

fn clamp_delta(lambda: f64) -> f64 {
    if lambda < EIGEN_FLOOR {
        0.0
    } else {
        lambda.sqrt().min(1.0)
    }
}

/// `Δ_n` and a maximizing mean-zero test function of unit `μ`-norm.
pub fn delta_exact(chain: &FiniteChain, n: u64) -> Result<(f64, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let (restricted, basis, root_mu) = restricted_operator(chain)?;
    let gram = GramAccumulator::new(restricted).gram(n);
    let sym = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.imax();
    let delta = clamp_delta(eig.eigenvalues[top]);
    let u = &basis * eig.eigenvectors.column(top);
    let mut g: Vec<f64> = u.iter().zip(root_mu.iter()).map(|(a, r)| a / r).collect();
    // Fix the sign so the first clearly nonzero entry is positive.
    if let Some(first) = g.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            g.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok((delta, g))
}

/// `Δ_n` for every `n` in `n_list`, sharing the power accumulation.
pub fn delta_curve(chain: &FiniteChain, n_list: &[u64]) -> Result<DeltaCurve> {
    if n_list.contains(&0) {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let (restricted, _, _) = restricted_operator(chain)?;
    let mut order: Vec<usize> = (0..n_list.len()).collect();
    order.sort_by_key(|&i| n_list[i]);
    let mut acc = GramAccumulator::new(restricted);
    let mut deltas = vec![0.0; n_list.len()];
    for i in order {
        deltas[i] = clamp_delta(top_eigenvalue(&acc.gram(n_list[i])));
    }
    Ok(DeltaCurve {
        entries: n_list
            .iter()
            .zip(deltas)
            .map(|(&n, delta_exact)| DeltaEntry {
                n,
                delta_exact,
                delta_mc: None,
                mc_stderr: None,
                maximizer: None,
            })
            .collect(),
    })
}

enum RowSampler {
    InverseCdf(Vec<f64>),
    Alias(WeightedAliasIndex<f64>),
}

impl RowSampler {
    fn new(weights: &[f64], use_alias: bool) -> Result<Self> {
        if use_alias {
            WeightedAliasIndex::new(weights.to_vec())
                .map(RowSampler::Alias)
                .map_err(|e| Error::InvalidArgument(format!("alias table: {e}")))
        } else {
            let mut acc = 0.0;
            let cdf = weights
                .iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect();
            Ok(RowSampler::InverseCdf(cdf))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            RowSampler::InverseCdf(cdf) => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            }
            RowSampler::Alias(a) => a.sample(rng),
        }
    }
}

/// Estimates `‖μ_n g‖_{L²}` from `reps` independent stationary trajectories.
///
/// Replicate `r` draws from ChaCha8 seeded with `seed` on stream `r`, so each
/// replicate's randomness depends only on `(seed, r)`.
pub fn delta_monte_carlo(
    chain: &FiniteChain,
    g: &[f64],
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    chain.require_irreducible()?;
    let size = chain.size();
    if g.len() != size {
        return Err(Error::BadTestFunction(format!(
            "length {} for {size} states",
            g.len()
        )));
    }
    let mu = chain.stationary();
    let mean = mu.mean(g);
    let norm = mu.norm(g);
    if mean.abs() > 1e-10 || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::BadTestFunction(format!("μg = {mean:e}, ‖g‖ = {norm}")));
    }
    if n == 0 || reps == 0 {
        return Err(Error::InvalidArgument("n and reps must be positive".into()));
    }
    let use_alias = size > ALIAS_THRESHOLD;
    let start = RowSampler::new(mu.weights(), use_alias)?;
    let rows = (0..size)
        .map(|x| {
            let row: Vec<f64> = chain.transition().row(x).iter().copied().collect();
            RowSampler::new(&row, use_alias)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let mut x = start.sample(&mut rng);
        let mut total = g[x];
        for _ in 1..n {
            x = rows[x].sample(&mut rng);
            total += g[x];
        }
        let avg = total / n as f64;
        let sq = avg * avg;
        sum += sq;
        sum_sq += sq * sq;
    }
    let r = reps as f64;
    let second_moment = sum / r;
    let estimate = second_moment.sqrt();
    let var = if reps > 1 {
        ((sum_sq - r * second_moment * second_moment) / (r - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se_moment = (var / r).sqrt();
    let stderr = if estimate > 0.0 {
        se_moment / (2.0 * estimate)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { estimate, stderr })
}

/// Checks the three empirical-average inequalities for every `n ≤ n_max`:
///
/// - `Δ_n ≤ √(4τ/n)`
/// - `Δ_n ≥ 1/132` when `n ≤ τ/3`
/// - `max_{n ≤ k ≤ 2n} Δ_k ≥ τ / (2n + 3τ)` when `2n ≤ n_max`
///
/// Each check records the worst margin over its range of `n`.
pub fn theorem1_audit(chain: &FiniteChain, n_max: u64) -> Result<BoundAudit> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let (_, relaxation) = spectral_gap(chain)?;
    let tau = relaxation.finite().ok_or(Error::DegenerateKernel)?;
    let ns: Vec<u64> = (1..=n_max).collect();
    let curve = delta_curve(chain, &ns)?;
    let delta = |n: u64| curve.entries[(n - 1) as usize].delta_exact;

    let mut audit = BoundAudit::default();

    let worst_upper = ns
        .iter()
        .map(|&n| (n, delta(n), (4.0 * tau / n as f64).sqrt()))
        .min_by(|a, b| (a.2 - a.1).total_cmp(&(b.2 - b.1)))
        .unwrap();
    audit.push_at_most(
        "empirical_upper",
        worst_upper.1,
        worst_upper.2,
        format!("worst n={} over 1..={n_max}", worst_upper.0),
    );

    let plateau = ((tau / 3.0).floor() as u64).min(n_max);
    if plateau >= 1 {
        let (n, d) = (1..=plateau)
            .map(|n| (n, delta(n)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        audit.push_at_least(
            "empirical_plateau",
            d,
            1.0 / 132.0,
            format!("worst n={n} over 1..={plateau}"),
        );
    } else {
        audit.push_skipped("empirical_plateau", format!("no n <= tau/3 = {:.4}", tau / 3.0));
    }

    if n_max >= 2 {
        let (n, lhs, rhs) = (1..=n_max / 2)
            .map(|n| {
                let window = (n..=2 * n).map(delta).fold(f64::NEG_INFINITY, f64::max);
                (n, window, tau / (2.0 * n as f64 + 3.0 * tau))
            })
            .min_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
            .unwrap();
        audit.push_at_least(
            "empirical_window",
            lhs,
            rhs,
            format!("worst n={n} over 1..={}", n_max / 2),
        );
    } else {
        audit.push_skipped("empirical_window", "needs n_max >= 2".to_string());
    }
    Ok(audit)
}
