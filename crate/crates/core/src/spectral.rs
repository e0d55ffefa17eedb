//! The singular-value spectral gap and its relatives.
//!
//! `γ` is the second-smallest singular value of `L = I - P` as an operator on
//! `L²(μ)`. Writing `D = diag(μ)` and `u = D^{1/2} f` turns `μ`-norms into
//! Euclidean norms, so the singular values of `L` in `L²(μ)` are the ordinary
//! singular values of `B = D^{1/2} (I - P) D^{-1/2}`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::chain::FiniteChain;
use crate::error::{Error, Result};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    WeightedSvd,
    NormalEigen,
    ClosedForm,
}

impl SpectrumMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumMethod::WeightedSvd => "weighted_svd",
            SpectrumMethod::NormalEigen => "normal_eigen",
            SpectrumMethod::ClosedForm => "closed_form",
        }
    }
}

/// Relaxation time `τ = 1/γ`, or infinite when `γ` is numerically zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relaxation {
    Finite(f64),
    Infinite,
}

impl Relaxation {
    pub fn from_gap(gap: f64, threshold: f64) -> Self {
        if gap <= threshold {
            Relaxation::Infinite
        } else {
            Relaxation::Finite(1.0 / gap)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Relaxation::Finite(t) => Some(t),
            Relaxation::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Relaxation::Finite(_))
    }
}

impl Serialize for Relaxation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Relaxation::Finite(t) => s.serialize_f64(*t),
            Relaxation::Infinite => s.serialize_none(),
        }
    }
}

/// Sorted singular values of the generator with the derived gap.
#[derive(Clone, Debug)]
pub struct SingularSpectrum {
    /// Ascending.
    pub values: Vec<f64>,
    pub gap: f64,
    pub relaxation: Relaxation,
    /// Eigenvalues of `P` ordered by `|1 - λ|`; present for the normal route.
    pub eigenvalues: Option<Vec<Complex<f64>>>,
    pub method: SpectrumMethod,
}

impl SingularSpectrum {
    fn from_sorted(values: Vec<f64>, eigenvalues: Option<Vec<Complex<f64>>>, method: SpectrumMethod) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(
                "a single-state chain has no spectral gap".into(),
            ));
        }
        let sigma_max = *values.last().unwrap();
        let gap = values[1];
        Ok(Self {
            relaxation: Relaxation::from_gap(gap, tol::zero_threshold(sigma_max)),
            values,
            gap,
            eigenvalues,
            method,
        })
    }

    /// Finite `τ`, or [`Error::DegenerateKernel`].
    pub fn relaxation_time(&self) -> Result<f64> {
        self.relaxation.finite().ok_or(Error::DegenerateKernel)
    }
}

impl Serialize for SingularSpectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let eig: Option<Vec<[f64; 2]>> = self
            .eigenvalues
            .as_ref()
            .map(|e| e.iter().map(|z| [z.re, z.im]).collect());
        let mut st = s.serialize_struct("SingularSpectrum", 5)?;
        st.serialize_field("eigenvalues", &eig)?;
        st.serialize_field("gap", &self.gap)?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("relaxation", &self.relaxation)?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}

/// All singular values of `I - P` in `L²(μ)` by a dense SVD.
pub fn weighted_singular_spectrum(chain: &FiniteChain) -> Result<SingularSpectrum> {
    chain.require_irreducible()?;
    let n = chain.size();
    let b = DMatrix::identity(n, n) - chain.conjugated();
    let mut values: Vec<f64> = b.singular_values().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    SingularSpectrum::from_sorted(values, None, SpectrumMethod::WeightedSvd)
}

/// `(γ, τ)`. Normal chains take the eigenvalue route; everything else goes
/// through the weighted SVD.
pub fn spectral_gap(chain: &FiniteChain) -> Result<(f64, Relaxation)> {
    let spectrum = if chain.flags().normal {
        let s = normal_gap(chain)?;
        #[cfg(debug_assertions)]
        if chain.size() <= 128 {
            let svd = weighted_singular_spectrum(chain)?;
            debug_assert!(
                (svd.gap - s.gap).abs() <= 1e-9 * (1.0 + svd.gap),
                "normal route {} disagrees with SVD {}",
                s.gap,
                svd.gap
            );
        }
        s
    } else {
        weighted_singular_spectrum(chain)?
    };
    Ok((spectrum.gap, spectrum.relaxation))
}

/// Eigenvalues of a symmetric matrix, descending. The input is symmetrized
/// first to discard rounding asymmetry.
pub(crate) fn symmetric_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Eigenvalues of a `μ`-self-adjoint `P`, descending.
pub fn self_adjoint_eigenvalues(chain: &FiniteChain) -> Result<Vec<f64>> {
    if chain.stationary().min() <= 0.0 {
        return Err(Error::NotIrreducible);
    }
    if !chain.flags().reversible {
        return Err(Error::NotReversible);
    }
    Ok(symmetric_eigenvalues_desc(&chain.conjugated()))
}

/// `1 - λ₂` for a reversible chain, `λ₂` its second-largest eigenvalue.
pub fn self_adjoint_gap(chain: &FiniteChain) -> Result<f64> {
    let values = self_adjoint_eigenvalues(chain)?;
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "a single-state chain has no spectral gap".into(),
        ));
    }
    Ok(1.0 - values[1])
}

/// The absolute spectral gap `1 - max(λ₂, |λ_min|)` of a reversible chain.
pub fn absolute_gap(chain: &FiniteChain) -> Result<f64> {
    let values = self_adjoint_eigenvalues(chain)?;
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "a single-state chain has no spectral gap".into(),
        ));
    }
    let last = values[values.len() - 1].abs();
    Ok(1.0 - values[1].max(last))
}

/// Eigenvalues of a real normal matrix `S`.
///
/// `H = (S + Sᵀ)/2` and `K = (S - Sᵀ)/2` commute, so each eigenspace of `H`
/// is invariant under the skew-symmetric `K`, whose eigenvalues there are
/// `±iσ` with `σ` the singular values of the restriction (paired, plus a zero
/// when the dimension is odd). Francis QR is avoided on purpose: it stalls on
/// cyclic permutation matrices.
fn normal_eigenvalues(s: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = s.nrows();
    let h = (s + s.transpose()) * 0.5;
    let k = (s - s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = s.amax().max(1.0);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= 1e-9 * scale
        {
            end += 1;
        }
        let cluster = &order[start..end];
        let re = cluster.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
        let basis = DMatrix::from_fn(n, cluster.len(), |r, c| eig.eigenvectors[(r, cluster[c])]);
        let restricted = basis.transpose() * &k * &basis;
        let mut sigma: Vec<f64> = restricted.singular_values().iter().copied().collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let mut i = 0;
        while i + 1 < sigma.len() {
            let im = 0.5 * (sigma[i] + sigma[i + 1]);
            out.push(Complex::new(re, im));
            out.push(Complex::new(re, -im));
            i += 2;
        }
        if i < sigma.len() {
            out.push(Complex::new(re, 0.0));
        }
        start = end;
    }
    out
}

/// For `P` commuting with its `μ`-adjoint, the singular values of `I - P` are
/// `|1 - λ_j|` over the eigenvalues of `P`.
pub fn normal_gap(chain: &FiniteChain) -> Result<SingularSpectrum> {
    chain.require_irreducible()?;
    if !chain.flags().normal {
        return Err(Error::NotNormal);
    }
    let mut eig = normal_eigenvalues(&chain.conjugated());
    let one = Complex::new(1.0, 0.0);
    eig.sort_by(|a, b| (one - a).norm().total_cmp(&(one - b).norm()));
    let values = eig.iter().map(|l| (one - l).norm()).collect();
    SingularSpectrum::from_sorted(values, Some(eig), SpectrumMethod::NormalEigen)
}

/// Truncated pseudo-spectral gap: the largest value of
/// `gap((P*)^k P^k) / k` over `1 ≤ k ≤ k_max`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PseudoSpectralGap {
    /// Lower bound on the untruncated supremum.
    pub value: f64,
    /// The `k` achieving it (smallest on ties).
    pub k: u32,
}

pub fn pseudo_spectral_gap(chain: &FiniteChain, k_max: u32) -> Result<PseudoSpectralGap> {
    chain.require_irreducible()?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if chain.size() < 2 {
        return Err(Error::InvalidArgument(
            "a single-state chain has no spectral gap".into(),
        ));
    }
    let s = chain.conjugated();
    let mut power = s.clone();
    let mut best = PseudoSpectralGap { value: f64::NEG_INFINITY, k: 1 };
    for k in 1..=k_max {
        if k > 1 {
            power = &power * &s;
        }
        // In conjugated coordinates the μ-adjoint is the transpose.
        let r = power.transpose() * &power;
        let gap = 1.0 - symmetric_eigenvalues_desc(&r)[1];
        let value = gap / f64::from(k);
        if value > best.value {
            best = PseudoSpectralGap { value, k };
        }
    }
    Ok(best)
}
