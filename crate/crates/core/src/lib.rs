//! Spectral analysis of finite-state Markov chains that need not be reversible.
//!
//! The central quantity is the *spectral gap* `γ`: the second-smallest
//! singular value of the generator `L = I - P`, measured in the inner product
//! weighted by the stationary distribution `μ`. Its inverse `τ = 1/γ` is the
//! relaxation time, which governs how fast empirical averages
//! `(1/n) Σ g(X_i)` settle around `μ g`.
//!
//! Modules:
//!
//! - [`chain`]: validated transition matrices, stationary distributions,
//!   adjoints, reversibilizations, laziness and powers.
//! - [`spectral`]: weighted singular spectra, the normal-chain eigenvalue
//!   route, gaps of self-adjoint chains and the pseudo-spectral gap.
//! - [`empirical`]: exact and Monte Carlo evaluation of the worst-case
//!   deviation `Δ_n` of empirical averages.
//! - [`bounds`]: Cheeger constant, canonical-path congestion, exact mixing
//!   times and an audit of the inequalities linking them to `γ`.
//! - [`families`]: circulant walks, torus walks, the `x ↦ 2x + ε` chain and a
//!   three-move card shuffle, with closed forms where they exist.
//! - [`experiments`]: scaling scans, least-squares exponent fits, the
//!   random step-set ensemble and bit-stable CSV/JSON reports.

pub mod bounds;
pub mod chain;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod families;
pub mod spectral;
pub mod tol;

pub use bounds::{BoundAudit, CheegerResult, MixingTime, PathEnsemble};
pub use chain::{ChainFlags, Distribution, FiniteChain, Reversibilization};
pub use empirical::{DeltaCurve, DeltaEntry};
pub use error::{Error, Result};
pub use families::ChainSpec;
pub use spectral::{Relaxation, SingularSpectrum, SpectrumMethod};
