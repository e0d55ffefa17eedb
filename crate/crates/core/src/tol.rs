//! Numerical tolerances shared by every module.

/// Row sums and probability-vector sums must match 1 this closely.
pub const STOCHASTIC: f64 = 1e-12;

/// Max-norm residual allowed in `μP = μ`.
pub const STATIONARY: f64 = 1e-10;

/// Detailed-balance tolerance, `|μ(x)P(x,y) - μ(y)P(y,x)|`.
pub const REVERSIBLE: f64 = 1e-12;

/// Relative tolerance for symmetry and normality (`P*P = PP*`) checks.
pub const NORMAL: f64 = 1e-10;

/// Singular values at or below `ZERO_SINGULAR * max(1, σ_max)` count as zero.
pub const ZERO_SINGULAR: f64 = 1e-8;

/// Slack granted to every audited inequality.
pub const AUDIT_MARGIN: f64 = 1e-9;

/// Zero threshold for a singular spectrum whose largest value is `sigma_max`.
pub fn zero_threshold(sigma_max: f64) -> f64 {
    ZERO_SINGULAR * sigma_max.max(1.0)
}
