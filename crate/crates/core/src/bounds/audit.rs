use crate::bounds::cheeger::{cheeger_exact, ENUMERATION_LIMIT};
use crate::bounds::mixing::mixing_time;
use crate::bounds::paths::path_bound;
use crate::bounds::BoundAudit;
use crate::chain::{FiniteChain, Reversibilization};
use crate::error::{Error, Result};
use crate::spectral::{absolute_gap, pseudo_spectral_gap, self_adjoint_gap, spectral_gap};

/// Default accuracy for the mixing-time comparisons.
pub const DEFAULT_EPS: f64 = 1.0 / 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditConfig {
    pub eps: f64,
    /// Largest power tried for the pseudo-spectral gap.
    pub k_max: u32,
    /// Also report `τ ≤ 2 τ_A` under the group-walk name. Meant for random
    /// walks on groups, whose additive reversibilization is the walk driven
    /// by the symmetrized step set.
    pub group_walk: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            k_max: 10,
            group_walk: false,
        }
    }
}

pub fn inequality_audit(chain: &FiniteChain, eps: f64, k_max: u32) -> Result<BoundAudit> {
    inequality_audit_with(
        chain,
        &AuditConfig {
            eps,
            k_max,
            group_walk: false,
        },
    )
}

/// Evaluates every inequality relating `γ` to the reversibilized gaps,
/// mixing time, Cheeger constant, path congestion and pseudo-spectral gap.
/// Gated inequalities that do not apply are recorded as skipped.
pub fn inequality_audit_with(chain: &FiniteChain, config: &AuditConfig) -> Result<BoundAudit> {
    chain.require_irreducible()?;
    let eps = config.eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1)")));
    }
    let (gamma, relaxation) = spectral_gap(chain)?;
    let tau = relaxation.value();
    let lazy = chain.laziness() >= 0.5;
    let mu_min = chain.stationary().min();
    let reversible = chain.flags().reversible;
    let mut audit = BoundAudit::default();

    let gamma_a = self_adjoint_gap(&chain.reversibilize(Reversibilization::Additive)?)?;
    let gamma_m = self_adjoint_gap(&chain.reversibilize(Reversibilization::Multiplicative)?)?;
    audit.push_at_least("additive_lower", gamma, gamma_a / 2.0, format!("gamma_A = {gamma_a:.6e}"));
    audit.push_at_most(
        "additive_upper",
        gamma,
        (2.0 * gamma_a).sqrt(),
        format!("gamma_A = {gamma_a:.6e}"),
    );
    if config.group_walk {
        audit.push_at_most(
            "group_walk_relaxation",
            tau,
            2.0 / gamma_a,
            format!("tau_A = {:.6e}", 1.0 / gamma_a),
        );
    }
    audit.push_at_least("multiplicative_lower", gamma, gamma_m / 2.0, format!("gamma_M = {gamma_m:.6e}"));
    if lazy {
        audit.push_at_most(
            "multiplicative_upper",
            gamma,
            (2.0 * gamma_m).sqrt(),
            format!("gamma_M = {gamma_m:.6e}"),
        );
    } else {
        audit.push_skipped("multiplicative_upper", "min P(x,x) < 1/2".into());
    }

    let mixing = mixing_time(chain, eps)?;
    match mixing.tmix {
        Some(tmix) if eps < 0.2 => {
            let c = 4.0 / (2.0 / (1.0 + 4.0 * eps + 2.0 * eps * eps)).ln() + 2.0;
            audit.push_at_most(
                "relaxation_vs_mixing",
                tau,
                c * tmix as f64,
                format!("tmix({eps:.4}) = {tmix}, constant {c:.6}"),
            );
        }
        Some(_) => audit.push_skipped("relaxation_vs_mixing", format!("eps = {eps} not below 1/5")),
        None => audit.push_skipped("relaxation_vs_mixing", "mixing time is infinite".into()),
    }
    match mixing.tmix {
        Some(tmix) if lazy && eps < 0.5 => audit.push_at_most(
            "mixing_vs_relaxation",
            tmix as f64,
            1.0 + 12.0 * tau * tau * (1.0 / (2.0 * eps * mu_min)).ln(),
            format!("tmix({eps:.4}) = {tmix}"),
        ),
        _ if !lazy => audit.push_skipped("mixing_vs_relaxation", "min P(x,x) < 1/2".into()),
        _ => audit.push_skipped("mixing_vs_relaxation", "needs eps < 1/2 and finite mixing time".into()),
    }

    let cheeger = if chain.size() <= ENUMERATION_LIMIT {
        let c = cheeger_exact(chain)?;
        audit.push_at_least(
            "cheeger_lower",
            gamma,
            c.xi * c.xi / 16.0,
            format!("xi = {:.6e}", c.xi),
        );
        audit.push_at_most("cheeger_upper", gamma, 32.0 * c.xi, format!("xi = {:.6e}", c.xi));
        Some(c)
    } else {
        let reason = format!("{} states exceed the enumeration limit", chain.size());
        audit.push_skipped("cheeger_lower", reason.clone());
        audit.push_skipped("cheeger_upper", reason);
        None
    };

    let paths = path_bound(chain, None)?;
    audit.push_at_least(
        "path_congestion",
        gamma,
        paths.gap_lower,
        format!("B = {:.6e}", paths.congestion),
    );

    let ps = pseudo_spectral_gap(chain, config.k_max)?;
    audit.push_at_least(
        "pseudo_spectral",
        gamma,
        ps.value / 2.0,
        format!("gamma_ps = {:.6e} at k = {}", ps.value, ps.k),
    );

    if reversible && lazy && eps < 0.5 {
        let abs_gap = absolute_gap(chain)?;
        let tau_rel = 1.0 / abs_gap;
        match mixing.tmix {
            Some(tmix) => {
                audit.push_at_least(
                    "classical_mixing_lower",
                    tmix as f64,
                    (tau_rel - 1.0) * (1.0 / (2.0 * eps)).ln(),
                    format!("tau_rel = {tau_rel:.6e}"),
                );
                audit.push_at_most(
                    "classical_mixing_upper",
                    tmix as f64,
                    tau_rel * (1.0 / (eps * mu_min)).ln(),
                    format!("tau_rel = {tau_rel:.6e}"),
                );
            }
            None => {
                audit.push_skipped("classical_mixing_lower", "mixing time is infinite".into());
                audit.push_skipped("classical_mixing_upper", "mixing time is infinite".into());
            }
        }
    } else {
        let reason = "needs a reversible chain with min P(x,x) >= 1/2 and eps < 1/2".to_string();
        audit.push_skipped("classical_mixing_lower", reason.clone());
        audit.push_skipped("classical_mixing_upper", reason);
    }

    match (&cheeger, reversible) {
        (Some(c), true) => {
            let quarter = if eps == 0.25 { mixing.clone() } else { mixing_time(chain, 0.25)? };
            audit.push_at_least(
                "cheeger_mixing",
                quarter.value(),
                1.0 / (4.0 * c.xi),
                format!("tmix(1/4) = {:?}", quarter.tmix),
            );
        }
        (None, true) => audit.push_skipped("cheeger_mixing", "no exact Cheeger constant".into()),
        (_, false) => audit.push_skipped("cheeger_mixing", "chain is not reversible".into()),
    }

    Ok(audit)
}
