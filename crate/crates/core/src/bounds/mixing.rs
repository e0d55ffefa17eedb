use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::FiniteChain;
use crate::error::{Error, Result};

/// `τ_mix(ε)` and every `(n, d(n))` evaluated while finding it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingTime {
    /// `None` when the chain is periodic and never gets within `ε`.
    pub tmix: Option<u64>,
    /// Sorted by `n`.
    pub tv_curve: Vec<(u64, f64)>,
}

impl MixingTime {
    /// `τ_mix` as a float, `∞` when it does not exist.
    pub fn value(&self) -> f64 {
        self.tmix.map_or(f64::INFINITY, |t| t as f64)
    }
}

fn tv_from(power: &DMatrix<f64>, mu: &[f64]) -> f64 {
    (0..power.nrows())
        .map(|x| {
            0.5 * power
                .row(x)
                .iter()
                .zip(mu)
                .map(|(p, m)| (p - m).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `d(n) = max_x ‖Pⁿ(x, ·) - μ‖_TV`.
pub fn worst_case_tv(chain: &FiniteChain, n: u64) -> f64 {
    tv_from(&chain.matrix_power(n), chain.stationary().weights())
}

/// Steps after which an aperiodic chain that still has not mixed is
/// reported as an error rather than as `∞`.
fn mixing_cap(size: usize) -> u64 {
    10 * (size as u64).pow(2) + 1000
}

/// First `n ≥ 0` with `d(n) ≤ ε`, by doubling and then binary lifting over
/// cached powers `P^{2^j}`.
pub fn mixing_time(chain: &FiniteChain, eps: f64) -> Result<MixingTime> {
    chain.require_irreducible()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1)")));
    }
    let mu = chain.stationary().weights();
    let size = chain.size();
    let cap = mixing_cap(size);
    let mut curve = Vec::new();
    let record = |n: u64, m: &DMatrix<f64>, curve: &mut Vec<(u64, f64)>| {
        let d = tv_from(m, mu);
        curve.push((n, d));
        d
    };

    let identity = DMatrix::identity(size, size);
    if record(0, &identity, &mut curve) <= eps {
        return Ok(finish(Some(0), curve));
    }

    // powers[j] = P^{2^j}
    let mut powers = vec![chain.transition().clone()];
    let (mut lower, mut lower_matrix, upper) = loop {
        let j = powers.len() - 1;
        let n = 1u64 << j;
        if n >= cap {
            let at_cap = chain.matrix_power(cap);
            if record(cap, &at_cap, &mut curve) > eps {
                if chain.period() > 1 {
                    return Ok(finish(None, curve));
                }
                return Err(Error::MixingCapExceeded { eps, cap });
            }
            let below = 1u64 << (j - 1);
            break (below, powers[j - 1].clone(), cap);
        }
        if record(n, &powers[j], &mut curve) <= eps {
            if j == 0 {
                return Ok(finish(Some(1), curve));
            }
            break (n / 2, powers[j - 1].clone(), n);
        }
        let next = &powers[j] * &powers[j];
        powers.push(next);
    };

    // Largest n < upper with d(n) > ε; d is non-increasing.
    for b in (0..powers.len()).rev() {
        let step = 1u64 << b;
        if lower + step >= upper {
            continue;
        }
        let candidate = &lower_matrix * &powers[b];
        if record(lower + step, &candidate, &mut curve) > eps {
            lower += step;
            lower_matrix = candidate;
        }
    }
    Ok(finish(Some(lower + 1), curve))
}

fn finish(tmix: Option<u64>, mut curve: Vec<(u64, f64)>) -> MixingTime {
    curve.sort_by_key(|&(n, _)| n);
    curve.dedup_by_key(|&mut (n, _)| n);
    if let Some(w) = curve.windows(2).find(|w| w[1].1 > w[0].1 + 1e-12) {
        log::warn!(
            "worst-case TV increased from {} at n={} to {} at n={}",
            w[0].1,
            w[0].0,
            w[1].1,
            w[1].0
        );
    }
    MixingTime { tmix, tv_curve: curve }
}
