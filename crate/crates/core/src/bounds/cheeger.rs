use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::FiniteChain;
use crate::error::{Error, Result};

/// Largest state space handled by full subset enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

/// Slack on the `μ(A) ≤ 1/2` constraint so exact halves survive rounding.
const HALF_SLACK: f64 = 1e-12;

/// Relative tolerance under which two ratios are treated as tied.
const TIE: f64 = 1e-9;

/// Perturbation rounds per restart in [`cheeger_search`].
const MAX_KICKS: usize = 12;

/// `ξ = min { Q(A, Aᶜ) / μ(A) : 0 < μ(A) ≤ 1/2 }` and a minimizing set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheegerResult {
    pub xi: f64,
    /// Sorted state indices.
    pub argmin_set: Vec<usize>,
    /// True when obtained by enumerating every subset.
    pub exact: bool,
}

/// `Q(A, Aᶜ) / μ(A)` and `μ(A)` computed directly.
pub(crate) fn bottleneck_ratio(chain: &FiniteChain, inside: &[bool]) -> (f64, f64) {
    let (flow, mass) = cut(chain, inside);
    (flow / mass, mass)
}

/// `Q(A, Aᶜ)` and `μ(A)`.
fn cut(chain: &FiniteChain, inside: &[bool]) -> (f64, f64) {
    let n = chain.size();
    let mut flow = 0.0;
    let mut mass = 0.0;
    for x in (0..n).filter(|&x| inside[x]) {
        mass += chain.stationary().weights()[x];
        for y in (0..n).filter(|&y| !inside[y]) {
            flow += chain.edge_measure(x, y);
        }
    }
    (flow, mass)
}

/// Change in `Q(A, Aᶜ)` when state `v` is toggled in or out of `A`.
fn toggle_delta(chain: &FiniteChain, inside: &[bool], v: usize) -> f64 {
    let mut into_v = 0.0;
    let mut out_of_v = 0.0;
    for u in (0..chain.size()).filter(|&u| u != v) {
        if inside[u] {
            into_v += chain.edge_measure(u, v);
        } else {
            out_of_v += chain.edge_measure(v, u);
        }
    }
    if inside[v] {
        into_v - out_of_v
    } else {
        out_of_v - into_v
    }
}

fn members(inside: &[bool]) -> Vec<usize> {
    inside
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// `true` when `a` should replace `b` as the reported minimizer.
fn better(ratio_a: f64, set_a: &[usize], ratio_b: f64, set_b: &[usize]) -> bool {
    let scale = ratio_a.abs().max(ratio_b.abs()).max(f64::MIN_POSITIVE);
    if (ratio_a - ratio_b).abs() <= TIE * scale {
        set_a < set_b
    } else {
        ratio_a < ratio_b
    }
}

/// Exact `ξ` by Gray-code enumeration of all subsets. Ties go to the
/// lexicographically smallest sorted state list.
pub fn cheeger_exact(chain: &FiniteChain) -> Result<CheegerResult> {
    chain.require_irreducible()?;
    let n = chain.size();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLargeForEnumeration {
            states: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let mu = chain.stationary().weights();
    let mut inside = vec![false; n];
    let mut mass = 0.0;
    let mut flow = 0.0;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for i in 1u64..(1u64 << n) {
        let v = i.trailing_zeros() as usize;
        flow += toggle_delta(chain, &inside, v);
        inside[v] = !inside[v];
        mass += if inside[v] { mu[v] } else { -mu[v] };
        if mass > 0.5 + HALF_SLACK || mass <= 0.0 {
            continue;
        }
        let approx = flow / mass;
        let candidate = match &best {
            None => true,
            Some((b, _)) => approx <= *b + TIE * b.abs().max(1e-300) * 10.0,
        };
        if candidate {
            // Rescore exactly; the incremental sums drift over 2^n updates.
            let (exact_ratio, exact_mass) = bottleneck_ratio(chain, &inside);
            if exact_mass > 0.5 + HALF_SLACK {
                continue;
            }
            let set = members(&inside);
            let replace = match &best {
                None => true,
                Some((b, bset)) => better(exact_ratio, &set, *b, bset),
            };
            if replace {
                best = Some((exact_ratio, set));
            }
        }
    }
    let (xi, argmin_set) = best.expect("every singleton of a uniform 2-state chain qualifies");
    Ok(CheegerResult {
        xi,
        argmin_set,
        exact: true,
    })
}

/// `Q(A, Aᶜ) / min(μ(A), μ(Aᶜ))`: the bottleneck ratio of whichever side
/// is admissible. Searching over this symmetric score lets the descent pass
/// through sets heavier than one half.
fn symmetric_score(flow: f64, mass_in: f64, mass_out: f64) -> f64 {
    let small = mass_in.min(mass_out);
    if small <= 0.0 {
        f64::INFINITY
    } else {
        flow / small
    }
}

fn exact_score(chain: &FiniteChain, inside: &[bool]) -> f64 {
    let (flow, mass_in) = cut(chain, inside);
    let mass_out = chain
        .stationary()
        .weights()
        .iter()
        .zip(inside)
        .filter(|(_, &b)| !b)
        .map(|(m, _)| m)
        .sum();
    symmetric_score(flow, mass_in, mass_out)
}

/// Greedy descent over single-state toggles (and, for small chains,
/// add-one/remove-one swaps) until no move improves the symmetric score.
fn descend(chain: &FiniteChain, inside: &mut [bool]) -> f64 {
    let n = chain.size();
    let mu = chain.stationary().weights();
    let allow_swaps = n <= 64;
    let mut score = exact_score(chain, inside);
    loop {
        let (flow, mass_in) = cut(chain, inside);
        let mass_out = 1.0 - mass_in;
        let mut best_move: Option<(f64, Vec<usize>)> = None;
        let mut consider = |toggles: Vec<usize>, new_flow: f64, shift: f64| {
            let r = symmetric_score(new_flow, mass_in + shift, mass_out - shift);
            if r < score * (1.0 - 1e-12) && best_move.as_ref().is_none_or(|(br, _)| r < *br) {
                best_move = Some((r, toggles));
            }
        };
        for v in 0..n {
            let d = toggle_delta(chain, inside, v);
            consider(vec![v], flow + d, if inside[v] { -mu[v] } else { mu[v] });
        }
        if allow_swaps {
            for v in members(inside) {
                let dv = toggle_delta(chain, inside, v);
                inside[v] = false;
                for w in (0..n).filter(|&w| !inside[w] && w != v) {
                    let dw = toggle_delta(chain, inside, w);
                    consider(vec![v, w], flow + dv + dw, mu[w] - mu[v]);
                }
                inside[v] = true;
            }
        }
        let Some((_, toggles)) = best_move else {
            return score;
        };
        for &v in &toggles {
            inside[v] = !inside[v];
        }
        // Keep the move only if an exact evaluation confirms it.
        let moved = exact_score(chain, inside);
        if moved < score {
            score = moved;
        } else {
            for &v in &toggles {
                inside[v] = !inside[v];
            }
            return score;
        }
    }
}

/// Offers `A` and `Aᶜ` to the running minimum, whichever has at most half
/// the mass.
fn record(chain: &FiniteChain, inside: &[bool], best: &mut Option<(f64, Vec<usize>)>) {
    let complement: Vec<bool> = inside.iter().map(|&b| !b).collect();
    for side in [inside, complement.as_slice()] {
        let (ratio, mass) = bottleneck_ratio(chain, side);
        if !(mass > 0.0 && mass <= 0.5 + HALF_SLACK) {
            continue;
        }
        let set = members(side);
        if best.as_ref().is_none_or(|(b, bset)| better(ratio, &set, *b, bset)) {
            *best = Some((ratio, set));
        }
    }
}

/// Randomized local search for small bottleneck ratios. Any admissible set
/// certifies an upper bound on `ξ`, so the result is never below the exact
/// value.
///
/// One restart is seeded from every single state, then `iters` further
/// restarts begin from random sets. Each restart is followed by up to
/// `MAX_KICKS` perturbation rounds that flip a few random states and descend again,
/// keeping the result when it improves.
pub fn cheeger_search(chain: &FiniteChain, iters: usize, seed: u64) -> Result<CheegerResult> {
    chain.require_irreducible()?;
    let n = chain.size();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut order: Vec<usize> = (0..n).collect();

    for start in 0..n + iters {
        let mut inside = vec![false; n];
        if start < n {
            inside[start] = true;
        } else {
            order.shuffle(&mut rng);
            let target = rng.random_range(1..n);
            for &v in order.iter().take(target) {
                inside[v] = true;
            }
        }
        let mut score = descend(chain, &mut inside);
        record(chain, &inside, &mut best);
        for _ in 0..n.min(MAX_KICKS) {
            let mut kicked = inside.clone();
            for _ in 0..rng.random_range(1..=3.min(n)) {
                let v = rng.random_range(0..n);
                kicked[v] = !kicked[v];
            }
            let kicked_score = descend(chain, &mut kicked);
            if kicked_score < score {
                score = kicked_score;
                inside = kicked;
                record(chain, &inside, &mut best);
            }
        }
    }
    let (xi, argmin_set) = best.ok_or_else(|| {
        Error::InvalidArgument("no state set with at most half the mass".into())
    })?;
    Ok(CheegerResult {
        xi,
        argmin_set,
        exact: false,
    })
}
