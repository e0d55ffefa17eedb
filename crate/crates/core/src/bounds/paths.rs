use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::chain::FiniteChain;
use crate::error::{Error, Result};

/// A directed path `Γ_{x,y}` for every ordered pair of distinct states, each
/// a list of edges `(a, b)` with `Q(a, b) > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathEnsemble {
    #[serde(serialize_with = "serialize_paths")]
    pub paths: BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    /// `B = max_e (1/Q(e)) Σ_{Γ_{x,y} ∋ e} μ(x) μ(y) |Γ_{x,y}|`.
    pub congestion: f64,
}

fn serialize_paths<S: Serializer>(
    paths: &BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        from: usize,
        to: usize,
        edges: &'a [(usize, usize)],
    }
    let mut seq = s.serialize_seq(Some(paths.len()))?;
    for (&(from, to), edges) in paths {
        seq.serialize_element(&Entry { from, to, edges })?;
    }
    seq.end()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathBound {
    pub congestion: f64,
    /// `1/B`, a lower bound on `γ`.
    pub gap_lower: f64,
    pub ensemble: PathEnsemble,
}

impl PathEnsemble {
    /// Builds an ensemble from vertex sequences and computes its congestion.
    pub fn from_vertex_paths(
        chain: &FiniteChain,
        vertex_paths: BTreeMap<(usize, usize), Vec<usize>>,
    ) -> Result<Self> {
        let paths = vertex_paths
            .into_iter()
            .map(|(k, v)| (k, v.windows(2).map(|w| (w[0], w[1])).collect()))
            .collect();
        Self::from_edge_paths(chain, paths)
    }

    pub fn from_edge_paths(
        chain: &FiniteChain,
        paths: BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    ) -> Result<Self> {
        validate(chain, &paths)?;
        let congestion = congestion(chain, &paths);
        Ok(Self { paths, congestion })
    }
}

fn validate(chain: &FiniteChain, paths: &BTreeMap<(usize, usize), Vec<(usize, usize)>>) -> Result<()> {
    let n = chain.size();
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let edges = paths
                .get(&(x, y))
                .ok_or_else(|| Error::InvalidPaths(format!("missing path {x} -> {y}")))?;
            let mut at = x;
            for &(a, b) in edges {
                if a != at || a >= n || b >= n {
                    return Err(Error::InvalidPaths(format!("path {x} -> {y} is not contiguous")));
                }
                if chain.edge_measure(a, b) <= 0.0 {
                    return Err(Error::InvalidPaths(format!(
                        "path {x} -> {y} uses edge ({a}, {b}) with Q = 0"
                    )));
                }
                at = b;
            }
            if at != y || edges.is_empty() {
                return Err(Error::InvalidPaths(format!("path {x} -> {y} ends at {at}")));
            }
        }
    }
    if let Some(&(x, y)) = paths.keys().find(|(x, y)| x == y || *x >= n || *y >= n) {
        return Err(Error::InvalidPaths(format!("unexpected key ({x}, {y})")));
    }
    Ok(())
}

fn congestion(chain: &FiniteChain, paths: &BTreeMap<(usize, usize), Vec<(usize, usize)>>) -> f64 {
    let mu = chain.stationary().weights();
    let mut load: HashMap<(usize, usize), f64> = HashMap::new();
    for (&(x, y), edges) in paths {
        let weight = mu[x] * mu[y] * edges.len() as f64;
        let mut seen: Vec<(usize, usize)> = edges.clone();
        seen.sort_unstable();
        seen.dedup();
        for e in seen {
            *load.entry(e).or_insert(0.0) += weight;
        }
    }
    load.into_iter()
        .map(|((a, b), l)| l / chain.edge_measure(a, b))
        .fold(0.0, f64::max)
}

/// Out-neighbors in the digraph `E = {(x, y) : Q(x, y) > 0}`, ascending.
fn neighbors(chain: &FiniteChain) -> Vec<Vec<usize>> {
    let n = chain.size();
    (0..n)
        .map(|x| (0..n).filter(|&y| y != x && chain.edge_measure(x, y) > 0.0).collect())
        .collect()
}

/// BFS parents from `source`; neighbors are visited in the given order so
/// the first discovery wins ties.
fn bfs_parents(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    parent
}

fn trace(parent: &[Option<usize>], source: usize, target: usize) -> Option<Vec<usize>> {
    let mut path = vec![target];
    let mut at = target;
    while at != source {
        at = parent[at]?;
        path.push(at);
    }
    path.reverse();
    Some(path)
}

fn default_ensemble(chain: &FiniteChain) -> Result<BTreeMap<(usize, usize), Vec<usize>>> {
    let adj = neighbors(chain);
    let n = chain.size();
    let mut out = BTreeMap::new();
    for x in 0..n {
        let parent = bfs_parents(&adj, x);
        for y in (0..n).filter(|&y| y != x) {
            let p = trace(&parent, x, y).ok_or(Error::NoPathExists { from: x, to: y })?;
            out.insert((x, y), p);
        }
    }
    Ok(out)
}

fn loop_erase(walk: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(walk.len());
    for &v in walk {
        if let Some(pos) = out.iter().position(|&u| u == v) {
            out.truncate(pos + 1);
        } else {
            out.push(v);
        }
    }
    out
}

/// A randomized ensemble: route `x → z → y` through a random waypoint along
/// randomly tie-broken shortest paths, then erase loops.
pub fn random_ensemble<R: Rng>(chain: &FiniteChain, rng: &mut R) -> Result<PathEnsemble> {
    let n = chain.size();
    let mut adj = neighbors(chain);
    for list in &mut adj {
        list.shuffle(rng);
    }
    let parents: Vec<_> = (0..n).map(|s| bfs_parents(&adj, s)).collect();
    let mut out = BTreeMap::new();
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let z = rng.random_range(0..n);
            let mut walk = trace(&parents[x], x, z).ok_or(Error::NoPathExists { from: x, to: z })?;
            let tail = trace(&parents[z], z, y).ok_or(Error::NoPathExists { from: z, to: y })?;
            walk.extend_from_slice(&tail[1..]);
            out.insert((x, y), loop_erase(&walk));
        }
    }
    PathEnsemble::from_vertex_paths(chain, out)
}

/// Congestion `B` of the supplied ensemble, or of breadth-first shortest
/// paths with lowest-index tie-breaking, and the resulting `γ ≥ 1/B`.
pub fn path_bound(chain: &FiniteChain, paths: Option<&PathEnsemble>) -> Result<PathBound> {
    chain.require_irreducible()?;
    let ensemble = match paths {
        Some(p) => {
            validate(chain, &p.paths)?;
            PathEnsemble {
                paths: p.paths.clone(),
                congestion: congestion(chain, &p.paths),
            }
        }
        None => PathEnsemble::from_vertex_paths(chain, default_ensemble(chain)?)?,
    };
    Ok(PathBound {
        congestion: ensemble.congestion,
        gap_lower: 1.0 / ensemble.congestion,
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shift(n: usize) -> FiniteChain {
        FiniteChain::build(DMatrix::from_fn(n, n, |x, y| f64::from(y == (x + 1) % n)), None).unwrap()
    }

    /// Direct double loop over edges and pairs.
    fn naive_congestion(chain: &FiniteChain, e: &PathEnsemble) -> f64 {
        let n = chain.size();
        let mu = chain.stationary().weights();
        let mut best: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let q = chain.edge_measure(a, b);
                if q <= 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for ((x, y), edges) in &e.paths {
                    if edges.contains(&(a, b)) {
                        s += mu[*x] * mu[*y] * edges.len() as f64;
                    }
                }
                best = best.max(s / q);
            }
        }
        best
    }

    #[test]
    fn flip_is_tight() {
        let c = FiniteChain::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = path_bound(&c, None).unwrap();
        assert_abs_diff_eq!(b.congestion, 0.5);
        assert_abs_diff_eq!(b.gap_lower, 2.0);
    }

    #[test]
    fn three_cycle_follows_the_cycle() {
        let b = path_bound(&shift(3), None).unwrap();
        assert_abs_diff_eq!(b.congestion, 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.gap_lower, 0.6, epsilon = 1e-12);
        assert_eq!(b.ensemble.paths[&(0, 2)], vec![(0, 1), (1, 2)]);
        assert_abs_diff_eq!(naive_congestion(&shift(3), &b.ensemble), b.congestion, epsilon = 1e-12);
    }

    #[test]
    fn uniform_three_single_edges() {
        let c = FiniteChain::build(DMatrix::from_element(3, 3, 1.0 / 3.0), None).unwrap();
        let b = path_bound(&c, None).unwrap();
        assert_abs_diff_eq!(b.congestion, 1.0, epsilon = 1e-12);
        assert!(b.ensemble.paths.values().all(|p| p.len() == 1));
    }

    #[test]
    fn random_ensembles_are_valid_and_match_recomputation() {
        let c = shift(5).lazy(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let e = random_ensemble(&c, &mut rng).unwrap();
            let b = path_bound(&c, Some(&e)).unwrap();
            assert!((naive_congestion(&c, &e) - b.congestion).abs() <= 1e-12 * b.congestion);
        }
    }

    #[test]
    fn rejects_broken_ensembles() {
        let c = shift(3);
        let mut e = path_bound(&c, None).unwrap().ensemble;
        e.paths.insert((0, 2), vec![(0, 2)]);
        assert!(matches!(path_bound(&c, Some(&e)), Err(Error::InvalidPaths(_))));
        e.paths.remove(&(0, 2));
        assert!(matches!(path_bound(&c, Some(&e)), Err(Error::InvalidPaths(_))));
    }

    #[test]
    fn loop_erasure() {
        assert_eq!(loop_erase(&[0, 1, 2, 1, 3]), vec![0, 1, 3]);
        assert_eq!(loop_erase(&[0, 1, 0, 2]), vec![0, 2]);
    }

    #[test]
    fn ensemble_json_lists_pairs() {
        let b = path_bound(&shift(3), None).unwrap();
        let v = serde_json::to_value(&b.ensemble).unwrap();
        assert_eq!(v["paths"].as_array().unwrap().len(), 6);
        assert_eq!(v["paths"][0]["from"], 0);
    }
}
