//! Finite-state Markov chains: construction, validation and the algebraic
//! transforms (time reversal, reversibilizations, laziness, powers) that the
//! rest of the crate is built on.
//!
//! A [`FiniteChain`] always carries a stationary distribution `μ`. Every
//! inner product and norm on functions `f: S → ℝ` in this crate is the
//! `μ`-weighted one, `⟨f, g⟩ = Σ_x f(x) g(x) μ(x)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// A probability vector over the states of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NotStochastic(format!(
                "weight {} at state {i} is negative or non-finite",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol::STOCHASTIC {
            return Err(Error::NotStochastic(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            weights: vec![1.0 / size as f64; size],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `μ f`, the average of `f` under this distribution.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `⟨f, g⟩_μ` for real functions.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Probability of a set of states.
    pub fn mass(&self, states: &[usize]) -> f64 {
        states.iter().map(|&s| self.weights[s]).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFlags {
    pub irreducible: bool,
    pub reversible: bool,
    pub normal: bool,
}

/// Flags plus the quantities that gate the lazy-only inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureFlags {
    pub irreducible: bool,
    pub reversible: bool,
    pub normal: bool,
    /// `min_x P(x, x)`.
    pub laziness: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reversibilization {
    /// `A = (P + P*) / 2`.
    Additive,
    /// `M = P P*`.
    Multiplicative,
}

/// A validated row-stochastic matrix with its stationary distribution.
#[derive(Clone)]
pub struct FiniteChain {
    transition: DMatrix<f64>,
    stationary: Distribution,
    labels: Option<Vec<String>>,
    flags: ChainFlags,
    closed_classes: usize,
}

impl fmt::Debug for FiniteChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteChain")
            .field("size", &self.size())
            .field("flags", &self.flags)
            .field("closed_classes", &self.closed_classes)
            .finish_non_exhaustive()
    }
}

impl FiniteChain {
    /// Validates `matrix`, solves for the stationary distribution and sets
    /// the structure flags.
    ///
    /// Reducible matrices are accepted; they carry `irreducible = false` and
    /// are rejected later by the spectral and bound operations. When the
    /// invariant measure is not unique the stored `μ` is the equal-weight
    /// mixture of the stationary laws of the closed classes.
    pub fn build(matrix: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        validate_stochastic(&matrix)?;
        if let Some(l) = &labels {
            if l.len() != matrix.nrows() {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} states",
                    l.len(),
                    matrix.nrows()
                )));
            }
        }
        let classes = communicating_classes(&matrix);
        let closed = closed_classes(&matrix, &classes);
        let stationary = if closed.len() == 1 {
            stationary_unique(&matrix)?
        } else {
            stationary_mixture(&matrix, &closed)?
        };
        let irreducible = classes.len() == 1;
        let flags = ChainFlags {
            irreducible,
            reversible: is_reversible(&matrix, stationary.weights()),
            normal: irreducible && is_normal(&matrix, stationary.weights()),
        };
        Ok(Self {
            transition: matrix,
            stationary,
            labels,
            flags,
            closed_classes: closed.len(),
        })
    }

    /// Builds from row vectors; convenient for small literal chains.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::build(rows_to_matrix(rows)?, None)
    }

    /// Assembles a chain whose stationary distribution and flags are known
    /// analytically (family constructors, transforms of validated chains).
    pub(crate) fn from_parts(
        transition: DMatrix<f64>,
        stationary: Distribution,
        flags: ChainFlags,
        labels: Option<Vec<String>>,
    ) -> Self {
        let closed_classes = if flags.irreducible {
            1
        } else {
            let classes = communicating_classes(&transition);
            closed_classes(&transition, &classes).len()
        };
        Self {
            transition,
            stationary,
            labels,
            flags,
            closed_classes,
        }
    }

    pub fn size(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &Distribution {
        &self.stationary
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn flags(&self) -> ChainFlags {
        self.flags
    }

    /// Number of closed communicating classes, i.e. the dimension of the
    /// space of invariant measures.
    pub fn invariant_dimension(&self) -> usize {
        self.closed_classes
    }

    /// Fails unless `μ` is unique and strictly positive.
    pub fn require_irreducible(&self) -> Result<()> {
        if self.closed_classes > 1 {
            return Err(Error::MultipleInvariantMeasures(self.closed_classes));
        }
        if !self.flags.irreducible {
            return Err(Error::NotIrreducible);
        }
        Ok(())
    }

    /// `Q(x, y) = μ(x) P(x, y)`, the law of `(X_0, X_1)` under stationarity.
    pub fn edge_measure(&self, x: usize, y: usize) -> f64 {
        self.stationary.weights[x] * self.transition[(x, y)]
    }

    /// `D^{1/2} P D^{-1/2}` with `D = diag(μ)`. Under this similarity the
    /// `μ`-inner product becomes the Euclidean one, so the `μ`-adjoint turns
    /// into the ordinary transpose.
    pub fn conjugated(&self) -> DMatrix<f64> {
        let root: Vec<f64> = self.stationary.weights.iter().map(|w| w.sqrt()).collect();
        let n = self.size();
        DMatrix::from_fn(n, n, |x, y| root[x] * self.transition[(x, y)] / root[y])
    }

    /// The time reversal `P*(x, y) = μ(y) P(y, x) / μ(x)`.
    pub fn adjoint(&self) -> Result<Self> {
        self.require_irreducible()?;
        let transition = adjoint_matrix(&self.transition, self.stationary.weights());
        Ok(Self::from_parts(
            transition,
            self.stationary.clone(),
            self.flags,
            self.labels.clone(),
        ))
    }

    /// Additive `(P + P*)/2` or multiplicative `P P*` reversibilization; both
    /// are reversible with respect to the same `μ`.
    pub fn reversibilize(&self, kind: Reversibilization) -> Result<Self> {
        self.require_irreducible()?;
        let mu = self.stationary.weights();
        let n = self.size();
        let transition = match kind {
            Reversibilization::Additive => {
                // Symmetrize Q first so detailed balance holds to rounding.
                DMatrix::from_fn(n, n, |x, y| {
                    let q = 0.5 * (mu[x] * self.transition[(x, y)] + mu[y] * self.transition[(y, x)]);
                    q / mu[x]
                })
            }
            Reversibilization::Multiplicative => {
                let adj = adjoint_matrix(&self.transition, mu);
                let m = &self.transition * adj;
                // PP* is self-adjoint; average its Q with its transpose.
                DMatrix::from_fn(n, n, |x, y| {
                    0.5 * (mu[x] * m[(x, y)] + mu[y] * m[(y, x)]) / mu[x]
                })
            }
        };
        let irreducible = communicating_classes(&transition).len() == 1;
        Ok(Self::from_parts(
            transition,
            self.stationary.clone(),
            ChainFlags {
                irreducible,
                reversible: true,
                normal: true,
            },
            self.labels.clone(),
        ))
    }

    /// `θ I + (1 - θ) P`. Same `μ`; the generator scales by `1 - θ`.
    pub fn lazy(&self, hold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&hold) {
            return Err(Error::InvalidArgument(format!(
                "holding probability {hold} outside [0, 1)"
            )));
        }
        let n = self.size();
        let transition = DMatrix::from_fn(n, n, |x, y| {
            let stay = if x == y { hold } else { 0.0 };
            stay + (1.0 - hold) * self.transition[(x, y)]
        });
        Ok(Self::from_parts(
            transition,
            self.stationary.clone(),
            self.flags,
            self.labels.clone(),
        ))
    }

    /// `P^n` by repeated squaring.
    pub fn matrix_power(&self, n: u64) -> DMatrix<f64> {
        matrix_power(&self.transition, n)
    }

    /// Recomputes the flags numerically and reports `min_x P(x, x)`.
    pub fn structure_flags(&self) -> StructureFlags {
        let mu = self.stationary.weights();
        let irreducible = communicating_classes(&self.transition).len() == 1;
        StructureFlags {
            irreducible,
            reversible: is_reversible(&self.transition, mu),
            normal: irreducible && is_normal(&self.transition, mu),
            laziness: self.laziness(),
        }
    }

    pub fn laziness(&self) -> f64 {
        (0..self.size())
            .map(|x| self.transition[(x, x)])
            .fold(f64::INFINITY, f64::min)
    }

    /// Period of the transition digraph (gcd of cycle lengths). Only
    /// meaningful for irreducible chains.
    pub fn period(&self) -> usize {
        let n = self.size();
        let mut level = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        level[0] = 0;
        queue.push_back(0);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.transition[(u, v)] <= 0.0 {
                    continue;
                }
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    let diff = (level[u] + 1).abs_diff(level[v]);
                    g = gcd(g, diff);
                }
            }
        }
        g.max(1)
    }

    /// Relabels states: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.size();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the states".into()));
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| self.transition[(perm[i], perm[j])]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        Self::build(matrix, labels)
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn validate_stochastic(matrix: &DMatrix<f64>) -> Result<()> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    for x in 0..rows {
        let mut sum = 0.0;
        for y in 0..cols {
            let p = matrix[(x, y)];
            if !p.is_finite() {
                return Err(Error::NonFinite { row: x, col: y });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::NotStochastic(format!("entry ({x}, {y}) = {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > tol::STOCHASTIC {
            return Err(Error::NotStochastic(format!("row {x} sums to {sum}")));
        }
    }
    Ok(())
}

fn positive_digraph(matrix: &DMatrix<f64>) -> DiGraph<(), ()> {
    let n = matrix.nrows();
    let mut graph = DiGraph::with_capacity(n, 4 * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for x in 0..n {
        for y in 0..n {
            if matrix[(x, y)] > 0.0 {
                graph.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    graph
}

/// Strongly connected components of the positive-entry digraph.
fn communicating_classes(matrix: &DMatrix<f64>) -> Vec<Vec<usize>> {
    tarjan_scc(&positive_digraph(matrix))
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Classes with no positive transition leaving them.
fn closed_classes(matrix: &DMatrix<f64>, classes: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = matrix.nrows();
    let mut class_of = vec![0; n];
    for (i, c) in classes.iter().enumerate() {
        for &s in c {
            class_of[s] = i;
        }
    }
    classes
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            c.iter()
                .all(|&x| (0..n).all(|y| matrix[(x, y)] <= 0.0 || class_of[y] == *i))
        })
        .map(|(_, c)| c.clone())
        .collect()
}

fn residual(matrix: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
    (matrix.transpose() * mu - mu).amax()
}

/// Dense null-space solve of `(Pᵀ - I) μ = 0` with the last equation replaced
/// by `Σ μ = 1`. The replaced row is redundant because the rows of `Pᵀ - I`
/// sum to zero, so the system is nonsingular exactly when `μ` is unique.
fn stationary_unique(matrix: &DMatrix<f64>) -> Result<Distribution> {
    let n = matrix.nrows();
    let mut system = matrix.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = system.clone().lu();
    let mut mu = match lu.solve(&rhs) {
        Some(mu) if mu.iter().all(|v| v.is_finite()) => {
            let mut mu = mu;
            // One step of iterative refinement.
            let r = &rhs - &system * &mu;
            if let Some(d) = lu.solve(&r) {
                mu += d;
            }
            mu
        }
        _ => power_stationary(matrix),
    };
    normalize_probability(&mut mu);
    if residual(matrix, &mu) > tol::STATIONARY {
        mu = power_stationary(matrix);
        normalize_probability(&mut mu);
    }
    let res = residual(matrix, &mu);
    if res > tol::STATIONARY {
        return Err(Error::NotStochastic(format!(
            "stationary solve left residual {res:e}"
        )));
    }
    Distribution::new(mu.iter().copied().collect())
}

/// Lazy power iteration `μ ← μ (I + P) / 2`; converges for periodic chains too.
fn power_stationary(matrix: &DMatrix<f64>) -> DVector<f64> {
    let n = matrix.nrows();
    let lazy = (matrix.transpose() + DMatrix::identity(n, n)) * 0.5;
    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..100_000 {
        let next = &lazy * &mu;
        let change = (&next - &mu).amax();
        mu = next;
        if change < 1e-15 {
            break;
        }
    }
    mu
}

fn normalize_probability(mu: &mut DVector<f64>) {
    for v in mu.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total = mu.sum();
    *mu /= total;
}

fn stationary_mixture(matrix: &DMatrix<f64>, closed: &[Vec<usize>]) -> Result<Distribution> {
    let n = matrix.nrows();
    let mut mu = DVector::zeros(n);
    for class in closed {
        let k = class.len();
        let sub = DMatrix::from_fn(k, k, |i, j| matrix[(class[i], class[j])]);
        let local = stationary_unique(&sub)?;
        for (i, &s) in class.iter().enumerate() {
            mu[s] += local.weights()[i] / closed.len() as f64;
        }
    }
    normalize_probability(&mut mu);
    Distribution::new(mu.iter().copied().collect())
}

pub(crate) fn adjoint_matrix(p: &DMatrix<f64>, mu: &[f64]) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(n, n, |x, y| mu[y] * p[(y, x)] / mu[x])
}

pub(crate) fn is_reversible(p: &DMatrix<f64>, mu: &[f64]) -> bool {
    let n = p.nrows();
    (0..n).all(|x| {
        (x + 1..n).all(|y| (mu[x] * p[(x, y)] - mu[y] * p[(y, x)]).abs() <= tol::REVERSIBLE)
    })
}

pub(crate) fn is_normal(p: &DMatrix<f64>, mu: &[f64]) -> bool {
    let adj = adjoint_matrix(p, mu);
    let commutator = &adj * p - p * &adj;
    commutator.amax() <= tol::NORMAL * (1.0 + p.amax())
}

pub(crate) fn matrix_power(p: &DMatrix<f64>, mut n: u64) -> DMatrix<f64> {
    let size = p.nrows();
    let mut result = DMatrix::identity(size, size);
    let mut base = p.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn shift(n: usize) -> FiniteChain {
        FiniteChain::build(DMatrix::from_fn(n, n, |x, y| f64::from(y == (x + 1) % n)), None).unwrap()
    }

    #[test]
    fn flip_chain_is_symmetric_and_normal() {
        let c = FiniteChain::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(c.stationary().weights(), &[0.5, 0.5]);
        let f = c.flags();
        assert!(f.irreducible && f.reversible && f.normal);
        assert_eq!(c.period(), 2);
    }

    #[test]
    fn two_state_stationary_matches_linear_solve() {
        // Oracle: μ(0)·0.1 = μ(1)·0.2 and μ(0) + μ(1) = 1.
        let c = FiniteChain::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert_abs_diff_eq!(c.stationary().weights()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.stationary().weights()[1], 1.0 / 3.0, epsilon = 1e-14);
        assert!(c.flags().reversible);
    }

    #[test]
    fn identity_has_multiple_invariant_measures() {
        let c = FiniteChain::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!c.flags().irreducible);
        assert_eq!(c.invariant_dimension(), 2);
        assert!(matches!(
            c.require_irreducible(),
            Err(Error::MultipleInvariantMeasures(2))
        ));
    }

    #[test]
    fn transient_state_is_reducible_with_unique_measure() {
        let c = FiniteChain::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(c.invariant_dimension(), 1);
        assert!(!c.flags().irreducible);
        assert_abs_diff_eq!(c.stationary().weights()[1], 1.0, epsilon = 1e-14);
        assert!(matches!(c.require_irreducible(), Err(Error::NotIrreducible)));
    }

    #[test]
    fn rejects_non_stochastic_input() {
        assert!(matches!(
            FiniteChain::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::NotStochastic(_))
        ));
        assert!(matches!(
            FiniteChain::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]),
            Err(Error::NotStochastic(_))
        ));
        assert!(matches!(
            FiniteChain::from_rows(&[vec![f64::NAN, 1.0], vec![0.5, 0.5]]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            FiniteChain::build(DMatrix::zeros(2, 3), None),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn adjoint_of_right_shift_is_left_shift() {
        let adj = shift(4).adjoint().unwrap();
        for x in 0..4 {
            assert_eq!(adj.transition()[(x, (x + 3) % 4)], 1.0);
        }
        let back = adj.adjoint().unwrap();
        assert!((back.transition() - shift(4).transition()).amax() <= 1e-12);
    }

    #[test]
    fn adjoint_of_reversible_chain_is_itself() {
        let c = FiniteChain::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((c.adjoint().unwrap().transition() - c.transition()).amax() <= 1e-12);
    }

    #[test]
    fn reversibilizations_of_shift() {
        let a = shift(4).reversibilize(Reversibilization::Additive).unwrap();
        for x in 0..4 {
            assert_abs_diff_eq!(a.transition()[(x, (x + 1) % 4)], 0.5);
            assert_abs_diff_eq!(a.transition()[(x, (x + 3) % 4)], 0.5);
        }
        let m = shift(4).reversibilize(Reversibilization::Multiplicative).unwrap();
        assert!((m.transition() - DMatrix::<f64>::identity(4, 4)).amax() <= 1e-15);
        assert!(m.flags().reversible && !m.flags().irreducible);
    }

    #[test]
    fn additive_reversibilization_of_lazy_right_walk() {
        let n = 6;
        let c = FiniteChain::build(
            DMatrix::from_fn(n, n, |x, y| {
                0.5 * f64::from(x == y) + 0.5 * f64::from(y == (x + 1) % n)
            }),
            None,
        )
        .unwrap();
        let a = c.reversibilize(Reversibilization::Additive).unwrap();
        for x in 0..n {
            assert_abs_diff_eq!(a.transition()[(x, x)], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(a.transition()[(x, (x + 1) % n)], 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(a.transition()[(x, (x + n - 1) % n)], 0.25, epsilon = 1e-15);
        }
        assert_eq!(a.structure_flags().reversible, true);
    }

    #[test]
    fn lazy_transform() {
        let flip = FiniteChain::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let l = flip.lazy(0.5).unwrap();
        assert!((l.transition() - DMatrix::from_element(2, 2, 0.5)).amax() == 0.0);
        assert!(l.structure_flags().laziness >= 0.5);
        assert_eq!(flip.lazy(0.0).unwrap().transition(), flip.transition());
        assert!(flip.lazy(1.0).is_err());
        assert!(flip.lazy(-0.1).is_err());
    }

    #[test]
    fn powers() {
        let flip = FiniteChain::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(flip.matrix_power(0), DMatrix::identity(2, 2));
        assert_eq!(flip.matrix_power(2), DMatrix::identity(2, 2));
        let uniform = FiniteChain::build(DMatrix::from_element(3, 3, 1.0 / 3.0), None).unwrap();
        for n in 1..5 {
            assert!((uniform.matrix_power(n) - uniform.transition()).amax() < 1e-15);
        }
    }

    #[test]
    fn structure_flags_of_shift() {
        let f = shift(5).structure_flags();
        assert!(f.normal && !f.reversible && f.irreducible);
        assert_eq!(f.laziness, 0.0);
        assert_eq!(shift(5).period(), 5);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
    }

    #[test]
    fn permutation_rejects_non_permutations() {
        assert!(shift(3).permuted(&[0, 0, 1]).is_err());
        assert!(shift(3).permuted(&[0, 1]).is_err());
        let p = shift(3).permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.size(), 3);
    }
}
