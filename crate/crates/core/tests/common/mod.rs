//! Chains shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use markov_gap::families::{card_chain, cdg_chain, circulant_chain, torus_chain, TorusProbs};
use markov_gap::FiniteChain;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn flip() -> FiniteChain {
    FiniteChain::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

pub fn uniform(n: usize) -> FiniteChain {
    FiniteChain::build(DMatrix::from_element(n, n, 1.0 / n as f64), None).unwrap()
}

pub fn symmetric_walk(n: usize) -> FiniteChain {
    circulant_chain(n, &[(1, 0.5), (-1, 0.5)]).unwrap()
}

pub fn biased_walk(n: usize) -> FiniteChain {
    circulant_chain(n, &[(1, 0.7), (-1, 0.3)]).unwrap()
}

pub fn deterministic_walk(n: usize) -> FiniteChain {
    circulant_chain(n, &[(1, 1.0)]).unwrap()
}

/// Irreducible random chain: a directed cycle plus random extra edges.
pub fn random_chain(size: usize, rng: &mut impl Rng) -> FiniteChain {
    let m = DMatrix::from_fn(size, size, |x, y| {
        if y == (x + 1) % size {
            rng.random_range(0.2..1.0)
        } else if rng.random_bool(0.5) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    let mut rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    for row in &mut rows {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    FiniteChain::from_rows(&rows).unwrap()
}

pub fn random_chains(count: usize, size: usize, seed: u64) -> Vec<FiniteChain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_chain(size, &mut rng)).collect()
}

/// The reference battery, named.
pub fn battery() -> Vec<(String, FiniteChain)> {
    let mut out: Vec<(String, FiniteChain)> = vec![
        ("flip".into(), flip()),
        ("uniform2".into(), uniform(2)),
        ("uniform5".into(), uniform(5)),
    ];
    for n in [3, 4, 8, 16] {
        for (name, c) in [
            ("symmetric", symmetric_walk(n)),
            ("biased", biased_walk(n)),
            ("deterministic", deterministic_walk(n)),
        ] {
            out.push((format!("lazy_{name}{n}"), c.lazy(0.5).unwrap()));
            out.push((format!("{name}{n}"), c));
        }
    }
    for n in [2, 4] {
        out.push((format!("torus{n}"), torus_chain(n, 2, &TorusProbs::up_right(0.5)).unwrap()));
    }
    for n in [5, 11] {
        out.push((format!("cdg{n}"), cdg_chain(n).unwrap()));
    }
    for n in [3, 4] {
        out.push((format!("cards{n}"), card_chain(n).unwrap()));
    }
    for (i, c) in random_chains(20, 8, 20_231_104).into_iter().enumerate() {
        out.push((format!("random8_{i}"), c));
    }
    out
}
