//! Example chains: circulant walks on `ℤ/Nℤ`, nearest-neighbour walks on the
//! discrete torus `(ℤ/Nℤ)^d`, the `x ↦ 2x + ε` chain on `ℤ/Nℤ`, and a
//! three-move card shuffle on `S_N`.
//!
//! All of them are doubly stochastic, so `μ` is uniform and is set directly
//! rather than solved for.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chain::{is_normal, ChainFlags, Distribution, FiniteChain};
use crate::error::{Error, Result};
use crate::spectral::Relaxation;
use crate::tol;

/// Largest torus built as a dense matrix.
pub const TORUS_DENSE_LIMIT: usize = 6000;

/// Largest deck for the card shuffle (7! = 5040 states).
pub const MAX_DECK: usize = 7;

// ---------------------------------------------------------------------------
// Probability literals

/// A probability given in a chain specification, either as a JSON number or
/// as a short expression such as `"1/3"`, `"1/sqrt(2)"` or `"1-1/sqrt(2)"`.
///
/// `rational` records whether the literal is symbolically rational. It is
/// decided from the expression, never from the floating-point value: it is
/// false whenever a square root of a non-square appears, even if the terms
/// happen to cancel. A spec can also set it explicitly with
/// `{"value": ..., "rational": false}`, which is the way to mark a long
/// decimal expansion of an irrational number.
#[derive(Clone, Debug, PartialEq)]
pub struct Probability {
    pub value: f64,
    pub rational: bool,
    literal: Option<String>,
}

impl Probability {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            rational: true,
            literal: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v = LiteralParser::new(text).parse()?;
        Ok(Self {
            value: v.x,
            rational: v.rational,
            literal: Some(text.to_string()),
        })
    }
}

impl From<f64> for Probability {
    fn from(value: f64) -> Self {
        Self::exact(value)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.literal {
            Some(l) => f.write_str(l),
            None => write!(f, "{}", self.value),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawProbability {
    Number(f64),
    Text(String),
    Tagged { value: Box<RawProbability>, rational: bool },
}

impl RawProbability {
    fn resolve(self) -> Result<Probability> {
        match self {
            RawProbability::Number(x) => Ok(Probability::exact(x)),
            RawProbability::Text(t) => Probability::parse(&t),
            RawProbability::Tagged { value, rational } => {
                let mut p = value.resolve()?;
                p.rational = rational;
                Ok(p)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        RawProbability::deserialize(d)?
            .resolve()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.literal {
            Some(l) if self.rational == LiteralParser::new(l).parse().map_or(true, |v| v.rational) => {
                s.serialize_str(l)
            }
            Some(l) => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("rational", &self.rational)?;
                m.serialize_entry("value", l)?;
                m.end()
            }
            None if self.rational => s.serialize_f64(self.value),
            None => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("rational", &false)?;
                m.serialize_entry("value", &self.value)?;
                m.end()
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Value {
    x: f64,
    /// Exact value while it fits in `i128` fractions.
    exact: Option<Ratio<i128>>,
    rational: bool,
}

impl Value {
    fn combine(
        a: Value,
        b: Value,
        x: f64,
        exact: impl FnOnce(&Ratio<i128>, &Ratio<i128>) -> Option<Ratio<i128>>,
    ) -> Value {
        let rational = a.rational && b.rational;
        Value {
            x,
            exact: match (a.exact, b.exact) {
                (Some(p), Some(q)) if rational => exact(&p, &q),
                _ => None,
            },
            rational,
        }
    }
}

/// Recursive-descent evaluator for `+ - * /`, parentheses, unary minus,
/// decimal numbers and `sqrt(...)`.
struct LiteralParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> LiteralParser<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn err(&self, msg: &str) -> Error {
        Error::BadLiteral(format!("{msg} at offset {} in {:?}", self.pos, self.text))
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Value> {
        let v = self.expr()?;
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.err("trailing input"));
        }
        if !v.x.is_finite() {
            return Err(self.err("non-finite value"));
        }
        Ok(v)
    }

    fn expr(&mut self) -> Result<Value> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                let t = self.term()?;
                acc = Value::combine(acc, t, acc.x + t.x, |p, q| p.checked_add(q));
            } else if self.eat('-') {
                let t = self.term()?;
                acc = Value::combine(acc, t, acc.x - t.x, |p, q| p.checked_sub(q));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Value> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                let f = self.factor()?;
                acc = Value::combine(acc, f, acc.x * f.x, |p, q| p.checked_mul(q));
            } else if self.eat('/') {
                let f = self.factor()?;
                if f.x == 0.0 {
                    return Err(self.err("division by zero"));
                }
                acc = Value::combine(acc, f, acc.x / f.x, |p, q| p.checked_div(q));
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Value> {
        self.skip_ws();
        if self.eat('-') {
            let f = self.factor()?;
            return Ok(Value {
                x: -f.x,
                exact: f.exact.map(|r| -r),
                rational: f.rational,
            });
        }
        if self.eat('(') {
            let v = self.expr()?;
            if !self.eat(')') {
                return Err(self.err("expected ')'"));
            }
            return Ok(v);
        }
        if self.text[self.pos..].starts_with("sqrt") {
            self.pos += 4;
            if !self.eat('(') {
                return Err(self.err("expected '(' after sqrt"));
            }
            let v = self.expr()?;
            if !self.eat(')') {
                return Err(self.err("expected ')'"));
            }
            if v.x < 0.0 {
                return Err(self.err("square root of a negative number"));
            }
            let exact = v.exact.and_then(exact_sqrt);
            return Ok(Value {
                x: v.x.sqrt(),
                rational: exact.is_some(),
                exact,
            });
        }
        self.number()
    }

    fn number(&mut self) -> Result<Value> {
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .unwrap_or(rest.len());
        let token = &rest[..len];
        if token.is_empty() || token.matches('.').count() > 1 || token == "." {
            return Err(self.err("expected a number"));
        }
        let x: f64 = token.parse().map_err(|_| self.err("bad number"))?;
        self.pos += len;
        Ok(Value {
            x,
            exact: decimal_ratio(token),
            rational: true,
        })
    }
}

fn decimal_ratio(token: &str) -> Option<Ratio<i128>> {
    let (whole, frac) = token.split_once('.').unwrap_or((token, ""));
    let digits = format!("{whole}{frac}");
    let numer: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10i128.checked_pow(u32::try_from(frac.len()).ok()?)?;
    Some(Ratio::new(numer, denom))
}

fn exact_sqrt(r: Ratio<i128>) -> Option<Ratio<i128>> {
    if r.is_negative() {
        return None;
    }
    if r.is_zero() {
        return Some(r);
    }
    let root = |v: i128| {
        let s = v.isqrt();
        (s * s == v).then_some(s)
    };
    Some(Ratio::new(root(*r.numer())?, root(*r.denom())?))
}

// ---------------------------------------------------------------------------
// Specifications

/// One circulant step: jump by `shift` (mod `N`) with probability `prob`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(i64, Probability)", into = "(i64, Probability)")]
pub struct Step {
    pub shift: i64,
    pub prob: Probability,
}

impl From<(i64, Probability)> for Step {
    fn from((shift, prob): (i64, Probability)) -> Self {
        Self { shift, prob }
    }
}

impl From<Step> for (i64, Probability) {
    fn from(s: Step) -> Self {
        (s.shift, s.prob)
    }
}

/// Torus step law as written in a spec: hold with `stay`, move `+e_i` with
/// `plus[i]`, move `-e_i` with `minus[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusProbSpec {
    pub stay: Probability,
    pub plus: Vec<Probability>,
    pub minus: Vec<Probability>,
}

impl TorusProbSpec {
    pub fn to_probs(&self) -> TorusProbs {
        TorusProbs {
            stay: self.stay.value,
            plus: self.plus.iter().map(|p| p.value).collect(),
            minus: self.minus.iter().map(|p| p.value).collect(),
        }
    }

    /// Number of coordinates whose drift `p_i - p_{-i}` is symbolically
    /// rational (both literals rational).
    pub fn rational_drifts(&self) -> usize {
        self.plus
            .iter()
            .zip(&self.minus)
            .filter(|(a, b)| a.rational && b.rational)
            .count()
    }
}

/// Numeric torus step law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusProbs {
    pub stay: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl TorusProbs {
    /// Two-dimensional walk stepping right (`+e_1`) with probability `alpha`
    /// and up (`+e_2`) with probability `1 - alpha`.
    pub fn up_right(alpha: f64) -> Self {
        Self {
            stay: 0.0,
            plus: vec![alpha, 1.0 - alpha],
            minus: vec![0.0, 0.0],
        }
    }
}

/// JSON description of a chain, tagged by `"family"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChainSpec {
    Explicit {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Circulant {
        #[serde(rename = "N")]
        n: usize,
        steps: Vec<Step>,
    },
    Torus {
        #[serde(rename = "N")]
        n: usize,
        d: usize,
        probs: TorusProbSpec,
    },
    Cdg {
        #[serde(rename = "N")]
        n: usize,
    },
    Cardshuffle {
        #[serde(rename = "N")]
        n: usize,
    },
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn family(&self) -> &'static str {
        match self {
            ChainSpec::Explicit { .. } => "explicit",
            ChainSpec::Circulant { .. } => "circulant",
            ChainSpec::Torus { .. } => "torus",
            ChainSpec::Cdg { .. } => "cdg",
            ChainSpec::Cardshuffle { .. } => "cardshuffle",
        }
    }

    /// The size parameter `N`; for explicit chains the number of states.
    pub fn size_param(&self) -> usize {
        match self {
            ChainSpec::Explicit { matrix, .. } => matrix.len(),
            ChainSpec::Circulant { n, .. }
            | ChainSpec::Torus { n, .. }
            | ChainSpec::Cdg { n }
            | ChainSpec::Cardshuffle { n } => *n,
        }
    }

    /// The same spec at a different `N`. Explicit chains have no size knob.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ChainSpec::Explicit { .. } => {
                return Err(Error::InvalidArgument(
                    "explicit chains cannot be rescaled".into(),
                ))
            }
            ChainSpec::Circulant { n, .. }
            | ChainSpec::Torus { n, .. }
            | ChainSpec::Cdg { n }
            | ChainSpec::Cardshuffle { n } => *n = size,
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<FiniteChain> {
        match self {
            ChainSpec::Explicit { matrix, labels } => {
                let m = crate::chain::rows_to_matrix(matrix)?;
                FiniteChain::build(m, labels.clone())
            }
            ChainSpec::Circulant { n, steps } => circulant_chain(*n, &numeric_steps(steps)),
            ChainSpec::Torus { n, d, probs } => torus_chain(*n, *d, &probs.to_probs()),
            ChainSpec::Cdg { n } => cdg_chain(*n),
            ChainSpec::Cardshuffle { n } => card_chain(*n),
        }
    }
}

pub fn numeric_steps(steps: &[Step]) -> Vec<(i64, f64)> {
    steps.iter().map(|s| (s.shift, s.prob.value)).collect()
}

// ---------------------------------------------------------------------------
// Shared construction

fn check_probabilities(probs: &[f64], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidProbabilities(format!("{what}: entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol::STOCHASTIC {
        return Err(Error::InvalidProbabilities(format!("{what}: sum {total}")));
    }
    Ok(())
}

/// Dense doubly stochastic chain from sparse rows. Flags are given where
/// known; reversibility is checked against `μ` uniform.
fn doubly_stochastic(
    rows: &[Vec<(usize, f64)>],
    irreducible: bool,
    normal: Option<bool>,
    labels: Option<Vec<String>>,
) -> Result<FiniteChain> {
    let n = rows.len();
    let mut m = DMatrix::zeros(n, n);
    for (x, row) in rows.iter().enumerate() {
        for &(y, p) in row {
            m[(x, y)] += p;
        }
    }
    if !irreducible {
        log::warn!("family parameters give a reducible chain");
        return FiniteChain::build(m, labels);
    }
    let mu = Distribution::uniform(n);
    let reversible = (0..n).all(|x| (x + 1..n).all(|y| (m[(x, y)] - m[(y, x)]).abs() <= tol::REVERSIBLE * n as f64));
    let normal = match normal {
        Some(v) => v,
        None => sparse_normal(rows),
    };
    debug_assert!(n > 256 || normal == is_normal(&m, mu.weights()));
    Ok(FiniteChain::from_parts(
        m,
        mu,
        ChainFlags {
            irreducible,
            reversible,
            normal,
        },
        labels,
    ))
}

/// `P Pᵀ = Pᵀ P` for a doubly stochastic sparse `P` (uniform `μ`, so the
/// adjoint is the transpose).
fn sparse_normal(rows: &[Vec<(usize, f64)>]) -> bool {
    let n = rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (x, row) in rows.iter().enumerate() {
        for &(y, p) in row {
            cols[y].push((x, p));
        }
    }
    let scale = rows
        .iter()
        .flatten()
        .map(|&(_, p)| p.abs())
        .fold(0.0, f64::max);
    for x in 0..n {
        let mut diff: HashMap<usize, f64> = HashMap::new();
        // (P Pᵀ)(x, y) = Σ_z P(x, z) P(y, z)
        for &(z, p) in &rows[x] {
            for &(y, q) in &cols[z] {
                *diff.entry(y).or_insert(0.0) += p * q;
            }
        }
        // (Pᵀ P)(x, y) = Σ_z P(z, x) P(z, y)
        for &(z, p) in &cols[x] {
            for &(y, q) in &rows[z] {
                *diff.entry(y).or_insert(0.0) -= p * q;
            }
        }
        if diff.values().any(|v| v.abs() > tol::NORMAL * (1.0 + scale)) {
            return false;
        }
    }
    true
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// ---------------------------------------------------------------------------
// Circulant walks

fn validate_steps(n: usize, steps: &[(i64, f64)]) -> Result<Vec<(usize, f64)>> {
    if n < 2 {
        return Err(Error::InvalidSteps(format!("N = {n} < 2")));
    }
    if steps.is_empty() {
        return Err(Error::InvalidSteps("no steps".into()));
    }
    let probs: Vec<f64> = steps.iter().map(|s| s.1).collect();
    check_probabilities(&probs, "circulant steps")
        .map_err(|e| Error::InvalidSteps(e.to_string()))?;
    let reduced: Vec<(usize, f64)> = steps
        .iter()
        .map(|&(a, p)| (a.rem_euclid(n as i64) as usize, p))
        .collect();
    let mut residues: Vec<usize> = reduced.iter().map(|s| s.0).collect();
    residues.sort_unstable();
    if residues.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSteps("step residues are not distinct mod N".into()));
    }
    Ok(reduced)
}

/// `P(x, x + a_r mod N) = p_r`.
pub fn circulant_chain(n: usize, steps: &[(i64, f64)]) -> Result<FiniteChain> {
    let steps = validate_steps(n, steps)?;
    let g = steps
        .iter()
        .filter(|s| s.1 > 0.0)
        .fold(n as u64, |g, s| gcd(g, s.0 as u64));
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|x| steps.iter().map(|&(a, p)| ((x + a) % n, p)).collect())
        .collect();
    doubly_stochastic(&rows, g == 1, Some(true), None)
}

/// `|1 - Σ_r p_r e^{2πi j a_r / N}|` for `j = 1..N-1`.
fn circulant_moduli(n: usize, steps: &[(usize, f64)]) -> Vec<f64> {
    (1..n)
        .map(|j| {
            let (mut re, mut im) = (0.0, 0.0);
            for &(a, p) in steps {
                let r = ((j as u128 * a as u128) % n as u128) as f64;
                let half = PI * r / n as f64;
                // 1 - cos θ = 2 sin²(θ/2) keeps precision when θ is small.
                re += p * 2.0 * half.sin().powi(2);
                im -= p * (2.0 * half).sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// `γ` and `τ` of a circulant walk from its eigenvalues, in `O(N k)`.
pub fn circulant_gap(n: usize, steps: &[(i64, f64)]) -> Result<(f64, Relaxation)> {
    let steps = validate_steps(n, steps)?;
    let moduli = circulant_moduli(n, &steps);
    let gap = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    let top = moduli.iter().copied().fold(0.0, f64::max);
    Ok((gap, Relaxation::from_gap(gap, tol::zero_threshold(top))))
}

/// `τ = max_{1 ≤ j < N} |1 - Σ_r p_r e^{2πi j a_r / N}|^{-1}`.
pub fn circulant_tau(n: usize, steps: &[(i64, f64)]) -> Result<Relaxation> {
    Ok(circulant_gap(n, steps)?.1)
}

// ---------------------------------------------------------------------------
// Torus walks

fn validate_torus(n: usize, d: usize, probs: &TorusProbs) -> Result<()> {
    if n < 2 || d == 0 {
        return Err(Error::InvalidProbabilities(format!("need N >= 2 and d >= 1, got N = {n}, d = {d}")));
    }
    if probs.plus.len() != d || probs.minus.len() != d {
        return Err(Error::InvalidProbabilities(format!(
            "expected {d} plus and minus probabilities"
        )));
    }
    let mut all = vec![probs.stay];
    all.extend(&probs.plus);
    all.extend(&probs.minus);
    check_probabilities(&all, "torus")
}

fn torus_irreducible(probs: &TorusProbs) -> bool {
    probs.plus.iter().zip(&probs.minus).all(|(a, b)| a + b > 0.0)
}

/// Walk on `(ℤ/Nℤ)^d`; state `x` has index `Σ_i x_i N^i`.
pub fn torus_chain(n: usize, d: usize, probs: &TorusProbs) -> Result<FiniteChain> {
    validate_torus(n, d, probs)?;
    let states = u32::try_from(d)
        .ok()
        .and_then(|d| n.checked_pow(d))
        .filter(|&s| s <= TORUS_DENSE_LIMIT)
        .ok_or(Error::TooLarge {
            states: n.saturating_pow(d.min(64) as u32),
            limit: TORUS_DENSE_LIMIT,
        })?;
    let irreducible = torus_irreducible(probs);
    if !irreducible {
        log::warn!("torus probabilities leave some coordinate fixed; chain is reducible");
    }
    let stride: Vec<usize> = (0..d).map(|i| n.pow(i as u32)).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..states)
        .map(|x| {
            let mut row = vec![(x, probs.stay)];
            for i in 0..d {
                let coord = (x / stride[i]) % n;
                let base = x - coord * stride[i];
                row.push((base + ((coord + 1) % n) * stride[i], probs.plus[i]));
                row.push((base + ((coord + n - 1) % n) * stride[i], probs.minus[i]));
            }
            row
        })
        .collect();
    doubly_stochastic(&rows, irreducible, Some(true), None)
}

/// `γ` of a torus walk and the nonzero frequency `m` attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusGap {
    pub gap: f64,
    pub relaxation: Relaxation,
    pub frequency: Vec<usize>,
}

/// `γ = min_{m ≠ 0} |1 - λ_m|` with
/// `1 - λ_m = Σ_j (p_j + p_{-j})(1 - cos θ_j) - i Σ_j (p_j - p_{-j}) sin θ_j`,
/// `θ_j = 2π m_j / N`. Ties go to the lexicographically smallest `m`.
pub fn torus_gap_closed_form(n: usize, d: usize, probs: &TorusProbs) -> Result<TorusGap> {
    validate_torus(n, d, probs)?;
    // Per-coordinate tables of the real and imaginary contributions.
    let re: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let sym = probs.plus[j] + probs.minus[j];
            (0..n).map(|m| sym * 2.0 * (PI * m as f64 / n as f64).sin().powi(2)).collect()
        })
        .collect();
    let im: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let drift = probs.plus[j] - probs.minus[j];
            (0..n).map(|m| drift * (2.0 * PI * m as f64 / n as f64).sin()).collect()
        })
        .collect();
    let modulus = |m: &[usize]| {
        let (mut a, mut b) = (0.0, 0.0);
        for j in 0..d {
            a += re[j][m[j]];
            b += im[j][m[j]];
        }
        a.hypot(b)
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut top: f64 = 0.0;
    let mut m = vec![0usize; d];
    // |1 - λ_{-m}| = |1 - λ_m|, so only the lexicographically smaller of
    // each pair {m, -m} is scanned.
    let negated_is_smaller = |m: &[usize]| {
        for &v in m {
            let neg = (n - v) % n;
            if neg != v {
                return neg < v;
            }
        }
        false
    };
    loop {
        // Odometer, last coordinate fastest, so the scan is lexicographic.
        let mut j = d;
        loop {
            if j == 0 {
                let (gap, frequency) = best.expect("N >= 2 gives a nonzero frequency");
                return Ok(TorusGap {
                    gap,
                    relaxation: Relaxation::from_gap(gap, tol::zero_threshold(top)),
                    frequency,
                });
            }
            j -= 1;
            m[j] += 1;
            if m[j] < n {
                break;
            }
            m[j] = 0;
        }
        if negated_is_smaller(&m) {
            continue;
        }
        let v = modulus(&m);
        top = top.max(v);
        let replace = match &best {
            None => true,
            Some((b, _)) => v < *b * (1.0 - 1e-12),
        };
        if replace {
            best = Some((v, m.clone()));
        }
    }
}

// ---------------------------------------------------------------------------
// x ↦ 2x + ε

/// `X_n = 2 X_{n-1} + ε_n mod N`, `ε_n` uniform on `{-1, 0, 1}`.
pub fn cdg_chain(n: usize) -> Result<FiniteChain> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidArgument(format!("N = {n} must be odd and at least 3")));
    }
    let third = 1.0 / 3.0;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|x| {
            let y = (2 * x) % n;
            vec![((y + n - 1) % n, third), (y, third), ((y + 1) % n, third)]
        })
        .collect();
    doubly_stochastic(&rows, true, None, None)
}

// ---------------------------------------------------------------------------
// Card shuffle

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Lehmer-code rank of a permutation of `0..n`: its position in
/// lexicographic order.
pub fn permutation_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    (0..n)
        .map(|i| {
            let smaller_after = perm[i + 1..].iter().filter(|&&v| v < perm[i]).count();
            smaller_after * factorial(n - 1 - i)
        })
        .sum()
}

/// Inverse of [`permutation_rank`].
pub fn permutation_unrank(mut rank: usize, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    (0..n)
        .map(|i| {
            let f = factorial(n - 1 - i);
            let idx = rank / f;
            rank %= f;
            pool.remove(idx)
        })
        .collect()
}

/// Shuffle of `N` cards: with probability 1/3 each, do nothing, swap the top
/// two cards, or move the bottom card to the top. A state is the deck read
/// from the top (`deck[0]` is the top card) and is indexed by its Lehmer
/// rank; labels are the card sequences.
pub fn card_chain(n: usize) -> Result<FiniteChain> {
    if n > MAX_DECK {
        return Err(Error::TooLarge {
            states: factorial(n.min(20)),
            limit: factorial(MAX_DECK),
        });
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("deck of {n} cards; need at least 3")));
    }
    let states = factorial(n);
    let third = 1.0 / 3.0;
    let mut labels = Vec::with_capacity(states);
    let rows: Vec<Vec<(usize, f64)>> = (0..states)
        .map(|x| {
            let deck = permutation_unrank(x, n);
            labels.push(deck.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(""));
            let mut swapped = deck.clone();
            swapped.swap(0, 1);
            let mut rotated = deck.clone();
            rotated.rotate_right(1);
            vec![
                (x, third),
                (permutation_rank(&swapped), third),
                (permutation_rank(&rotated), third),
            ]
        })
        .collect();
    doubly_stochastic(&rows, true, None, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{spectral_gap, weighted_singular_spectrum};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn literals() {
        let p = Probability::parse("1/sqrt(2)").unwrap();
        assert_relative_eq!(p.value, 0.5f64.sqrt(), epsilon = 1e-16);
        assert!(!p.rational);
        let q = Probability::parse("1 - 1/sqrt(2)").unwrap();
        assert_relative_eq!(p.value + q.value, 1.0, epsilon = 1e-16);
        assert!(!q.rational);
        assert!(Probability::parse("2/7").unwrap().rational);
        assert!(Probability::parse("sqrt(9/4)").unwrap().rational);
        assert_abs_diff_eq!(Probability::parse("sqrt(9/4)").unwrap().value, 1.5);
        assert!(Probability::parse("0.707106781186547524400844362104849").unwrap().rational);
        assert!(Probability::parse("-(1/2)*-2").unwrap().rational);
        for bad in ["", "1/0", "sqrt(-1)", "1+", "abc", "1..2", "(1"] {
            assert!(matches!(Probability::parse(bad), Err(Error::BadLiteral(_))), "{bad}");
        }
    }

    #[test]
    fn probability_json_forms() {
        let v: Vec<Probability> = serde_json::from_str(
            r#"[0.25, "1/sqrt(2)", {"value": "0.70710678118654752440", "rational": false}]"#,
        )
        .unwrap();
        assert!(v[0].rational && !v[1].rational && !v[2].rational);
        let back = serde_json::to_string(&v).unwrap();
        let again: Vec<Probability> = serde_json::from_str(&back).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"family": "torus", "N": 8, "d": 2,
            "probs": {"stay": 0, "plus": ["1/sqrt(2)", "1-1/sqrt(2)"], "minus": [0, 0]}}"#;
        let spec = ChainSpec::from_json(text).unwrap();
        assert_eq!(spec.family(), "torus");
        assert_eq!(spec.size_param(), 8);
        if let ChainSpec::Torus { probs, .. } = &spec {
            assert_eq!(probs.rational_drifts(), 0);
        }
        let back: ChainSpec = serde_json::from_value(serde_json::to_value(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let c = spec.with_size(4).unwrap().build().unwrap();
        assert_eq!(c.size(), 16);

        let circ = ChainSpec::from_json(r#"{"family": "circulant", "N": 4, "steps": [[0, 0.5], [1, "1/2"]]}"#).unwrap();
        assert_eq!(circ.build().unwrap().transition()[(0, 1)], 0.5);
        assert!(ChainSpec::from_json(r#"{"family": "cdg", "N": 5, "bogus": 1}"#).is_err());
        let explicit = ChainSpec::from_json(r#"{"family": "explicit", "matrix": [[0, 1], [1, 0]]}"#).unwrap();
        assert!(explicit.with_size(3).is_err());
        assert_eq!(explicit.build().unwrap().size(), 2);
    }

    #[test]
    fn circulant_examples() {
        let shift = circulant_chain(4, &[(1, 1.0)]).unwrap();
        assert_eq!(shift.transition()[(3, 0)], 1.0);
        assert!(shift.flags().normal && !shift.flags().reversible);
        let lazy = circulant_chain(4, &[(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(lazy.transition()[(2, 2)], 0.5);
        let sym = circulant_chain(5, &[(1, 0.5), (4, 0.5)]).unwrap();
        assert!(sym.flags().reversible);
        assert!(sym.structure_flags().irreducible);
    }

    #[test]
    fn circulant_rejects_bad_steps() {
        assert!(matches!(circulant_chain(4, &[(1, 0.5), (5, 0.5)]), Err(Error::InvalidSteps(_))));
        assert!(matches!(circulant_chain(4, &[(1, 0.5)]), Err(Error::InvalidSteps(_))));
        assert!(matches!(circulant_chain(1, &[(0, 1.0)]), Err(Error::InvalidSteps(_))));
        assert!(matches!(circulant_chain(4, &[(1, 1.5), (2, -0.5)]), Err(Error::InvalidSteps(_))));
    }

    #[test]
    fn circulant_tau_anchors() {
        let lazy = circulant_tau(4, &[(0, 0.5), (1, 0.5)]).unwrap().value();
        assert_relative_eq!(lazy, 1.0 / (PI / 4.0).sin(), max_relative = 1e-14);
        let sym = circulant_tau(4, &[(1, 0.5), (-1, 0.5)]).unwrap().value();
        assert_relative_eq!(sym, 1.0, max_relative = 1e-14);
        let shift = circulant_tau(3, &[(1, 1.0)]).unwrap().value();
        assert_relative_eq!(shift, 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        // Steps in a proper subgroup never reach the other cosets.
        assert_eq!(circulant_tau(6, &[(0, 0.5), (2, 0.5)]).unwrap(), Relaxation::Infinite);
        assert!(!circulant_chain(6, &[(0, 0.5), (2, 0.5)]).unwrap().flags().irreducible);
    }

    #[test]
    fn torus_small_grids() {
        let p = TorusProbs::up_right(0.5);
        let c = torus_chain(2, 2, &p).unwrap();
        assert_eq!(c.size(), 4);
        let g = torus_gap_closed_form(2, 2, &p).unwrap();
        assert_relative_eq!(g.gap, 1.0, max_relative = 1e-14);
        assert_eq!(g.frequency, vec![0, 1]);
        let g4 = torus_gap_closed_form(4, 2, &p).unwrap();
        assert_relative_eq!(g4.gap, 0.5f64.sqrt(), max_relative = 1e-14);
        assert_eq!(g4.frequency, vec![0, 1]);
        let svd = weighted_singular_spectrum(&torus_chain(4, 2, &p).unwrap()).unwrap();
        assert_relative_eq!(svd.gap, g4.gap, max_relative = 1e-9);
    }

    #[test]
    fn torus_one_dimension_is_circulant() {
        let p = TorusProbs { stay: 0.2, plus: vec![0.5], minus: vec![0.3] };
        let t = torus_chain(7, 1, &p).unwrap();
        let c = circulant_chain(7, &[(0, 0.2), (1, 0.5), (-1, 0.3)]).unwrap();
        assert_eq!(t.transition(), c.transition());
    }

    #[test]
    fn torus_identity_is_reducible() {
        let p = TorusProbs { stay: 1.0, plus: vec![0.0, 0.0], minus: vec![0.0, 0.0] };
        let c = torus_chain(3, 2, &p).unwrap();
        assert!(!c.flags().irreducible);
        assert!(matches!(torus_chain(100, 2, &p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn torus_closed_form_matches_svd_on_three_grid() {
        let p = TorusProbs { stay: 0.1, plus: vec![0.4, 0.15], minus: vec![0.05, 0.3] };
        let g = torus_gap_closed_form(3, 2, &p).unwrap();
        let svd = weighted_singular_spectrum(&torus_chain(3, 2, &p).unwrap()).unwrap();
        assert_relative_eq!(g.gap, svd.gap, max_relative = 1e-9);
        let three = TorusProbs { stay: 0.0, plus: vec![0.2, 0.2, 0.2], minus: vec![0.1, 0.2, 0.1] };
        let g3 = torus_gap_closed_form(3, 3, &three).unwrap();
        let svd3 = weighted_singular_spectrum(&torus_chain(3, 3, &three).unwrap()).unwrap();
        assert_relative_eq!(g3.gap, svd3.gap, max_relative = 1e-9);
    }

    #[test]
    fn cdg_examples() {
        let c = cdg_chain(5).unwrap();
        let row: Vec<f64> = c.transition().row(0).iter().copied().collect();
        assert_eq!(row, vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 1.0 / 3.0]);
        let three = cdg_chain(3).unwrap();
        assert!(three.transition().iter().all(|&v| v == 1.0 / 3.0));
        let (gap, tau) = spectral_gap(&three).unwrap();
        assert_relative_eq!(gap, 1.0, max_relative = 1e-12);
        assert_relative_eq!(tau.value(), 1.0, max_relative = 1e-12);
        assert!(cdg_chain(4).is_err());
        let s = cdg_chain(11).unwrap().structure_flags();
        assert!(s.irreducible);
        assert_eq!(s.normal, cdg_chain(11).unwrap().flags().normal);
    }

    #[test]
    fn lehmer_ranking() {
        assert_eq!(permutation_rank(&[0, 1, 2]), 0);
        assert_eq!(permutation_rank(&[2, 1, 0]), 5);
        assert_eq!(permutation_rank(&[1, 0, 2]), 2);
        for r in 0..24 {
            assert_eq!(permutation_rank(&permutation_unrank(r, 4)), r);
        }
    }

    #[test]
    fn card_chain_three() {
        let c = card_chain(3).unwrap();
        assert_eq!(c.size(), 6);
        let p = c.transition();
        // identity 012 -> swap 102 (rank 2), rotate 201 (rank 4)
        assert_abs_diff_eq!(p[(0, 0)], 1.0 / 3.0);
        assert_abs_diff_eq!(p[(0, 2)], 1.0 / 3.0);
        assert_abs_diff_eq!(p[(0, 4)], 1.0 / 3.0);
        assert_eq!(c.labels().unwrap()[4], "201");
        for y in 0..6 {
            assert_abs_diff_eq!(p.column(y).sum(), 1.0, epsilon = 1e-15);
        }
        let s = c.structure_flags();
        assert!(s.irreducible);
        assert_eq!(s.normal, c.flags().normal);
        assert_eq!(s.reversible, c.flags().reversible);
        let (_, tau) = spectral_gap(&c).unwrap();
        assert!(tau.value() <= 41.0 * 27.0);
        assert!(card_chain(8).is_err());
        assert!(card_chain(2).is_err());
    }

    #[test]
    fn sparse_normality_matches_dense() {
        for c in [card_chain(4).unwrap(), cdg_chain(7).unwrap(), cdg_chain(9).unwrap()] {
            assert_eq!(c.flags().normal, c.structure_flags().normal);
        }
    }
}
