//! Sparse multivariate polynomials over `f64`.
//!
//! Terms live in a map keyed by exponent vectors ordered graded-lexicographically
//! (total degree first, then `x1`-heavy monomials first), so iteration order is
//! deterministic everywhere downstream. Zero coefficients are never stored.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `alpha` of a monomial `x^alpha`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// `x_i^pow` in `n` variables.
    pub fn var(n: usize, i: usize, pow: u32) -> Self {
        let mut e = vec![0; n];
        e[i] = pow;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of monomials (exponent addition).
    pub fn times(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn doubled(&self) -> Monomial {
        Monomial(self.0.iter().map(|e| 2 * e).collect())
    }

    pub fn parity(&self) -> ParityClass {
        ParityClass(self.0.iter().map(|e| e % 2 == 1).collect())
    }

    pub fn is_even(&self) -> bool {
        self.0.iter().all(|e| e % 2 == 0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// All monomials in `n` variables of total degree at most `max_degree`,
    /// in graded-lex order.
    pub fn all_up_to(n: usize, max_degree: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            let mut cur = vec![0u32; n];
            push_compositions(&mut cur, 0, d, &mut out);
        }
        out
    }
}

// Enumerates exponent vectors of total degree `rest` in x1-heavy-first order.
fn push_compositions(cur: &mut Vec<u32>, i: usize, rest: u32, out: &mut Vec<Monomial>) {
    let n = cur.len();
    if i + 1 == n {
        cur[i] = rest;
        out.push(Monomial(cur.clone()));
        cur[i] = 0;
        return;
    }
    for e in (0..=rest).rev() {
        cur[i] = e;
        push_compositions(cur, i + 1, rest - e, out);
    }
    cur[i] = 0;
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Exponent vector modulo 2. Bits compare lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParityClass(Vec<bool>);

impl ParityClass {
    pub fn zero(n: usize) -> Self {
        ParityClass(vec![false; n])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| !b)
    }
}

/// Sparse polynomial in `n` variables.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exps: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

impl TryFrom<PolynomialRepr> for Polynomial {
    type Error = Error;

    fn try_from(r: PolynomialRepr) -> Result<Self> {
        Polynomial::from_terms(
            r.n,
            r.terms.into_iter().map(|t| (Monomial(t.exps), t.coef)),
        )
    }
}

impl From<Polynomial> for PolynomialRepr {
    fn from(p: Polynomial) -> Self {
        PolynomialRepr {
            n: p.n,
            terms: p
                .terms
                .into_iter()
                .map(|(m, coef)| TermRepr { exps: m.0, coef })
                .collect(),
        }
    }
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(Monomial::one(n), c)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let n = m.nvars();
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(m, c);
        }
        Polynomial { n, terms }
    }

    /// Builds a polynomial from possibly repeated terms; repeats are summed and
    /// zero coefficients dropped.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        if n == 0 {
            return Err(Error::Parse("polynomial needs at least one variable".into()));
        }
        let mut p = Polynomial::zero(n);
        for (m, c) in terms {
            if m.nvars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nvars(),
                });
            }
            if !c.is_finite() {
                return Err(Error::Parse(format!("non-finite coefficient for {m}")));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; `None` for the zero polynomial, which orders below every
    /// `Some(d)`.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    fn check_dims(&self, other: &Polynomial) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dims(other)?;
        let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *acc.entry(ma.times(mb)).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, c| *c != 0.0);
        Ok(Polynomial {
            n: self.n,
            terms: acc,
        })
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * s))
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.n, 1.0);
        for _ in 0..k {
            out = out.mul(self).expect("same dimension");
        }
        out
    }

    /// True iff every exponent of every term is even.
    pub fn is_even(&self) -> bool {
        self.terms.keys().all(Monomial::is_even)
    }

    pub fn parity_classes(&self) -> BTreeSet<ParityClass> {
        self.terms.keys().map(Monomial::parity).collect()
    }

    /// `p(x^2)`: every exponent doubled.
    pub fn check_substitute(&self) -> Polynomial {
        Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| (m.doubled(), c))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// Largest coefficient-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Polynomial) -> Result<f64> {
        Ok(self.sub(other)?.max_abs_coeff())
    }
}

/// `(1 + x1^2 + ... + xn^2)^k`.
pub fn polya_multiplier(n: usize, k: u32) -> Polynomial {
    sphere_form(n).pow(k)
}

/// `1 + ||x||^2`.
fn sphere_form(n: usize) -> Polynomial {
    let mut p = Polynomial::constant(n, 1.0);
    for i in 0..n {
        p.add_term(Monomial::var(n, i, 2), 1.0);
    }
    p
}

/// `L - sum_i x_i^p` (ball-type constraint, `p = 2` or `p = 4`).
pub fn ball_constraint(n: usize, radius_sq: f64, power: u32) -> Polynomial {
    let mut p = Polynomial::constant(n, radius_sq);
    for i in 0..n {
        p.add_term(Monomial::var(n, i, power), -1.0);
    }
    p
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, &c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if i == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}
