//! Sparse multivariate polynomials over the joint variable vector
//! `z = [x_1..x_n, w_1..w_d]`.
//!
//! Variables are positional: the x-block occupies indices `0..n_x` and the
//! noise block follows at `n_x..n_x + n_w`. Terms are kept in a
//! `BTreeMap` keyed by [`MultiIndex`], whose ordering is graded
//! lexicographic, so iteration and serialization are deterministic.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const COEFF_EPS: f64 = 1e-14;

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// The multi-index of the single variable `var` raised to `power`.
    pub fn unit(len: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; len];
        e[var] = power;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `|a|_1`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Body order `|a|_0`: number of variables with a non-zero exponent.
    pub fn body_order(&self) -> usize {
        self.0.iter().filter(|&&e| e > 0).count()
    }

    /// Largest single exponent `|a|_inf`.
    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Indices of variables with non-zero exponent.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, _)| i)
    }

    /// True when every variable below `n_x` has exponent zero.
    pub fn is_pure_tail(&self, n_x: usize) -> bool {
        self.0[..n_x].iter().all(|&e| e == 0)
    }

    pub fn tail(&self, n_x: usize) -> &[u32] {
        &self.0[n_x..]
    }

    pub fn monomial_value(&self, point: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&e, &z) in self.0.iter().zip(point) {
            if e > 0 {
                v *= z.powi(e as i32);
            }
        }
        v
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), rhs.len());
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Graded lexicographic: lower total degree first; within a degree the
/// exponent vector compared in reverse, so `x_0` precedes `x_1` and
/// `x_0^2` precedes `x_0 x_1`.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A real polynomial in `n_x` decision variables and `n_w` noise variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    n_x: usize,
    n_w: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(n_x: usize, n_w: usize) -> Self {
        Polynomial {
            n_x,
            n_w,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_x: usize, n_w: usize, c: f64) -> Self {
        let mut p = Self::zero(n_x, n_w);
        p.add_term(MultiIndex::zeros(n_x + n_w), c);
        p
    }

    /// The monomial `z_var`.
    pub fn var(n_x: usize, n_w: usize, var: usize) -> Self {
        assert!(var < n_x + n_w, "variable index out of range");
        let mut p = Self::zero(n_x, n_w);
        p.add_term(MultiIndex::unit(n_x + n_w, var, 1), 1.0);
        p
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs, merging
    /// repeated monomials.
    pub fn from_terms<I>(n_x: usize, n_w: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut p = Self::zero(n_x, n_w);
        for (c, e) in terms {
            if e.len() != n_x + n_w {
                return Err(SsosError::Dimension(format!(
                    "term has {} exponents, expected {}",
                    e.len(),
                    n_x + n_w
                )));
            }
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_vars(&self) -> usize {
        self.n_x + self.n_w
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    /// Highest total degree among stored terms; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Adds `c * z^alpha` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        debug_assert_eq!(alpha.len(), self.n_vars());
        let entry = self.terms.entry(alpha);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v.abs() < COEFF_EPS {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                if c.abs() >= COEFF_EPS {
                    v.insert(c);
                }
            }
        }
    }

    fn check_same_space(&self, other: &Polynomial) -> Result<()> {
        if self.n_x != other.n_x || self.n_w != other.n_w {
            return Err(SsosError::Dimension(format!(
                "polynomials over ({}, {}) and ({}, {}) variables",
                self.n_x, self.n_w, other.n_x, other.n_w
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (a, c) in other.terms() {
            out.add_term(a.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (a, c) in other.terms() {
            out.add_term(a.clone(), -c);
        }
        Ok(out)
    }

    /// Product by convolution of the two term maps.
    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = Polynomial::zero(self.n_x, self.n_w);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a + b, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.n_x, self.n_w);
        for (a, c) in self.terms() {
            out.add_term(a.clone(), c * s);
        }
        out
    }

    /// Partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial> {
        if var >= self.n_vars() {
            return Err(SsosError::Dimension(format!(
                "variable index {var} out of range for {} variables",
                self.n_vars()
            )));
        }
        let mut out = Polynomial::zero(self.n_x, self.n_w);
        for (a, c) in self.terms() {
            let e = a.exponents()[var];
            if e == 0 {
                continue;
            }
            let mut d = a.exponents().to_vec();
            d[var] -= 1;
            out.add_term(MultiIndex(d), c * e as f64);
        }
        Ok(out)
    }

    /// Gradient with respect to the x-block.
    pub fn gradient_x(&self) -> Vec<Polynomial> {
        (0..self.n_x)
            .map(|i| self.differentiate(i).expect("index in range"))
            .collect()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars() {
            return Err(SsosError::Dimension(format!(
                "point has length {}, expected {}",
                point.len(),
                self.n_vars()
            )));
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms().map(|(a, c)| c * a.monomial_value(point)).sum()
    }

    /// Substitutes fixed noise values, leaving a polynomial in x alone.
    pub fn fix_noise(&self, omega: &[f64]) -> Result<Polynomial> {
        if omega.len() != self.n_w {
            return Err(SsosError::Dimension(format!(
                "{} noise values for {} noise variables",
                omega.len(),
                self.n_w
            )));
        }
        let mut out = Polynomial::zero(self.n_x, 0);
        for (a, c) in self.terms() {
            let w: f64 = a
                .tail(self.n_x)
                .iter()
                .zip(omega)
                .map(|(&e, &v)| v.powi(e as i32))
                .product();
            out.add_term(MultiIndex(a.exponents()[..self.n_x].to_vec()), c * w);
        }
        Ok(out)
    }

    /// Keeps only terms for which `keep` holds.
    pub fn filter_terms(&self, mut keep: impl FnMut(&MultiIndex) -> bool) -> Polynomial {
        let mut out = Polynomial::zero(self.n_x, self.n_w);
        for (a, c) in self.terms() {
            if keep(a) {
                out.add_term(a.clone(), c);
            }
        }
        out
    }

    /// Plain-text form: a header `n_x n_w`, then one `coeff e1 .. e(n+d)`
    /// line per term in graded-lex order.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n_x, self.n_w);
        for (a, c) in self.terms() {
            s.push_str(&c.to_string());
            for e in a.exponents() {
                s.push(' ');
                s.push_str(&e.to_string());
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`Polynomial::to_text`] output. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Polynomial> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| SsosError::parse(1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SsosError::parse(hline, e.to_string()))?;
        if dims.len() != 2 {
            return Err(SsosError::parse(hline, "header must be `n_x n_w`"));
        }
        let (n_x, n_w) = (dims[0], dims[1]);
        let mut p = Polynomial::zero(n_x, n_w);
        for (ln, line) in lines {
            let mut toks = line.split_whitespace();
            let c: f64 = toks
                .next()
                .unwrap()
                .parse()
                .map_err(|e: std::num::ParseFloatError| SsosError::parse(ln, e.to_string()))?;
            let e: Vec<u32> = toks
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| SsosError::parse(ln, e.to_string()))?;
            if e.len() != n_x + n_w {
                return Err(SsosError::parse(
                    ln,
                    format!("expected {} exponents, found {}", n_x + n_w, e.len()),
                ));
            }
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.multiply(rhs).expect("polynomial dimension mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// `f(x, w) = (x - w)^2 + (w x)^2`, the one-dimensional test potential whose
/// tightest lower bound is `w^4 / (1 + w^2)`.
pub fn simple_quadratic() -> Polynomial {
    let x = Polynomial::var(1, 1, 0);
    let w = Polynomial::var(1, 1, 1);
    let d = &x - &w;
    let wx = &w * &x;
    &(&d * &d) + &(&wx * &wx)
}
