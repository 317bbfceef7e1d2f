//! Truncated polynomials in `(x, y) in C^2n` with [`TimeCoeff`] coefficients.
//!
//! Bracket convention: `{F, G} = sum_l (dF/dx_l dG/dy_l - dF/dy_l dG/dx_l)`,
//! so `{x_1 y_1, x_1} = -x_1`. The Lie operator of a generator `chi` is
//! `L_chi F = {F, chi}`. Acting on the extended quadratic part
//! `h = eta + sum_l lambda_l x_l y_l` (with `eta` conjugate to `t`) it gives
//! `L_chi h = -(d/dt + sum_l lambda_l (x_l d/dx_l - y_l d/dy_l)) chi = -lie_h(chi)`.
//!
//! All products and brackets drop terms of total degree above `n_trunc`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;
use crate::timealg::{ExpMonomial, TimeCoeff};

/// Exponent pair `(alpha, beta)` of the monomial `x^alpha y^beta`.
///
/// Ordered graded-lexicographically: total degree first, then lex on the
/// concatenation `(alpha, beta)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    alpha: Vec<u32>,
    beta: Vec<u32>,
}

impl MultiIndex {
    pub fn new(alpha: Vec<u32>, beta: Vec<u32>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "alpha has length {}, beta has length {}",
                alpha.len(),
                beta.len()
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            alpha: vec![0; n],
            beta: vec![0; n],
        }
    }

    /// Index of the coordinate function `x_l`.
    pub fn x(n: usize, l: usize) -> Self {
        let mut idx = Self::zero(n);
        idx.alpha[l] = 1;
        idx
    }

    /// Index of the coordinate function `y_l`.
    pub fn y(n: usize, l: usize) -> Self {
        let mut idx = Self::zero(n);
        idx.beta[l] = 1;
        idx
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    pub fn alpha_degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    pub fn beta_degree(&self) -> u32 {
        self.beta.iter().sum()
    }

    pub fn degree(&self) -> u32 {
        self.alpha_degree() + self.beta_degree()
    }

    /// Membership in `Gamma = {|alpha| >= 2, |beta| >= 1}`.
    pub fn in_gamma(&self) -> bool {
        self.alpha_degree() >= 2 && self.beta_degree() >= 1
    }

    /// `Some(l)` when `beta = e_l`.
    pub fn linear_y_slot(&self) -> Option<usize> {
        if self.beta_degree() != 1 {
            return None;
        }
        self.beta.iter().position(|&b| b == 1)
    }

    /// `(alpha - beta) . lambda`.
    pub fn shift(&self, lambda: &[Complex64]) -> Complex64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(lambda)
            .map(|((&a, &b), &l)| l * (a as f64 - b as f64))
            .sum()
    }

    fn monomial(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for l in 0..self.n() {
            if self.alpha[l] > 0 {
                v *= x[l].powu(self.alpha[l]);
            }
            if self.beta[l] > 0 {
                v *= y[l].powu(self.beta[l]);
            }
        }
        v
    }

    fn sum(&self, other: &Self) -> Self {
        Self {
            alpha: self
                .alpha
                .iter()
                .zip(&other.alpha)
                .map(|(a, b)| a + b)
                .collect(),
            beta: self
                .beta
                .iter()
                .zip(&other.beta)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.alpha.cmp(&other.alpha))
            .then_with(|| self.beta.cmp(&other.beta))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={:?}, beta={:?})", self.alpha, self.beta)
    }
}

/// Sparse truncated series `sum c_{alpha,beta}(t) x^alpha y^beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyXY {
    n: usize,
    n_trunc: u32,
    coeffs: BTreeMap<MultiIndex, TimeCoeff>,
}

impl PolyXY {
    pub fn zero(n: usize, n_trunc: u32) -> Self {
        Self {
            n,
            n_trunc,
            coeffs: BTreeMap::new(),
        }
    }

    /// Build from `(index, coefficient)` pairs; repeated indices accumulate and
    /// indices above `n_trunc` are dropped.
    pub fn from_terms<I>(n: usize, n_trunc: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, TimeCoeff)>,
    {
        let mut raw: BTreeMap<MultiIndex, Vec<ExpMonomial>> = BTreeMap::new();
        for (idx, c) in terms {
            if idx.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "index {idx} does not have dimension {n}"
                )));
            }
            if idx.degree() > n_trunc {
                continue;
            }
            raw.entry(idx).or_default().extend_from_slice(c.terms());
        }
        Ok(Self::from_raw(n, n_trunc, raw))
    }

    fn from_raw(n: usize, n_trunc: u32, raw: BTreeMap<MultiIndex, Vec<ExpMonomial>>) -> Self {
        let coeffs = raw
            .into_iter()
            .filter_map(|(idx, terms)| {
                let c = TimeCoeff::from_terms(terms);
                (!c.is_zero()).then_some((idx, c))
            })
            .collect();
        Self { n, n_trunc, coeffs }
    }

    /// The coordinate function `x_l`.
    pub fn coord_x(n: usize, n_trunc: u32, l: usize) -> Self {
        let mut p = Self::zero(n, n_trunc);
        p.coeffs.insert(MultiIndex::x(n, l), TimeCoeff::real(1.0));
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_trunc(&self) -> u32 {
        self.n_trunc
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Structural zero: no stored coefficient survives canonicalization.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, idx: &MultiIndex) -> Option<&TimeCoeff> {
        self.coeffs.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &TimeCoeff)> {
        self.coeffs.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = &MultiIndex> {
        self.coeffs.keys()
    }

    /// Same series with a different truncation degree.
    pub fn with_trunc(&self, n_trunc: u32) -> Self {
        Self {
            n: self.n,
            n_trunc,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(idx, _)| idx.degree() <= n_trunc)
                .map(|(i, c)| (i.clone(), c.clone()))
                .collect(),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.n_trunc != other.n_trunc {
            return Err(Error::DimensionMismatch(format!(
                "(n={}, N={}) vs (n={}, N={})",
                self.n, self.n_trunc, other.n, other.n_trunc
            )));
        }
        Ok(())
    }

    /// `sum_i w_i P_i`, canonicalizing each coefficient once over all contributions.
    pub fn linear_combination(terms: &[(Complex64, &PolyXY)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty linear combination".into()))?
            .1;
        let mut raw: BTreeMap<MultiIndex, Vec<ExpMonomial>> = BTreeMap::new();
        for (w, p) in terms {
            first.check_compatible(p)?;
            for (idx, c) in &p.coeffs {
                raw.entry(idx.clone()).or_default().extend(
                    c.terms()
                        .iter()
                        .map(|m| ExpMonomial::new(m.coeff * w, m.power, m.rate)),
                );
            }
        }
        Ok(Self::from_raw(first.n, first.n_trunc, raw))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        Self::linear_combination(&[(one, self), (one, other)])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        Self::linear_combination(&[(one, self), (-one, other)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.n, self.n_trunc);
        for (idx, c) in &self.coeffs {
            let sc = c.scale(s);
            if !sc.is_zero() {
                out.coeffs.insert(idx.clone(), sc);
            }
        }
        out
    }

    /// Truncated product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let lhs: Vec<_> = self.coeffs.iter().collect();
        let rhs: Vec<_> = other.coeffs.iter().collect();
        let n_trunc = self.n_trunc;
        let chunks = par::map(&lhs, |&(fi, fc)| {
            let mut out = Vec::new();
            for &(gi, gc) in &rhs {
                if fi.degree() + gi.degree() > n_trunc {
                    continue;
                }
                out.push((fi.sum(gi), product_terms(fc, gc, 1.0)));
            }
            out
        });
        Ok(Self::from_raw(self.n, self.n_trunc, gather(chunks)))
    }

    /// Canonical Poisson bracket `{self, other}`, truncated.
    pub fn poisson(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let lhs: Vec<_> = self.coeffs.iter().collect();
        let rhs: Vec<_> = other.coeffs.iter().collect();
        let (n, n_trunc) = (self.n, self.n_trunc);
        let chunks = par::map(&lhs, |&(fi, fc)| {
            let mut out = Vec::new();
            for &(gi, gc) in &rhs {
                let deg = fi.degree() + gi.degree();
                if deg < 2 || deg - 2 > n_trunc {
                    continue;
                }
                for l in 0..n {
                    let w = fi.alpha[l] as i64 * gi.beta[l] as i64
                        - fi.beta[l] as i64 * gi.alpha[l] as i64;
                    if w == 0 {
                        continue;
                    }
                    let mut idx = fi.sum(gi);
                    idx.alpha[l] -= 1;
                    idx.beta[l] -= 1;
                    out.push((idx, product_terms(fc, gc, w as f64)));
                }
            }
            out
        });
        Ok(Self::from_raw(n, n_trunc, gather(chunks)))
    }

    pub fn partial_x(&self, l: usize) -> Self {
        let mut raw: BTreeMap<MultiIndex, Vec<ExpMonomial>> = BTreeMap::new();
        for (idx, c) in &self.coeffs {
            let a = idx.alpha[l];
            if a == 0 {
                continue;
            }
            let mut d = idx.clone();
            d.alpha[l] -= 1;
            raw.insert(d, c.scale_real(a as f64).terms().to_vec());
        }
        Self::from_raw(self.n, self.n_trunc, raw)
    }

    pub fn partial_y(&self, l: usize) -> Self {
        let mut raw: BTreeMap<MultiIndex, Vec<ExpMonomial>> = BTreeMap::new();
        for (idx, c) in &self.coeffs {
            let b = idx.beta[l];
            if b == 0 {
                continue;
            }
            let mut d = idx.clone();
            d.beta[l] -= 1;
            raw.insert(d, c.scale_real(b as f64).terms().to_vec());
        }
        Self::from_raw(self.n, self.n_trunc, raw)
    }

    /// Coefficientwise time derivative.
    pub fn time_derivative(&self) -> Self {
        let raw = self
            .coeffs
            .iter()
            .map(|(idx, c)| (idx.clone(), c.derivative_terms()))
            .collect();
        Self::from_raw(self.n, self.n_trunc, raw)
    }

    pub fn eval(&self, x: &[Complex64], y: &[Complex64], t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(idx, c)| c.eval(t) * idx.monomial(x, y))
            .sum()
    }

    /// `sum_{alpha,beta} M_{alpha,beta} R^{|alpha+beta|}` with `M` the decay
    /// bound of each coefficient at rate `a`; bounds `||F(t)||_R <= M e^{-a t}`.
    pub fn taylor_norm(&self, radius: f64, a: f64) -> Result<f64> {
        let mut total = 0.0;
        for (idx, c) in &self.coeffs {
            total += c.decay_bound(a)? * radius.powi(idx.degree() as i32);
        }
        Ok(total)
    }

    /// Every stored index lies in `Gamma`.
    pub fn is_qx_ly(&self) -> bool {
        self.coeffs.keys().all(MultiIndex::in_gamma)
    }

    /// Every stored index has `beta = e_l` for some `l`.
    pub fn is_ly(&self) -> bool {
        self.coeffs.keys().all(|i| i.linear_y_slot().is_some())
    }

    pub fn is_y_free(&self) -> bool {
        self.coeffs.keys().all(|i| i.beta_degree() == 0)
    }

    pub fn first_outside_gamma(&self) -> Option<&MultiIndex> {
        self.coeffs.keys().find(|i| !i.in_gamma())
    }

    pub fn first_not_ly(&self) -> Option<&MultiIndex> {
        self.coeffs.keys().find(|i| i.linear_y_slot().is_none())
    }

    pub fn min_degree(&self) -> Result<u32> {
        self.coeffs
            .keys()
            .next()
            .map(MultiIndex::degree)
            .ok_or(Error::EmptyPolynomial)
    }

    pub fn max_degree(&self) -> Result<u32> {
        self.coeffs
            .keys()
            .next_back()
            .map(MultiIndex::degree)
            .ok_or(Error::EmptyPolynomial)
    }

    /// Number of exponential-polynomial terms across all coefficients.
    pub fn term_count(&self) -> usize {
        self.coeffs.values().map(TimeCoeff::len).sum()
    }
}

impl fmt::Display for PolyXY {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (i, (idx, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{idx}: {c}")?;
        }
        Ok(())
    }
}

fn product_terms(a: &TimeCoeff, b: &TimeCoeff, w: f64) -> Vec<ExpMonomial> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for p in a.terms() {
        for q in b.terms() {
            out.push(ExpMonomial::new(
                p.coeff * q.coeff * w,
                p.power + q.power,
                p.rate + q.rate,
            ));
        }
    }
    out
}

fn gather(
    chunks: Vec<Vec<(MultiIndex, Vec<ExpMonomial>)>>,
) -> BTreeMap<MultiIndex, Vec<ExpMonomial>> {
    let mut raw: BTreeMap<MultiIndex, Vec<ExpMonomial>> = BTreeMap::new();
    for chunk in chunks {
        for (idx, terms) in chunk {
            raw.entry(idx).or_default().extend(terms);
        }
    }
    raw
}

/// `{F, G}`.
pub fn poly_poisson(f: &PolyXY, g: &PolyXY) -> Result<PolyXY> {
    f.poisson(g)
}

/// `(d/dt + sum_l lambda_l (x_l d/dx_l - y_l d/dy_l)) chi`, i.e. coefficient
/// `(alpha, beta)` maps to `c' + U c` with `U = (alpha - beta) . lambda`.
pub fn lie_h(chi: &PolyXY, lambda: &[Complex64]) -> Result<PolyXY> {
    if lambda.len() != chi.n() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has length {}, series has n = {}",
            lambda.len(),
            chi.n()
        )));
    }
    let raw = chi
        .iter()
        .map(|(idx, c)| {
            let u = idx.shift(lambda);
            let mut terms = c.derivative_terms();
            terms.extend(
                c.terms()
                    .iter()
                    .map(|m| ExpMonomial::new(m.coeff * u, m.power, m.rate)),
            );
            (idx.clone(), terms)
        })
        .collect();
    Ok(PolyXY::from_raw(chi.n(), chi.n_trunc(), raw))
}

/// `[F, L F, L^2 F, ...]` with `L = {., chi}`, up to the first vanishing power.
///
/// Requires every term of `chi` to have degree `>= 3` so each application
/// raises the minimum degree and the sequence ends within `n_trunc` steps.
pub fn lie_powers(f: &PolyXY, chi: &PolyXY) -> Result<Vec<PolyXY>> {
    f.check_compatible(chi)?;
    if let Some(idx) = chi.indices().find(|i| i.degree() < 3) {
        return Err(Error::NonterminatingSeries {
            degree: idx.degree(),
        });
    }
    let mut powers = vec![f.clone()];
    if chi.is_zero() {
        return Ok(powers);
    }
    loop {
        let next = powers.last().expect("nonempty").poisson(chi)?;
        if next.is_zero() {
            break;
        }
        powers.push(next);
    }
    Ok(powers)
}

/// `exp(L_chi) F = sum_s (1/s!) {...{F, chi}..., chi}`.
pub fn lie_transform(f: &PolyXY, chi: &PolyXY) -> Result<PolyXY> {
    let powers = lie_powers(f, chi)?;
    let mut inv_fact = 1.0;
    let weighted: Vec<(Complex64, &PolyXY)> = powers
        .iter()
        .enumerate()
        .map(|(s, p)| {
            if s > 0 {
                inv_fact /= s as f64;
            }
            (Complex64::new(inv_fact, 0.0), p)
        })
        .collect();
    PolyXY::linear_combination(&weighted)
}
