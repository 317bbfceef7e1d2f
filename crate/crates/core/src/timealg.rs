//! Exponential-polynomial time coefficients `sum_i c_i t^k_i e^(mu_i t)`.
//!
//! The class is closed under products, time derivatives and the weighted
//! integrals that solve the coefficient ODE `c' + U c = f`, so every Taylor
//! coefficient produced by the normalization stays in closed form.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance on complex rate distance for merging terms and for
/// detecting resonance `mu + U = 0`.
pub const RATE_MERGE_TOL: f64 = 1e-12;

/// Terms with `|c| < PRUNE_REL * max|c|` are dropped on canonicalization.
/// The scale is taken over the raw terms before merging, so cancellations
/// between operands are pruned relative to the operands' size.
pub const PRUNE_REL: f64 = 1e-14;

/// A term of [`TimeCoeff::improper_int`] must satisfy `Re(mu + U) < -INTEGRABILITY_MARGIN`.
pub const INTEGRABILITY_MARGIN: f64 = 1e-12;

/// `coeff * t^power * e^(rate * t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpMonomial {
    pub coeff: Complex64,
    pub power: u32,
    pub rate: Complex64,
}

impl ExpMonomial {
    pub fn new(coeff: Complex64, power: u32, rate: Complex64) -> Self {
        Self { coeff, power, rate }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeff * t.powi(self.power as i32) * (self.rate * t).exp()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.rate
            .re
            .total_cmp(&other.rate.re)
            .then(self.rate.im.total_cmp(&other.rate.im))
            .then(self.power.cmp(&other.power))
    }
}

/// Finite sum of [`ExpMonomial`]s in canonical form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeCoeff {
    terms: Vec<ExpMonomial>,
}

impl TimeCoeff {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(c, 0, Complex64::new(0.0, 0.0))
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn monomial(coeff: Complex64, power: u32, rate: Complex64) -> Self {
        Self::from_terms(vec![ExpMonomial::new(coeff, power, rate)])
    }

    /// `c e^(mu t)` with real `c` and `mu`.
    pub fn exp(c: f64, mu: f64) -> Self {
        Self::monomial(Complex64::new(c, 0.0), 0, Complex64::new(mu, 0.0))
    }

    /// Canonicalize an arbitrary list of terms: merge equal keys, prune, sort.
    pub fn from_terms(raw: Vec<ExpMonomial>) -> Self {
        Self {
            terms: canonicalize(raw),
        }
    }

    pub fn terms(&self) -> &[ExpMonomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms.iter().map(|m| m.eval(t)).sum()
    }

    /// Largest `|coeff|`, zero for the empty sum.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff.norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|m| ExpMonomial::new(m.coeff * s, m.power, m.rate))
                .collect(),
        )
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Time derivative, termwise: `c t^k e^(mu t) -> c mu t^k e^(mu t) + c k t^(k-1) e^(mu t)`.
    pub fn derivative(&self) -> Self {
        Self::from_terms(self.derivative_terms())
    }

    /// Raw (uncanonicalized) terms of the derivative.
    pub(crate) fn derivative_terms(&self) -> Vec<ExpMonomial> {
        let mut raw = Vec::with_capacity(2 * self.terms.len());
        for m in &self.terms {
            raw.push(ExpMonomial::new(m.coeff * m.rate, m.power, m.rate));
            if m.power > 0 {
                raw.push(ExpMonomial::new(
                    m.coeff * m.power as f64,
                    m.power - 1,
                    m.rate,
                ));
            }
        }
        raw
    }

    /// `g(t) = e^(-U t) * int_0^t e^(U s) f(s) ds`, the solution of
    /// `g' + U g = f` with `g(0) = 0`.
    pub fn weighted_defint(&self, shift: Complex64) -> Self {
        let mut raw = Vec::new();
        for m in &self.terms {
            let lambda = m.rate + shift;
            if lambda.norm() <= RATE_MERGE_TOL {
                raw.push(ExpMonomial::new(
                    m.coeff / (m.power as f64 + 1.0),
                    m.power + 1,
                    m.rate,
                ));
                continue;
            }
            // int_0^t s^k e^(lambda s) ds
            //   = e^(lambda t) sum_j (-1)^j k!/(k-j)! t^(k-j) / lambda^(j+1) + k!/(-lambda)^(k+1)
            let k = m.power;
            let mut falling = 1.0;
            let mut inv_pow = lambda.inv();
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                raw.push(ExpMonomial::new(
                    m.coeff * (sign * falling) * inv_pow,
                    k - j,
                    m.rate,
                ));
                falling *= (k - j) as f64;
                inv_pow /= lambda;
            }
            raw.push(ExpMonomial::new(
                m.coeff * laplace_moment(k, lambda),
                0,
                -shift,
            ));
        }
        Self::from_terms(raw)
    }

    /// `int_0^inf e^(U s) f(s) ds`, requiring every term to be strictly integrable.
    pub fn improper_int(&self, shift: Complex64) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for m in &self.terms {
            let lambda = m.rate + shift;
            if lambda.re >= -INTEGRABILITY_MARGIN {
                return Err(Error::DivergentIntegral {
                    rate: m.rate,
                    shift,
                });
            }
            total += m.coeff * laplace_moment(m.power, lambda);
        }
        Ok(total)
    }

    /// An `M` with `|f(t)| <= M e^(-a t)` for all `t >= 0`.
    ///
    /// Sums the per-term maxima of `|c| t^k e^(-b t)`, attained at `t = k/b`;
    /// conservative but cheap.
    pub fn decay_bound(&self, a: f64) -> Result<f64> {
        let mut bound = 0.0;
        for m in &self.terms {
            let b = -(m.rate.re + a);
            let c = m.coeff.norm();
            if b < -RATE_MERGE_TOL || (b <= RATE_MERGE_TOL && m.power > 0) {
                return Err(Error::UnboundedGrowth {
                    rate: m.rate,
                    power: m.power,
                    decay: a,
                });
            }
            if m.power == 0 {
                bound += c;
            } else {
                let k = m.power as f64;
                bound += c * (k / b).powf(k) * (-k).exp();
            }
        }
        Ok(bound)
    }

    /// Largest real part of any rate; `-inf` for the zero coefficient.
    pub fn max_rate_re(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| m.rate.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `int_0^inf s^k e^(lambda s) ds = k! / (-lambda)^(k+1)` for `Re lambda < 0`.
///
/// Also the constant of integration in [`TimeCoeff::weighted_defint`]; sharing
/// the formula makes the growing `e^(-U t)` modes cancel exactly when the
/// homological solver picks `c(0) = -int_0^inf`.
fn laplace_moment(k: u32, lambda: Complex64) -> Complex64 {
    let fact: f64 = (1..=k).map(f64::from).product();
    fact / (-lambda).powu(k + 1)
}

fn canonicalize(mut raw: Vec<ExpMonomial>) -> Vec<ExpMonomial> {
    let scale = raw.iter().map(|m| m.coeff.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    raw.sort_by(|a, b| {
        a.power
            .cmp(&b.power)
            .then(a.rate.re.total_cmp(&b.rate.re))
            .then(a.rate.im.total_cmp(&b.rate.im))
    });
    let mut merged: Vec<ExpMonomial> = Vec::with_capacity(raw.len());
    for m in raw {
        let mut hit = None;
        for (i, prev) in merged.iter().enumerate().rev() {
            if prev.power != m.power || m.rate.re - prev.rate.re > RATE_MERGE_TOL {
                break;
            }
            if (prev.rate - m.rate).norm() <= RATE_MERGE_TOL {
                hit = Some(i);
                break;
            }
        }
        match hit {
            Some(i) => merged[i].coeff += m.coeff,
            None => merged.push(m),
        }
    }
    let floor = PRUNE_REL * scale;
    merged.retain(|m| m.coeff.norm() >= floor && m.coeff.norm() > 0.0);
    merged.sort_by(ExpMonomial::key_cmp);
    merged
}

impl Add for &TimeCoeff {
    type Output = TimeCoeff;
    fn add(self, rhs: &TimeCoeff) -> TimeCoeff {
        let mut raw = self.terms.clone();
        raw.extend_from_slice(&rhs.terms);
        TimeCoeff::from_terms(raw)
    }
}

impl Add for TimeCoeff {
    type Output = TimeCoeff;
    fn add(mut self, rhs: TimeCoeff) -> TimeCoeff {
        self.terms.extend(rhs.terms);
        TimeCoeff::from_terms(self.terms)
    }
}

impl Neg for &TimeCoeff {
    type Output = TimeCoeff;
    fn neg(self) -> TimeCoeff {
        TimeCoeff {
            terms: self
                .terms
                .iter()
                .map(|m| ExpMonomial::new(-m.coeff, m.power, m.rate))
                .collect(),
        }
    }
}

impl Neg for TimeCoeff {
    type Output = TimeCoeff;
    fn neg(self) -> TimeCoeff {
        -&self
    }
}

impl Sub for &TimeCoeff {
    type Output = TimeCoeff;
    fn sub(self, rhs: &TimeCoeff) -> TimeCoeff {
        self + &(-rhs)
    }
}

impl Mul for &TimeCoeff {
    type Output = TimeCoeff;
    fn mul(self, rhs: &TimeCoeff) -> TimeCoeff {
        let mut raw = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                raw.push(ExpMonomial::new(
                    a.coeff * b.coeff,
                    a.power + b.power,
                    a.rate + b.rate,
                ));
            }
        }
        TimeCoeff::from_terms(raw)
    }
}

impl fmt::Display for TimeCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, m) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", m.coeff)?;
            if m.power > 0 {
                write!(f, "*t^{}", m.power)?;
            }
            if m.rate != Complex64::new(0.0, 0.0) {
                write!(f, "*exp(({})t)", m.rate)?;
            }
        }
        Ok(())
    }
}
