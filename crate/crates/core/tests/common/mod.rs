#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use strongnf::{ExpMonomial, MultiIndex, PolyXY, TimeCoeff};

pub fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `sum |c| t^k e^{Re mu t}`, a majorant of `|f(t)|` used to scale tolerances.
pub fn abs_eval(f: &TimeCoeff, t: f64) -> f64 {
    f.terms()
        .iter()
        .map(|m| m.coeff.norm() * t.powi(m.power as i32) * (m.rate.re * t).exp())
        .sum()
}

pub fn monomial(
    re_range: std::ops::Range<f64>,
    max_power: u32,
) -> impl Strategy<Value = ExpMonomial> {
    (
        -1.0..1.0f64,
        -1.0..1.0f64,
        0..=max_power,
        re_range,
        -1.0..1.0f64,
    )
        .prop_map(|(cr, ci, k, mr, mi)| {
            ExpMonomial::new(Complex64::new(cr, ci), k, Complex64::new(mr, mi))
        })
}

pub fn time_coeff(
    re_range: std::ops::Range<f64>,
    max_power: u32,
) -> impl Strategy<Value = TimeCoeff> {
    prop::collection::vec(monomial(re_range, max_power), 1..4).prop_map(TimeCoeff::from_terms)
}

/// Coefficient with `|f(t)| <= M e^{-a t}`: constants at rate exactly `-a`
/// or strictly faster terms.
pub fn decaying_coeff(a: f64) -> impl Strategy<Value = TimeCoeff> {
    let strict = monomial(-2.0..(-a - 0.1), 2);
    let edge = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(move |(cr, ci, mi)| {
        ExpMonomial::new(Complex64::new(cr, ci), 0, Complex64::new(-a, mi))
    });
    prop::collection::vec(prop_oneof![strict, edge], 1..3).prop_map(TimeCoeff::from_terms)
}

/// Bounded coefficient: oscillating constants plus decaying terms.
pub fn bounded_coeff() -> impl Strategy<Value = TimeCoeff> {
    let osc = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(cr, ci, mi)| {
        ExpMonomial::new(Complex64::new(cr, ci), 0, Complex64::new(0.0, mi))
    });
    prop::collection::vec(prop_oneof![osc, monomial(-2.0..-0.2, 2)], 1..3)
        .prop_map(TimeCoeff::from_terms)
}

/// Index with `|alpha| >= 2` and `|beta| = 1` (linear in `y`).
pub fn ly_index(n: usize, max_alpha: u32) -> impl Strategy<Value = MultiIndex> {
    (prop::collection::vec(0..=max_alpha, n), 0..n)
        .prop_filter("needs |alpha| >= 2", |(a, _)| a.iter().sum::<u32>() >= 2)
        .prop_map(move |(a, l)| {
            let mut b = vec![0; n];
            b[l] = 1;
            MultiIndex::new(a, b).unwrap()
        })
}

/// Index in `Gamma`: `|alpha| >= 2`, `|beta| >= 1`.
pub fn gamma_index(n: usize, max_alpha: u32, max_beta: u32) -> impl Strategy<Value = MultiIndex> {
    (
        prop::collection::vec(0..=max_alpha, n),
        prop::collection::vec(0..=max_beta, n),
    )
        .prop_filter("needs Gamma support", |(a, b)| {
            a.iter().sum::<u32>() >= 2 && b.iter().sum::<u32>() >= 1
        })
        .prop_map(|(a, b)| MultiIndex::new(a, b).unwrap())
}

pub fn any_index(n: usize, max_each: u32) -> impl Strategy<Value = MultiIndex> {
    (
        prop::collection::vec(0..=max_each, n),
        prop::collection::vec(0..=max_each, n),
    )
        .prop_map(|(a, b)| MultiIndex::new(a, b).unwrap())
}

pub fn poly<S, C>(
    n: usize,
    n_trunc: u32,
    index: S,
    coeff: C,
    max_terms: usize,
) -> impl Strategy<Value = PolyXY>
where
    S: Strategy<Value = MultiIndex>,
    C: Strategy<Value = TimeCoeff>,
{
    prop::collection::vec((index, coeff), 1..=max_terms)
        .prop_map(move |terms| PolyXY::from_terms(n, n_trunc, terms).unwrap())
}

/// Coefficientwise comparison at sample times, scaled by `scale(idx, t)`.
pub fn assert_poly_close(
    a: &PolyXY,
    b: &PolyXY,
    times: &[f64],
    rel: f64,
    scale: f64,
) -> Result<(), TestCaseError> {
    let diff = a.sub(b).unwrap();
    for (idx, c) in diff.iter() {
        for &t in times {
            let v = c.eval(t).norm();
            prop_assert!(
                v <= rel * scale,
                "coefficient {} differs by {:e} at t = {}",
                idx,
                v,
                t
            );
        }
    }
    Ok(())
}

pub fn poly_magnitude(p: &PolyXY, t: f64) -> f64 {
    p.iter().map(|(_, c)| abs_eval(c, t)).sum()
}
