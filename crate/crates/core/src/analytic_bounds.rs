//! Counting inequalities over `N^m`, the constant `C(m, mu)`, and the
//! Lie-operator norm bound, each with a brute-force oracle.
//!
//! The oracles regroup lattice sums by total degree,
//! `sum_{|nu| >= N} |nu|^mu rho^{|nu|} = sum_{l >= N} binom(l+m-1, m-1) l^mu rho^l`,
//! sum up to a cutoff and certify the dropped tail with a geometric majorant.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::polyalg::PolyXY;

/// Relative size allowed for the certified tail of an oracle sum.
pub const ORACLE_TAIL_REL: f64 = 1e-12;

/// `C(m, mu) = e^{4m+mu-1} (m+mu)^{m+mu} / (m-1)!`.
pub fn c_constant(m: u32, mu: f64) -> f64 {
    let mf = m as f64;
    let fact: f64 = (1..m).map(f64::from).product();
    (4.0 * mf + mu - 1.0).exp() * (mf + mu).powf(mf + mu) / fact
}

/// Right-hand side of `sum_{|nu| >= N} R^{|nu|} <= 2m e^{3m-3} R^{3N/4}`, valid for `R <= e^{-4}`.
pub fn bound_tail_sum(m: u32, n_min: u32, r: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::DomainError(format!("m = {m} < 2")));
    }
    if !(0.0..=(-4.0f64).exp()).contains(&r) {
        return Err(Error::DomainError(format!("R = {r} outside [0, e^-4]")));
    }
    let mf = m as f64;
    Ok(2.0 * mf * (3.0 * mf - 3.0).exp() * r.powf(0.75 * n_min as f64))
}

/// Right-hand side of `sum_nu |nu|^mu (1-delta)^{|nu|} <= C(m,mu) delta^{-m-mu-1}`, for `0 < delta <= 1/2`.
pub fn bound_weighted_sum(m: u32, mu: f64, delta: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::DomainError(format!("m = {m} < 2")));
    }
    if !(mu >= 0.0) {
        return Err(Error::DomainError(format!("mu = {mu} < 0")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::DomainError(format!(
            "delta = {delta} outside (0, 1/2]"
        )));
    }
    Ok(c_constant(m, mu) * delta.powf(-(m as f64) - mu - 1.0))
}

/// `e^{-2} s! [e^2 (R d)^{-2} |G|]^s |F|`, the bound on `|L_G^s F|` at radius
/// `(1 - 2d) R` in terms of norms at `(1 - d) R`.
///
/// At `s = 0` this returns `e^{-2} |F|` as printed, although `|F|` itself is
/// the trivial (and weaker) statement there.
pub fn lie_bound(s: u32, norm_g: f64, norm_f: f64, r_tilde: f64, d_tilde: f64) -> Result<f64> {
    if !(d_tilde > 0.0 && d_tilde <= 0.25) {
        return Err(Error::DomainError(format!(
            "d = {d_tilde} outside (0, 1/4]"
        )));
    }
    if !(r_tilde > 0.0) {
        return Err(Error::DomainError(format!(
            "R = {r_tilde} must be positive"
        )));
    }
    let fact: f64 = (1..=s).map(f64::from).product();
    let base = E * E * (r_tilde * d_tilde).powi(-2) * norm_g;
    Ok((-2.0f64).exp() * fact * base.powi(s as i32) * norm_f)
}

fn lattice_count(m: u32, l: u64) -> f64 {
    (1..m).map(|j| (l + j as u64) as f64 / j as f64).product()
}

fn graded_term(m: u32, mu: f64, rho: f64, l: u64) -> f64 {
    lattice_count(m, l) * (l as f64).powf(mu) * rho.powi(l as i32)
}

/// `sum_{l=n_min}^{cutoff} binom(l+m-1, m-1) l^mu rho^l` plus a certified
/// majorant of the rest.
fn graded_sum(m: u32, mu: f64, rho: f64, n_min: u64, cutoff: u64) -> Result<f64> {
    if n_min > cutoff {
        return Err(Error::CutoffInsufficient(format!(
            "start {n_min} beyond cutoff {cutoff}"
        )));
    }
    let partial: f64 = (n_min..=cutoff).map(|l| graded_term(m, mu, rho, l)).sum();
    // t_{l+1}/t_l decreases in l, so beyond the cutoff the tail is geometric.
    let next = cutoff + 1;
    let ratio = (next + m as u64 - 1) as f64 / next as f64
        * ((next as f64 + 1.0) / next as f64).powf(mu)
        * rho;
    let first_dropped = graded_term(m, mu, rho, next);
    if first_dropped == 0.0 {
        return Ok(partial);
    }
    if ratio >= 1.0 {
        return Err(Error::CutoffInsufficient(format!(
            "term ratio {ratio} >= 1 at cutoff {cutoff}"
        )));
    }
    let tail = first_dropped / (1.0 - ratio);
    if tail > ORACLE_TAIL_REL * partial {
        return Err(Error::CutoffInsufficient(format!(
            "tail majorant {tail:e} vs partial sum {partial:e} at cutoff {cutoff}"
        )));
    }
    Ok(partial + tail)
}

/// Ground truth for `sum_{nu in N^m, |nu| >= N} R^{|nu|}`.
pub fn oracle_tail_sum(m: u32, n_min: u32, r: f64, cutoff: u64) -> Result<f64> {
    graded_sum(m, 0.0, r, n_min as u64, cutoff)
}

/// Ground truth for `sum_{nu in N^m} |nu|^mu (1-delta)^{|nu|}`.
pub fn oracle_weighted_sum(m: u32, mu: f64, delta: f64, cutoff: u64) -> Result<f64> {
    graded_sum(m, mu, 1.0 - delta, 0, cutoff)
}

/// Doubling search for a cutoff the tail certificate accepts.
fn auto_cutoff<F: Fn(u64) -> Result<f64>>(start: u64, eval: F) -> Result<f64> {
    let mut cutoff = start.max(16);
    loop {
        match eval(cutoff) {
            Err(Error::CutoffInsufficient(_)) if cutoff < 1 << 20 => cutoff *= 2,
            other => return other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundParams {
    TailSum {
        m: u32,
        n_min: u32,
        r: f64,
    },
    WeightedSum {
        m: u32,
        mu: f64,
        delta: f64,
    },
    LieOperator {
        s: u32,
        r_tilde: f64,
        d_tilde: f64,
        norm_g: f64,
        norm_f: f64,
    },
}

/// Oracle value against the bound it should respect.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheckResult {
    pub bound_value: f64,
    pub oracle_value: f64,
    pub satisfied: bool,
    pub parameters: BoundParams,
}

impl BoundCheckResult {
    fn new(bound_value: f64, oracle_value: f64, parameters: BoundParams) -> Self {
        Self {
            bound_value,
            oracle_value,
            satisfied: oracle_value <= bound_value,
            parameters,
        }
    }
}

pub fn check_tail_sum(m: u32, n_min: u32, r: f64) -> Result<BoundCheckResult> {
    let bound = bound_tail_sum(m, n_min, r)?;
    let oracle = auto_cutoff(n_min as u64 + 16, |c| oracle_tail_sum(m, n_min, r, c))?;
    Ok(BoundCheckResult::new(
        bound,
        oracle,
        BoundParams::TailSum { m, n_min, r },
    ))
}

pub fn check_weighted_sum(m: u32, mu: f64, delta: f64) -> Result<BoundCheckResult> {
    let bound = bound_weighted_sum(m, mu, delta)?;
    let oracle = auto_cutoff(64, |c| oracle_weighted_sum(m, mu, delta, c))?;
    Ok(BoundCheckResult::new(
        bound,
        oracle,
        BoundParams::WeightedSum { m, mu, delta },
    ))
}

/// Exact `|L_G^s F|` at `(1 - 2d) R` against [`lie_bound`] built from norms at `(1 - d) R`.
///
/// `F` and `G` must carry a truncation degree high enough that no term of
/// `L_G^s F` is dropped; coefficients are measured by their sup over `t >= 0`.
pub fn check_lie_bound(
    f: &PolyXY,
    g: &PolyXY,
    s: u32,
    r_tilde: f64,
    d_tilde: f64,
) -> Result<BoundCheckResult> {
    let outer = (1.0 - d_tilde) * r_tilde;
    let inner = (1.0 - 2.0 * d_tilde) * r_tilde;
    let norm_f = f.taylor_norm(outer, 0.0)?;
    let norm_g = g.taylor_norm(outer, 0.0)?;
    let bound = lie_bound(s, norm_g, norm_f, r_tilde, d_tilde)?;
    let mut power = f.clone();
    for _ in 0..s {
        power = power.poisson(g)?;
    }
    let exact = power.taylor_norm(inner, 0.0)?;
    Ok(BoundCheckResult::new(
        bound,
        exact,
        BoundParams::LieOperator {
            s,
            r_tilde,
            d_tilde,
            norm_g,
            norm_f,
        },
    ))
}

/// `m in {2,3,4}`, `N in {0,1,2,5,8}`, `R in {e^-4, e^-5, 0.01}`.
pub fn default_tail_grid() -> Vec<(u32, u32, f64)> {
    let mut grid = Vec::new();
    for m in [2, 3, 4] {
        for n_min in [0, 1, 2, 5, 8] {
            for r in [(-4.0f64).exp(), (-5.0f64).exp(), 0.01] {
                grid.push((m, n_min, r));
            }
        }
    }
    grid
}

/// `m in {2,3,4}`, `mu in {0,1,3}`, `delta in {0.5, 0.25, 0.1}`.
pub fn default_weighted_grid() -> Vec<(u32, f64, f64)> {
    let mut grid = Vec::new();
    for m in [2, 3, 4] {
        for mu in [0.0, 1.0, 3.0] {
            for delta in [0.5, 0.25, 0.1] {
                grid.push((m, mu, delta));
            }
        }
    }
    grid
}
