//! From ODE to Hamiltonian and back: builds `H` for `x' = Lambda x + g(x, t)`,
//! extracts the normalizing map `x = M(xi, t)` from a transform chain, and
//! checks the resulting closed-form solution against a fixed-step integrator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::normalizer::{ExtendedHamiltonian, TransformChain};
use crate::par;
use crate::polyalg::{lie_transform, MultiIndex, PolyXY};
use crate::timealg::TimeCoeff;

/// Relative two-resolution discrepancy above which the integrator refuses.
pub const RICHARDSON_TOL: f64 = 1e-6;
pub const NEWTON_TOL: f64 = 1e-13;
pub const NEWTON_MAX_ITER: usize = 50;
pub const MIN_STEPS: usize = 16;

fn sup_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `x_l' = lambda_l x_l + g_l(x, t)` with `Lambda` diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSystem {
    lambda: Vec<Complex64>,
    rhs: Vec<PolyXY>,
}

impl OdeSystem {
    /// `rhs[l]` is `g_l`; it must be `y`-free with every term of degree `>= 2`.
    pub fn new(lambda: Vec<Complex64>, rhs: Vec<PolyXY>) -> Result<Self> {
        let n = lambda.len();
        if n == 0 {
            return Err(Error::InvalidSystem("empty system".into()));
        }
        if rhs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues but {} right-hand sides",
                n,
                rhs.len()
            )));
        }
        if let Some(l) = lambda.iter().position(|l| l.re == 0.0) {
            return Err(Error::InvalidSystem(format!(
                "lambda_{l} = {} has zero real part",
                lambda[l]
            )));
        }
        for (l, g) in rhs.iter().enumerate() {
            if g.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "g_{l} has n = {}, expected {n}",
                    g.n()
                )));
            }
            if let Some(idx) = g.indices().find(|i| i.beta_degree() > 0) {
                return Err(Error::InvalidSystem(format!(
                    "g_{l} depends on y through {idx}"
                )));
            }
            if let Some(idx) = g.indices().find(|i| i.degree() < 2) {
                return Err(Error::InvalidSystem(format!(
                    "g_{l} has a term {idx} of degree {} < 2",
                    idx.degree()
                )));
            }
        }
        Ok(Self { lambda, rhs })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn rhs(&self) -> &[PolyXY] {
        &self.rhs
    }

    pub fn vector_field(&self, x: &[Complex64], t: f64) -> Vec<Complex64> {
        let zeros = vec![Complex64::new(0.0, 0.0); self.n()];
        self.lambda
            .iter()
            .zip(&self.rhs)
            .zip(x)
            .map(|((l, g), xl)| l * xl + g.eval(x, &zeros, t))
            .collect()
    }
}

/// `H = eta + sum_l lambda_l x_l y_l + sum_l y_l g_l(x, t)`, truncated at `n_trunc`.
pub fn build_hamiltonian_from_ode(sys: &OdeSystem, n_trunc: u32) -> Result<ExtendedHamiltonian> {
    let n = sys.n();
    let mut terms: Vec<(MultiIndex, TimeCoeff)> = Vec::new();
    for (l, g) in sys.rhs.iter().enumerate() {
        for (idx, c) in g.iter() {
            let mut beta = vec![0; n];
            beta[l] = 1;
            terms.push((MultiIndex::new(idx.alpha().to_vec(), beta)?, c.clone()));
        }
    }
    let f = PolyXY::from_terms(n, n_trunc, terms)?;
    ExtendedHamiltonian::new(sys.lambda.clone(), f)
}

/// `x = M(xi, t)`, one `y`-free series per component, with cached Jacobian entries.
#[derive(Clone, Debug, PartialEq)]
pub struct XMap {
    components: Vec<PolyXY>,
    jacobian: Vec<Vec<PolyXY>>,
    lambda: Vec<Complex64>,
}

impl XMap {
    pub fn new(components: Vec<PolyXY>, lambda: Vec<Complex64>) -> Result<Self> {
        let n = lambda.len();
        if components.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} components for n = {n}",
                components.len()
            )));
        }
        for c in &components {
            if c.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "component has n = {}",
                    c.n()
                )));
            }
            if let Some(idx) = c.indices().find(|i| i.beta_degree() > 0) {
                return Err(Error::NotLy(idx.clone()));
            }
        }
        let jacobian = components
            .iter()
            .map(|c| (0..n).map(|k| c.partial_x(k)).collect())
            .collect();
        Ok(Self {
            components,
            jacobian,
            lambda,
        })
    }

    pub fn identity(lambda: Vec<Complex64>, n_trunc: u32) -> Self {
        let n = lambda.len();
        let comps = (0..n).map(|l| PolyXY::coord_x(n, n_trunc, l)).collect();
        Self::new(comps, lambda).expect("coordinate functions are y-free")
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn components(&self) -> &[PolyXY] {
        &self.components
    }

    pub fn is_y_free(&self) -> bool {
        self.components.iter().all(PolyXY::is_y_free)
    }

    pub fn eval(&self, xi: &[Complex64], t: f64) -> Vec<Complex64> {
        let zeros = vec![Complex64::new(0.0, 0.0); self.n()];
        self.components
            .iter()
            .map(|c| c.eval(xi, &zeros, t))
            .collect()
    }

    pub fn jacobian(&self, xi: &[Complex64], t: f64) -> DMatrix<Complex64> {
        let n = self.n();
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        DMatrix::from_fn(n, n, |l, k| self.jacobian[l][k].eval(xi, &zeros, t))
    }

    /// Componentwise `self - other`.
    pub fn difference(&self, other: &XMap) -> Result<Vec<PolyXY>> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch(
                "maps of different dimension".into(),
            ));
        }
        let trunc = self.components[0]
            .n_trunc()
            .max(other.components[0].n_trunc());
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.with_trunc(trunc).sub(&b.with_trunc(trunc)))
            .collect()
    }
}

/// `x_l -> exp(L_J) ... exp(L_1) exp(L_0) x_l`, so `x = M(xi, t)` in terms of
/// the normalized coordinates.
pub fn extract_x_map(chain: &TransformChain) -> Result<XMap> {
    let n = chain.lambda.len();
    for g in &chain.generators {
        if let Some(idx) = g.chi.first_not_ly() {
            return Err(Error::NotLy(idx.clone()));
        }
    }
    let coords: Vec<usize> = (0..n).collect();
    let components = par::try_map(&coords, |&l| {
        let mut x = PolyXY::coord_x(n, chain.n_trunc, l);
        for g in &chain.generators {
            x = lie_transform(&x, &g.chi)?;
        }
        Ok(x)
    })?;
    XMap::new(components, chain.lambda.clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    /// Sup of `|fine - coarse| / 15` over the grid, when produced by the integrator.
    pub richardson_estimate: Option<f64>,
}

impl Trajectory {
    /// `t, re_1, im_1, ..., re_n, im_n` per row.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for l in 1..=n {
            out.push_str(&format!(",re_x{l},im_x{l}"));
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:?}"));
            for z in x {
                out.push_str(&format!(",{:?},{:?}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}

/// `t_k = T k / steps` for `k = 0..=steps`.
pub fn uniform_grid(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| t_end * k as f64 / steps as f64)
        .collect()
}

fn rk4_step(sys: &OdeSystem, x: &[Complex64], t: f64, h: f64) -> Vec<Complex64> {
    let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
        a.iter().zip(b).map(|(ai, bi)| ai + bi * s).collect()
    };
    let k1 = sys.vector_field(x, t);
    let k2 = sys.vector_field(&axpy(x, h / 2.0, &k1), t + h / 2.0);
    let k3 = sys.vector_field(&axpy(x, h / 2.0, &k2), t + h / 2.0);
    let k4 = sys.vector_field(&axpy(x, h, &k3), t + h);
    (0..x.len())
        .map(|i| x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect()
}

fn rk4_run(
    sys: &OdeSystem,
    x0: &[Complex64],
    t_end: f64,
    steps: usize,
    stride: usize,
) -> Vec<Vec<Complex64>> {
    let h = t_end / steps as f64;
    let mut x = x0.to_vec();
    let mut out = vec![x.clone()];
    for k in 0..steps {
        x = rk4_step(sys, &x, t_end * k as f64 / steps as f64, h);
        if (k + 1) % stride == 0 {
            out.push(x.clone());
        }
    }
    out
}

/// Classical RK4 on `steps` uniform steps, repeated at `2 * steps`; the fine
/// run is returned on the coarse grid.
pub fn integrate_ode(
    sys: &OdeSystem,
    x0: &[Complex64],
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidConfig(format!(
            "steps = {steps} < {MIN_STEPS}"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "T = {t_end} must be finite and >= 0"
        )));
    }
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, system has n = {}",
            x0.len(),
            sys.n()
        )));
    }
    let coarse = rk4_run(sys, x0, t_end, steps, 1);
    let fine = rk4_run(sys, x0, t_end, 2 * steps, 2);
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for (c, f) in coarse.iter().zip(&fine) {
        let diff: Vec<Complex64> = c.iter().zip(f).map(|(a, b)| a - b).collect();
        let d = sup_norm(&diff);
        if !d.is_finite() {
            return Err(Error::StepTooLarge {
                discrepancy: f64::INFINITY,
            });
        }
        worst_abs = worst_abs.max(d);
        if d > 0.0 {
            worst_rel = worst_rel.max(d / sup_norm(f).max(f64::MIN_POSITIVE));
        }
    }
    if worst_rel > RICHARDSON_TOL {
        return Err(Error::StepTooLarge {
            discrepancy: worst_rel,
        });
    }
    Ok(Trajectory {
        times: uniform_grid(t_end, steps),
        states: fine,
        richardson_estimate: Some(worst_abs / 15.0),
    })
}

/// Newton iteration for `M(xi, t) = x0` from `xi = x0`.
pub fn invert_x_map(map: &XMap, x0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    if x0.len() != map.n() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, map has n = {}",
            x0.len(),
            map.n()
        )));
    }
    let target = NEWTON_TOL * sup_norm(x0);
    let mut xi = x0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..=NEWTON_MAX_ITER {
        let r: Vec<Complex64> = map
            .eval(&xi, t)
            .iter()
            .zip(x0)
            .map(|(m, x)| m - x)
            .collect();
        residual = sup_norm(&r);
        if residual <= target || residual == 0.0 {
            return Ok(xi);
        }
        if !residual.is_finite() {
            break;
        }
        let step = map
            .jacobian(&xi, t)
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or(Error::NewtonDiverged {
                iterations: NEWTON_MAX_ITER,
                residual,
            })?;
        for (x, s) in xi.iter_mut().zip(step.iter()) {
            *x -= s;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

fn linear_flow(xi0: &[Complex64], lambda: &[Complex64], t: f64) -> Vec<Complex64> {
    xi0.iter()
        .zip(lambda)
        .map(|(x, l)| x * (l * t).exp())
        .collect()
}

/// `x(t) = M(xi_0 e^{Lambda t}, t)` with `xi_0` from inverting `M(., 0)` at `x0`.
pub fn closed_form_solution(map: &XMap, x0: &[Complex64], times: &[f64]) -> Result<Trajectory> {
    let xi0 = invert_x_map(map, x0, 0.0)?;
    let states = par::map(times, |&t| map.eval(&linear_flow(&xi0, map.lambda(), t), t));
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        richardson_estimate: None,
    })
}

/// First-order model of `closed_form(low) - closed_form(high)`.
///
/// With `T = M_high - M_low` and `delta = J(xi_0, 0)^{-1} T(xi_0, 0)`, the
/// difference is `J(xi(t), t) e^{Lambda t} delta - T(xi(t), t)` up to terms
/// quadratic in `T`. It is evaluated without subtracting O(|x0|) quantities,
/// so it resolves errors far below the rounding level of `x` itself.
pub fn truncation_defect(
    low: &XMap,
    high: &XMap,
    x0: &[Complex64],
    times: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let tail = high.difference(low)?;
    let n = low.n();
    let zeros = vec![Complex64::new(0.0, 0.0); n];
    let eval_tail = |xi: &[Complex64], t: f64| -> DVector<Complex64> {
        DVector::from_iterator(n, tail.iter().map(|p| p.eval(xi, &zeros, t)))
    };
    let xi0 = invert_x_map(high, x0, 0.0)?;
    let delta = low
        .jacobian(&xi0, 0.0)
        .lu()
        .solve(&eval_tail(&xi0, 0.0))
        .ok_or(Error::NewtonDiverged {
            iterations: 0,
            residual: f64::INFINITY,
        })?;
    Ok(par::map(times, |&t| {
        let xi = linear_flow(&xi0, low.lambda(), t);
        let growth = DVector::from_iterator(n, low.lambda().iter().map(|l| (l * t).exp()));
        let shifted = delta.component_mul(&growth);
        let d = low.jacobian(&xi, t) * shifted - eval_tail(&xi, t);
        d.iter().copied().collect()
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeError {
    pub t: f64,
    pub abs: f64,
    pub rel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub sup_abs: f64,
    pub sup_rel: f64,
    pub worst_time: f64,
    pub per_time: Vec<TimeError>,
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,abs_error,rel_error\n");
        for e in &self.per_time {
            out.push_str(&format!("{:?},{:?},{:?}\n", e.t, e.abs, e.rel));
        }
        out
    }
}

/// Sup-norm errors of `a` against the reference `b` on a shared grid.
pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<ErrorReport> {
    if a.times.len() != b.times.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} grid points",
            a.times.len(),
            b.times.len()
        )));
    }
    let mut per_time = Vec::with_capacity(a.times.len());
    for ((ta, tb), (xa, xb)) in a
        .times
        .iter()
        .zip(&b.times)
        .zip(a.states.iter().zip(&b.states))
    {
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("t = {ta} vs t = {tb}")));
        }
        if xa.len() != xb.len() {
            return Err(Error::DimensionMismatch("state dimensions differ".into()));
        }
        let diff: Vec<Complex64> = xa.iter().zip(xb).map(|(p, q)| p - q).collect();
        let abs = sup_norm(&diff);
        let scale = sup_norm(xb);
        let rel = if abs == 0.0 {
            0.0
        } else {
            abs / scale.max(f64::MIN_POSITIVE)
        };
        per_time.push(TimeError { t: *ta, abs, rel });
    }
    let worst = per_time
        .iter()
        .max_by(|p, q| p.abs.total_cmp(&q.abs))
        .map_or(0.0, |e| e.t);
    Ok(ErrorReport {
        sup_abs: per_time.iter().map(|e| e.abs).fold(0.0, f64::max),
        sup_rel: per_time.iter().map(|e| e.rel).fold(0.0, f64::max),
        worst_time: worst,
        per_time,
    })
}

/// `z = P x` for a real system `z' = A z + G(z, t)` with `A = P Lambda P^{-1}`
/// supplied already diagonalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalizedSystem {
    p: DMatrix<Complex64>,
    p_inv: DMatrix<Complex64>,
    modal: OdeSystem,
}

impl DiagonalizedSystem {
    /// `g[l]` is the `l`-th component of `G` in the `z` coordinates.
    pub fn new(p: DMatrix<Complex64>, lambda: Vec<Complex64>, g: Vec<PolyXY>) -> Result<Self> {
        let n = lambda.len();
        if p.nrows() != n || p.ncols() != n || g.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, n = {n}",
                p.nrows(),
                p.ncols()
            )));
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSystem("eigenvector matrix is singular".into()))?;
        let substituted = g
            .iter()
            .map(|gl| substitute_linear(gl, &p))
            .collect::<Result<Vec<_>>>()?;
        let modal_rhs = (0..n)
            .map(|l| {
                let weighted: Vec<(Complex64, &PolyXY)> =
                    (0..n).map(|k| (p_inv[(l, k)], &substituted[k])).collect();
                PolyXY::linear_combination(&weighted)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            p_inv,
            modal: OdeSystem::new(lambda, modal_rhs)?,
        })
    }

    pub fn modal(&self) -> &OdeSystem {
        &self.modal
    }

    pub fn to_modal(&self, z: &[Complex64]) -> Vec<Complex64> {
        (&self.p_inv * DVector::from_column_slice(z))
            .iter()
            .copied()
            .collect()
    }

    pub fn to_physical(&self, x: &[Complex64]) -> Vec<Complex64> {
        (&self.p * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect()
    }

    pub fn trajectory_to_physical(&self, traj: &Trajectory) -> Trajectory {
        Trajectory {
            times: traj.times.clone(),
            states: traj.states.iter().map(|x| self.to_physical(x)).collect(),
            richardson_estimate: traj.richardson_estimate,
        }
    }
}

/// `g(P x)` for a `y`-free series `g`.
fn substitute_linear(g: &PolyXY, p: &DMatrix<Complex64>) -> Result<PolyXY> {
    let n = g.n();
    let trunc = g.n_trunc();
    let rows: Vec<PolyXY> = (0..n)
        .map(|l| {
            let coords: Vec<PolyXY> = (0..n).map(|k| PolyXY::coord_x(n, trunc, k)).collect();
            let weighted: Vec<(Complex64, &PolyXY)> =
                (0..n).map(|k| (p[(l, k)], &coords[k])).collect();
            PolyXY::linear_combination(&weighted)
        })
        .collect::<Result<_>>()?;
    let mut acc = PolyXY::zero(n, trunc);
    for (idx, c) in g.iter() {
        let mut term = PolyXY::from_terms(n, trunc, [(MultiIndex::zero(n), c.clone())])?;
        for (l, &e) in idx.alpha().iter().enumerate() {
            for _ in 0..e {
                term = term.mul(&rows[l])?;
            }
        }
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homological::RegimeConfig;
    use crate::normalizer::{normalize, NormalizationConfig};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn x_pow(k: u32, n_trunc: u32, coeff: TimeCoeff) -> PolyXY {
        PolyXY::from_terms(
            1,
            n_trunc,
            [(MultiIndex::new(vec![k], vec![0]).unwrap(), coeff)],
        )
        .unwrap()
    }

    #[test]
    fn linear_flow_matches_exponential() {
        let sys = OdeSystem::new(vec![c(-1.0)], vec![PolyXY::zero(1, 4)]).unwrap();
        let traj = integrate_ode(&sys, &[c(0.1)], 5.0, 1024).unwrap();
        let last = traj.states.last().unwrap()[0];
        assert!((last - c(0.1 * (-5.0f64).exp())).norm() < 1e-10);
    }

    #[test]
    fn bernoulli_matches_closed_form() {
        let sys = OdeSystem::new(vec![c(-1.0)], vec![x_pow(2, 4, TimeCoeff::real(1.0))]).unwrap();
        let x0 = 0.1;
        let traj = integrate_ode(&sys, &[c(x0)], 3.0, 512).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let e = (-t).exp();
            let exact = x0 * e / (1.0 - x0 * (1.0 - e));
            assert!((x[0].re - exact).abs() < 1e-11, "t = {t}");
        }
    }

    #[test]
    fn equilibrium_stays_zero() {
        let sys = OdeSystem::new(vec![c(-1.0)], vec![x_pow(2, 4, TimeCoeff::real(1.0))]).unwrap();
        let traj = integrate_ode(&sys, &[c(0.0)], 2.0, 32).unwrap();
        assert!(traj.states.iter().all(|x| x[0] == c(0.0)));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let sys = OdeSystem::new(vec![c(-1.0)], vec![x_pow(2, 4, TimeCoeff::real(1.0))]).unwrap();
        assert!(matches!(
            integrate_ode(&sys, &[c(0.5)], 10.0, 16),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(integrate_ode(&sys, &[c(0.5)], 1.0, 8).is_err());
    }

    #[test]
    fn system_validation() {
        assert!(matches!(
            OdeSystem::new(vec![Complex64::new(0.0, 1.0)], vec![PolyXY::zero(1, 4)]),
            Err(Error::InvalidSystem(_))
        ));
        assert!(matches!(
            OdeSystem::new(vec![c(-1.0)], vec![x_pow(1, 4, TimeCoeff::real(1.0))]),
            Err(Error::InvalidSystem(_))
        ));
        let with_y = PolyXY::from_terms(
            1,
            4,
            [(
                MultiIndex::new(vec![2], vec![1]).unwrap(),
                TimeCoeff::real(1.0),
            )],
        )
        .unwrap();
        assert!(OdeSystem::new(vec![c(-1.0)], vec![with_y]).is_err());
    }

    #[test]
    fn invert_quadratic_map() {
        let comp = PolyXY::coord_x(1, 2, 0)
            .add(&x_pow(2, 2, TimeCoeff::real(1.0)))
            .unwrap();
        let map = XMap::new(vec![comp], vec![c(-1.0)]).unwrap();
        let xi = invert_x_map(&map, &[c(0.01)], 0.0).unwrap();
        let exact = (-1.0 + (1.0f64 + 0.04).sqrt()) / 2.0;
        assert!((xi[0].re - exact).abs() < 1e-15);
        assert!((exact - 0.009_901_951_359_278_4).abs() < 1e-15);
        assert_eq!(invert_x_map(&map, &[c(0.0)], 0.0).unwrap(), vec![c(0.0)]);
    }

    #[test]
    fn empty_chain_gives_linear_flow() {
        let map = XMap::identity(vec![c(-1.0)], 5);
        let times = uniform_grid(2.0, 4);
        let traj = closed_form_solution(&map, &[c(0.2)], &times).unwrap();
        for (t, x) in times.iter().zip(&traj.states) {
            assert!((x[0] - c(0.2 * (-t).exp())).norm() < 1e-16);
        }
    }

    #[test]
    fn single_generator_map_matches_bracket() {
        // chi = x^2 y c(t): exp(L_chi) x = x + {x, chi} = x + x^2 c(t)
        let coeff = TimeCoeff::exp(-0.75, -0.5);
        let chi = PolyXY::from_terms(
            1,
            5,
            [(MultiIndex::new(vec![2], vec![1]).unwrap(), coeff.clone())],
        )
        .unwrap();
        let x = PolyXY::coord_x(1, 5, 0);
        let direct = x.add(&x.poisson(&chi).unwrap()).unwrap();
        let expected = x.add(&x_pow(2, 5, coeff)).unwrap();
        assert_eq!(direct, expected);
        assert_eq!(
            lie_transform(&x, &chi).unwrap().with_trunc(2),
            expected.with_trunc(2)
        );
    }

    #[test]
    fn canonical_map_is_geometric_series() {
        let sys =
            OdeSystem::new(vec![c(-1.0)], vec![x_pow(2, 8, TimeCoeff::exp(1.0, -0.5))]).unwrap();
        let h = build_hamiltonian_from_ode(&sys, 8).unwrap();
        let cfg = NormalizationConfig::new(1, 8, 0.1, RegimeConfig::decay(0.5).unwrap());
        let out = normalize(&h, &cfg).unwrap();
        let map = extract_x_map(&out.chain).unwrap();
        assert!(map.is_y_free());
        // x = xi / (1 - q xi) with q = -(2/3) e^{-t/2}
        for t in [0.0, 1.0, 4.0] {
            let q = -(2.0 / 3.0) * (-t / 2.0f64).exp();
            for k in 1..=7u32 {
                let idx = MultiIndex::new(vec![k], vec![0]).unwrap();
                let got = map.components()[0]
                    .get(&idx)
                    .map_or(c(0.0), |tc| tc.eval(t));
                let want = q.powi(k as i32 - 1);
                assert!(
                    (got.re - want).abs() < 1e-13 * want.abs().max(1.0),
                    "k = {k}, t = {t}"
                );
            }
        }
    }

    #[test]
    fn compare_reports_offset_and_grid() {
        let a = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![vec![c(1.0)], vec![c(2.0)]],
            richardson_estimate: None,
        };
        let mut b = a.clone();
        assert_eq!(compare(&a, &b).unwrap().sup_abs, 0.0);
        for s in &mut b.states {
            s[0] += c(1e-9);
        }
        assert!((compare(&a, &b).unwrap().sup_abs - 1e-9).abs() < 1e-15);
        b.times[1] = 1.5;
        assert!(matches!(compare(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn diagonalized_wrapper_round_trips() {
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        let g = vec![PolyXY::zero(2, 4), PolyXY::zero(2, 4)];
        let sys = DiagonalizedSystem::new(p, vec![c(-1.0), c(-2.0)], g).unwrap();
        let z = vec![c(0.3), c(-0.1)];
        let back = sys.to_physical(&sys.to_modal(&z));
        assert!((back[0] - z[0]).norm() < 1e-15 && (back[1] - z[1]).norm() < 1e-15);
    }

    #[test]
    fn substitution_expands_square() {
        // (x1 + x2)^2 = x1^2 + 2 x1 x2 + x2^2
        let g = PolyXY::from_terms(
            2,
            4,
            [(
                MultiIndex::new(vec![2, 0], vec![0, 0]).unwrap(),
                TimeCoeff::real(1.0),
            )],
        )
        .unwrap();
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        let s = substitute_linear(&g, &p).unwrap();
        let mixed = MultiIndex::new(vec![1, 1], vec![0, 0]).unwrap();
        assert_eq!(s.get(&mixed).unwrap().eval(0.0), c(2.0));
        assert_eq!(s.len(), 3);
    }
}
