//! Quadratic-method normalization.
//!
//! Each step solves the homological equation for `chi_j`, then replaces the
//! remainder by `f_{j+1} = sum_{s>=1} s/(s+1)! L_j^s f_j`. The algebra is exact
//! and radius-free; the minimum degree of the remainder nearly doubles per
//! step (`m_{j+1} >= 2 m_j - 2`), so at a fixed truncation degree the
//! remainder vanishes after finitely many steps.
//!
//! Alongside the algebra the loop records measured Taylor norms and the
//! theoretical schedule `eps_j`, `d_j`, `R_j` as certificates.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::analytic_bounds::c_constant;
use crate::error::{Error, Result};
use crate::homological::{
    check_nonresonance, solve_homological, GeneratingFunction, Regime, RegimeConfig,
};
use crate::polyalg::{lie_h, lie_powers, PolyXY};

/// `H = eta + sum_l lambda_l x_l y_l + f(x, y, t)`; the quadratic part and
/// `eta` are implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedHamiltonian {
    lambda: Vec<Complex64>,
    perturbation: PolyXY,
}

impl ExtendedHamiltonian {
    pub fn new(lambda: Vec<Complex64>, perturbation: PolyXY) -> Result<Self> {
        if lambda.len() != perturbation.n() {
            return Err(Error::DimensionMismatch(format!(
                "lambda has length {}, perturbation has n = {}",
                lambda.len(),
                perturbation.n()
            )));
        }
        if let Some(idx) = perturbation.first_outside_gamma() {
            return Err(Error::NotQxLy(idx.clone()));
        }
        Ok(Self {
            lambda,
            perturbation,
        })
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn perturbation(&self) -> &PolyXY {
        &self.perturbation
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// `exp(L_chi) H`, returned again as `h + f'`.
    ///
    /// Expands both series directly, `f' = sum_s L^s f / s! + sum_{s>=1} L^{s-1}(L h) / s!`
    /// with `L h = -lie_h(chi)`, without using the homological equation.
    pub fn transform(&self, chi: &PolyXY) -> Result<Self> {
        let f = &self.perturbation;
        let lh = lie_h(chi, &self.lambda)?.scale(Complex64::new(-1.0, 0.0));
        let f_powers = lie_powers(f, chi)?;
        let h_powers = lie_powers(&lh, chi)?;
        let mut weighted: Vec<(Complex64, &PolyXY)> = Vec::new();
        let mut inv_fact = 1.0;
        for (s, p) in f_powers.iter().enumerate() {
            if s > 0 {
                inv_fact /= s as f64;
            }
            weighted.push((Complex64::new(inv_fact, 0.0), p));
        }
        let mut inv_fact = 1.0;
        for (s, p) in h_powers.iter().enumerate() {
            inv_fact /= (s + 1) as f64;
            weighted.push((Complex64::new(inv_fact, 0.0), p));
        }
        Ok(Self {
            lambda: self.lambda.clone(),
            perturbation: PolyXY::linear_combination(&weighted)?,
        })
    }
}

/// Which `eps_0` seeds the theoretical schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaScheduleSource {
    /// Measured Taylor norm of `f` at `R_0`.
    Measured,
    /// The analytic overestimate of `|f|_{R_0}` from `M_f` and `R_0`.
    Theoretical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationConfig {
    pub n: usize,
    pub n_trunc: u32,
    pub r0: f64,
    pub regime: RegimeConfig,
    pub max_iterations: usize,
    pub delta_schedule_source: DeltaScheduleSource,
}

impl NormalizationConfig {
    pub fn new(n: usize, n_trunc: u32, r0: f64, regime: RegimeConfig) -> Self {
        Self {
            n,
            n_trunc,
            r0,
            regime,
            max_iterations: 64,
            delta_schedule_source: DeltaScheduleSource::Measured,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0 <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "R0 = {} outside (0, 1/2]",
                self.r0
            )));
        }
        if self.n_trunc < 3 {
            return Err(Error::InvalidConfig(format!(
                "n_trunc = {} < 3",
                self.n_trunc
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        self.regime.validate(self.n)
    }
}

/// Per-step measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub j: usize,
    /// Decay bound of `f_j` at radius `R_j` and rate `a`.
    pub measured_norm: f64,
    pub epsilon_theory: f64,
    pub r_j: f64,
    pub d_j: f64,
    pub min_deg: u32,
    /// Sup-in-time Taylor norm of `chi_j` at `R_j`.
    pub chi_norm: f64,
}

/// The generating sequence `chi_0, chi_1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformChain {
    pub generators: Vec<GeneratingFunction>,
    pub lambda: Vec<Complex64>,
    pub n_trunc: u32,
}

impl TransformChain {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn is_ly(&self) -> bool {
        self.generators.iter().all(|g| g.chi.is_ly())
    }

    /// `[H, exp(L_0) H, exp(L_1) exp(L_0) H, ...]`.
    pub fn hamiltonian_sequence(
        &self,
        h: &ExtendedHamiltonian,
    ) -> Result<Vec<ExtendedHamiltonian>> {
        let mut seq = vec![h.clone()];
        for g in &self.generators {
            let next = seq.last().expect("nonempty").transform(&g.chi)?;
            seq.push(next);
        }
        Ok(seq)
    }

    /// Largest surviving coefficient of the pushed perturbation, relative to
    /// the largest coefficient of `H`'s own perturbation; zero when the
    /// strong normal form is reached exactly.
    pub fn normal_form_defect(&self, h: &ExtendedHamiltonian) -> Result<f64> {
        let scale = h
            .perturbation()
            .iter()
            .map(|(_, c)| c.max_abs_coeff())
            .fold(0.0, f64::max);
        let pushed = self.apply(h)?;
        let worst = pushed
            .perturbation()
            .iter()
            .map(|(_, c)| c.max_abs_coeff())
            .fold(0.0, f64::max);
        Ok(if worst == 0.0 {
            0.0
        } else {
            worst / scale.max(f64::MIN_POSITIVE)
        })
    }

    /// Push `H` through every generator in order.
    pub fn apply(&self, h: &ExtendedHamiltonian) -> Result<ExtendedHamiltonian> {
        let mut cur = h.clone();
        for g in &self.generators {
            cur = cur.transform(&g.chi)?;
        }
        Ok(cur)
    }
}

/// Constants of the homological and iterative estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceConstants {
    /// `C_1` in decay mode, `C_2` in the non-resonant mode.
    pub c: f64,
    /// `C_hat_1 = C(2n, 0)` or `C_hat_2 = n gamma C(n, tau)`.
    pub c_hat: f64,
    pub k: f64,
    pub sigma: f64,
}

/// `|Lambda|` as the largest modulus of an eigenvalue.
pub fn lambda_norm(lambda: &[Complex64]) -> f64 {
    lambda.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// `C_1 = (1 + |Lambda|) C(2n, 1)`, `sigma = 2n + 5` (decay) or
/// `C_2 = max{n (1 + gamma |Lambda|) C(n, tau + 1), n gamma C(n, tau)}`,
/// `sigma = n + tau + 5` (non-resonant); `K = 2n e^2 C R_*^{-2}`.
pub fn convergence_constants(
    n: usize,
    lambda: &[Complex64],
    regime: &RegimeConfig,
    r_star: f64,
) -> ConvergenceConstants {
    let nf = n as f64;
    let m = n as u32;
    let lam = lambda_norm(lambda);
    let (c, c_hat, sigma) = match regime.mode {
        Regime::Decay { .. } => (
            (1.0 + lam) * c_constant(2 * m, 1.0),
            c_constant(2 * m, 0.0),
            2.0 * nf + 5.0,
        ),
        Regime::NonResonant { gamma, tau } => {
            let c_hat = nf * gamma * c_constant(m, tau);
            let c2 = (nf * (1.0 + gamma * lam) * c_constant(m, tau + 1.0)).max(c_hat);
            (c2, c_hat, nf + tau + 5.0)
        }
    };
    ConvergenceConstants {
        c,
        c_hat,
        k: 2.0 * nf * E * E * c / (r_star * r_star),
        sigma,
    }
}

/// `eps_a = a (2 pi)^{-sigma} K^{-1}`.
pub fn convergence_threshold(a: f64, sigma: f64, k: f64) -> f64 {
    a * (2.0 * PI).powf(-sigma) / k
}

/// One row of the theoretical schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRecord {
    pub j: usize,
    pub eps: f64,
    pub d: f64,
    pub r: f64,
    /// `|eps_{j+1} - K a^{-1} d_j^{-sigma} eps_j^2| / eps_{j+1}`.
    pub recursion_rel_err: f64,
}

/// `d_j = (eps_0 K / a)^{1/sigma} (j+2)^2 / (j+1)^4`.
pub fn shrink_factor(eps0: f64, a: f64, k: f64, sigma: f64, j: usize) -> f64 {
    let jf = j as f64;
    (eps0 * k / a).powf(1.0 / sigma) * (jf + 2.0).powi(2) / (jf + 1.0).powi(4)
}

/// `eps_j = eps_0 (j+1)^{-sigma}`, `d_j` from [`shrink_factor`], and
/// `R_{j+1} = (1 - 2 d_j) R_j` for `j = 0..=j_max`, each row carrying the
/// mismatch against `eps_{j+1} = K a^{-1} d_j^{-sigma} eps_j^2`.
pub fn theoretical_sequences(
    eps0: f64,
    a: f64,
    k: f64,
    sigma: f64,
    r0: f64,
    j_max: usize,
) -> Result<Vec<SequenceRecord>> {
    for (name, v) in [
        ("eps0", eps0),
        ("a", a),
        ("K", k),
        ("sigma", sigma),
        ("R0", r0),
    ] {
        if !(v > 0.0) {
            return Err(Error::DomainError(format!("{name} = {v} must be positive")));
        }
    }
    let eps_a = convergence_threshold(a, sigma, k);
    if eps0 > eps_a * (1.0 + 1e-12) {
        return Err(Error::ConvergenceConditionViolated { eps0, eps_a });
    }
    let eps = |j: usize| eps0 * (j as f64 + 1.0).powf(-sigma);
    let mut out = Vec::with_capacity(j_max + 1);
    let mut r = r0;
    for j in 0..=j_max {
        let d = shrink_factor(eps0, a, k, sigma, j);
        let predicted = k / a * d.powf(-sigma) * eps(j).powi(2);
        let next = eps(j + 1);
        out.push(SequenceRecord {
            j,
            eps: eps(j),
            d,
            r,
            recursion_rel_err: (next - predicted).abs() / next,
        });
        r *= 1.0 - 2.0 * d;
    }
    Ok(out)
}

/// Largest admissible `R_0`: the case formula capped by `R^16` and `1/2`.
///
/// Decay: `[a / (16 (2 pi)^sigma e^{2n+1} n^2 C_1 M_f)]^{64/7}`;
/// non-resonant: `[8 (2 pi)^sigma e^{n+1} n^3 C_2 M_f]^{-32/11}`.
pub fn r0_admissible(
    m_f: f64,
    a: f64,
    n: usize,
    constants: &ConvergenceConstants,
    regime: &RegimeConfig,
    r_analytic: f64,
) -> Result<f64> {
    if !(m_f >= 1.0) {
        return Err(Error::DomainError(format!("M_f = {m_f} < 1")));
    }
    let nf = n as f64;
    let two_pi_sigma = (2.0 * PI).powf(constants.sigma);
    let formula = match regime.mode {
        Regime::Decay { .. } => (a
            / (16.0 * two_pi_sigma * E.powf(2.0 * nf + 1.0) * nf * nf * constants.c * m_f))
            .powf(64.0 / 7.0),
        Regime::NonResonant { .. } => {
            (8.0 * two_pi_sigma * E.powf(nf + 1.0) * nf.powi(3) * constants.c * m_f)
                .powf(-32.0 / 11.0)
        }
    };
    Ok(formula.min(r_analytic.powi(16)).min(0.5))
}

/// The analytic overestimate of `|f|_{R_0}`: `2n e^{2n-1} M_f R_0^{135/64}`
/// (decay) or `n^2 e^{n-1} M_f R_0^{75/32}` (non-resonant).
pub fn analytic_eps0(n: usize, m_f: f64, r0: f64, regime: &RegimeConfig) -> f64 {
    let nf = n as f64;
    match regime.mode {
        Regime::Decay { .. } => 2.0 * nf * E.powf(2.0 * nf - 1.0) * m_f * r0.powf(135.0 / 64.0),
        Regime::NonResonant { .. } => nf * nf * E.powf(nf - 1.0) * m_f * r0.powf(75.0 / 32.0),
    }
}

/// Number of steps the degree law `m_{j+1} = 2 m_j - 2` predicts before the
/// minimum degree exceeds `n_trunc`.
pub fn degree_law_iterations(n_trunc: u32, m0: u32) -> usize {
    assert!(m0 >= 3, "degree law needs m0 >= 3");
    let mut m = m0;
    let mut steps = 0;
    while m <= n_trunc {
        steps += 1;
        m = 2 * m - 2;
    }
    steps
}

/// Theory-side certificate computed next to the exact algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryTrack {
    pub eps0: f64,
    pub eps0_measured: f64,
    pub eps0_analytic: f64,
    pub m_f: f64,
    pub eps_a: f64,
    pub constants: ConvergenceConstants,
    /// `eps0 <= eps_a` and every `d_j <= 1/4`; radii shrink only when set.
    pub in_force: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub chain: TransformChain,
    pub records: Vec<IterationRecord>,
    pub final_remainder: PolyXY,
    pub theory: TheoryTrack,
}

impl Normalization {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn succeeded(&self) -> bool {
        self.final_remainder.is_zero()
    }
}

/// `f_{j+1} = sum_{s>=1} s/(s+1)! L^s f_j`.
pub fn next_remainder(f: &PolyXY, chi: &PolyXY) -> Result<PolyXY> {
    let powers = lie_powers(f, chi)?;
    if powers.len() == 1 {
        return Ok(PolyXY::zero(f.n(), f.n_trunc()));
    }
    let mut fact = 1.0;
    let weighted: Vec<(Complex64, &PolyXY)> = powers
        .iter()
        .enumerate()
        .skip(1)
        .map(|(s, p)| {
            fact *= if s == 1 { 2.0 } else { (s + 1) as f64 };
            (Complex64::new(s as f64 / fact, 0.0), p)
        })
        .collect();
    PolyXY::linear_combination(&weighted)
}

pub fn normalize(h: &ExtendedHamiltonian, config: &NormalizationConfig) -> Result<Normalization> {
    config.validate()?;
    if h.n() != config.n {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian has n = {}, config has n = {}",
            h.n(),
            config.n
        )));
    }
    let lambda = h.lambda().to_vec();
    let regime = config.regime;
    if let Regime::NonResonant { gamma, tau } = regime.mode {
        let report = check_nonresonance(&lambda, config.n_trunc, gamma, tau);
        if !report.passed {
            return Err(Error::NonResonance {
                alpha: report.worst_alpha,
                l: report.worst_l,
                re_u: report.min_abs_re_u,
            });
        }
    }

    let a = regime.decay_rate();
    let a_eff = if regime.is_decay() { a } else { 1.0 };
    let f0 = h.perturbation().with_trunc(config.n_trunc);
    let r_star = config.r0 / 2.0;
    let constants = convergence_constants(config.n, &lambda, &regime, r_star);
    let eps0_measured = f0.taylor_norm(config.r0, a)?;
    let m_f = f0.taylor_norm(config.r0.powf(1.0 / 16.0), a)?.max(1.0);
    let eps0_analytic = analytic_eps0(config.n, m_f, config.r0, &regime);
    let eps0 = match config.delta_schedule_source {
        DeltaScheduleSource::Measured => eps0_measured,
        DeltaScheduleSource::Theoretical => eps0_analytic,
    };
    let eps_a = convergence_threshold(a_eff, constants.sigma, constants.k);
    let d = |j: usize| {
        if eps0 > 0.0 {
            shrink_factor(eps0, a_eff, constants.k, constants.sigma, j)
        } else {
            0.0
        }
    };
    let in_force = eps0 <= eps_a && d(0) <= 0.25;
    let theory = TheoryTrack {
        eps0,
        eps0_measured,
        eps0_analytic,
        m_f,
        eps_a,
        constants,
        in_force,
    };

    let mut f = f0;
    let mut generators = Vec::new();
    let mut records = Vec::new();
    let mut r_j = config.r0;
    for j in 0..config.max_iterations {
        if f.is_zero() {
            break;
        }
        let gf = solve_homological(&f, &lambda, &regime)?;
        let d_j = d(j);
        records.push(IterationRecord {
            j,
            measured_norm: f.taylor_norm(r_j, a)?,
            epsilon_theory: eps0 * (j as f64 + 1.0).powf(-constants.sigma),
            r_j,
            d_j,
            min_deg: f.min_degree()?,
            chi_norm: gf.chi.taylor_norm(r_j, 0.0)?,
        });
        f = next_remainder(&f, &gf.chi)?;
        generators.push(gf);
        if in_force {
            r_j *= 1.0 - 2.0 * d_j;
        }
    }
    if !f.is_zero() {
        return Err(Error::MaxIterationsExceeded(config.max_iterations));
    }
    Ok(Normalization {
        chain: TransformChain {
            generators,
            lambda,
            n_trunc: config.n_trunc,
        },
        records,
        final_remainder: f,
        theory,
    })
}
