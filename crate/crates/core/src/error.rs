use thiserror::Error;

use crate::polyalg::MultiIndex;

/// Errors raised by the normalization engine and its verification harness.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(
        "divergent integral: term with rate {rate} fails Re(mu + U) < -margin for U = {shift}"
    )]
    DivergentIntegral {
        rate: num_complex::Complex64,
        shift: num_complex::Complex64,
    },

    #[error("unbounded growth: term t^{power} e^({rate} t) is not dominated by e^(-{decay} t)")]
    UnboundedGrowth {
        rate: num_complex::Complex64,
        power: u32,
        decay: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Lie series does not terminate: generator has a term of total degree {degree} < 3")]
    NonterminatingSeries { degree: u32 },

    #[error("empty polynomial has no minimum degree")]
    EmptyPolynomial,

    #[error("small divisor at {idx}: |Re U| = {re_u:e}")]
    SmallDivisor { idx: MultiIndex, re_u: f64 },

    #[error("perturbation is not (QxLy): offending index {0}")]
    NotQxLy(MultiIndex),

    #[error("series is not linear in y: offending index {0}")]
    NotLy(MultiIndex),

    #[error("non-resonance condition fails at alpha = {alpha:?}, l = {l}: |Re U| = {re_u:e}")]
    NonResonance {
        alpha: Vec<u32>,
        l: usize,
        re_u: f64,
    },

    #[error("convergence condition violated: eps0 = {eps0:e} > eps_a = {eps_a:e}")]
    ConvergenceConditionViolated { eps0: f64, eps_a: f64 },

    #[error("remainder not removed after {0} iterations")]
    MaxIterationsExceeded(usize),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("oracle cutoff insufficient: {0}")]
    CutoffInsufficient(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Newton inversion diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("step too large: Richardson discrepancy {discrepancy:e} exceeds 1e-6 relative")]
    StepTooLarge { discrepancy: f64 },

    #[error("time grids differ: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
