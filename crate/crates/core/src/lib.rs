//! Lie-series normalization of near-equilibrium Hamiltonians
//! `H = eta + sum_l lambda_l x_l y_l + f(x, y, t)` whose perturbation depends
//! on time aperiodically, either decaying exponentially or staying bounded
//! under a non-resonance condition.
//!
//! Layers, bottom up: exponential-polynomial coefficients ([`timealg`]),
//! truncated series in `(x, y)` ([`polyalg`]), the homological solver
//! ([`homological`]), the iterative normalizer ([`normalizer`]), analytic
//! estimates with brute-force oracles ([`analytic_bounds`]), and an ODE
//! round trip against a numerical integrator ([`ode_verify`]).

pub mod analytic_bounds;
pub mod error;
pub mod homological;
pub mod normalizer;
pub mod ode_verify;
pub mod par;
pub mod polyalg;
pub mod timealg;

pub use error::{Error, Result};
pub use homological::{solve_homological, GeneratingFunction, Regime, RegimeConfig};
pub use normalizer::{
    normalize, ExtendedHamiltonian, Normalization, NormalizationConfig, TransformChain,
};
pub use ode_verify::{
    build_hamiltonian_from_ode, closed_form_solution, compare, extract_x_map, integrate_ode,
    invert_x_map, OdeSystem, Trajectory, XMap,
};
pub use polyalg::{MultiIndex, PolyXY};
pub use timealg::{ExpMonomial, TimeCoeff};
