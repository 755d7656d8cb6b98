//! Small-time Taylor expansion of `N` particles on a circle with
//! nearest-neighbour inverse-square repulsion and an analytic external force.
//!
//! The crate computes the velocity coefficients `c_ij` of
//! `v_i(t) = Σ_j c_ij t^j` for particles starting equally spaced and at rest,
//! validates them against a direct adaptive integration of the equations of
//! motion, and measures how the coefficients and the convergence radius
//! scale with `N`.
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type.

pub mod analysis;
pub mod cli;
pub mod discrete;
pub mod error;
pub mod force;
pub mod ode;
pub mod ring;
pub mod scalar;
pub mod series;

pub use discrete::{force_grid, iterated_derivative, GridFunction};
pub use error::{Error, Result};
pub use force::{ForceSpec, Harmonic};
pub use ode::{
    acceleration, energy, integrate, integrate_from, OdeSolution, Tolerances, TrajectoryState,
};
pub use ring::RingConfig;
pub use scalar::Real;
pub use series::{
    compute_coefficients, compute_coefficients_unfiltered, evaluate_position, evaluate_velocity,
    evaluate_velocity_partial, explicit_c3, explicit_c4, oracle_coefficients, CoefficientTable,
};

pub type ForceSpec64 = ForceSpec<f64>;
pub type ForceSpec32 = ForceSpec<f32>;
pub type RingConfig64 = RingConfig<f64>;
pub type RingConfig32 = RingConfig<f32>;
pub type Grid64 = GridFunction<f64>;
pub type Grid32 = GridFunction<f32>;
pub type CoefficientTable64 = CoefficientTable<f64>;
pub type CoefficientTable32 = CoefficientTable<f32>;
pub type TrajectoryState64 = TrajectoryState<f64>;
pub type TrajectoryState32 = TrajectoryState<f32>;
