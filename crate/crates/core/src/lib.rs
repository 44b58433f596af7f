//! Continuous-state branching processes with spectrally positive migration.
//!
//! The crate has two halves:
//!
//! * an *exact* half — Laplace exponents ([`mech`]), scale-function
//!   machinery and first-passage / explosion / occupation Laplace
//!   transforms ([`scale`]), and the extended generator ([`generator`]) —
//!   built on adaptive quadrature ([`quad`]) with tracked error bounds;
//! * a *stochastic* half — jump-diffusion path simulation ([`path`],
//!   [`sim`]) and Monte Carlo estimators ([`est`]) used to cross-validate
//!   the exact formulas.
//!
//! The numeric core is generic over the scalar type through [`real::Real`]
//! (`f32` or `f64`); the simulation layer is `f64`-only. The aliases below
//! fix `f64` for the common case.

pub mod error;
pub mod est;
pub mod generator;
pub mod mech;
pub mod path;
pub mod quad;
pub mod real;
pub mod scale;
pub mod sim;
mod special;

pub use error::{CbmError, Result};
pub use real::Real;

/// `f64` jump measure.
pub type JumpMeasure = mech::JumpMeasure<f64>;
/// `f64` Laplace exponent.
pub type LevyMechanism = mech::LevyMechanism<f64>;
/// `f64` branching/migration pair.
pub type MechanismPair = mech::MechanismPair<f64>;
/// `f64` scale-function evaluator.
pub type ScaleEval = scale::ScaleEval<f64>;
