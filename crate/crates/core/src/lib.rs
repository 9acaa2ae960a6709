//! Dynamic Solow model with sentiment-driven business cycles.
//!
//! The model couples a supply-side Solow economy to a demand side driven by
//! investor sentiment `s` and an information field `h`. Capital actually used
//! is the smaller of supplied and demanded capital.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod integrator;
pub mod params;
pub mod reproduce;
pub mod stochastic;

pub use dynamics::{FullState, ReducedState};
pub use equilibria::{EquilibriumPoint, LimitCycle, PointKind, Stability};
pub use error::{Error, Result};
pub use integrator::{simulate, Trajectory};
pub use params::{
    derived_quantities, load_config, validate, InitialState, ModelParams, RegimeMode, SimConfig,
    ValidatedParams, DAYS_PER_YEAR,
};
