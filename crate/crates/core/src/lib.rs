//! Epidemic population games with a positive disease death rate.
//!
//! The crate integrates the coupled strategy/epidemic dynamics under a
//! stabilizing payoff mechanism, evaluates the associated Lyapunov function
//! along trajectories, and computes anytime upper bounds on the infectious
//! fraction from the Lyapunov sublevel sets.
//!
//! ```
//! use epg_core::{equilibrium::optimal_allocation, params::Model};
//!
//! let model = Model::example();
//! let alloc = optimal_allocation(&model).unwrap();
//! assert!((alloc.betastar - 0.17).abs() <= f64::EPSILON);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod edm;
pub mod equilibrium;
pub mod error;
pub mod params;
pub mod payoff;

pub use error::{Error, Result};
