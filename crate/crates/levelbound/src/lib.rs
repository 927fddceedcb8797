//! Hitting-time bounds for elitist evolutionary algorithms from
//! fitness-level transition models.
//!
//! The crate models an elitist (1+1)-style algorithm as an absorbing chain
//! over fitness levels `S_0..S_K` (`S_0` optimal) and computes, from the
//! level transition probabilities alone:
//!
//! - the exact mean hitting time of the level chain
//!   ([`bounds::exact_hitting_time`]),
//! - the tightest metric lower and upper bounds expressible from level
//!   data ([`bounds::metric_bound`]),
//! - linear bounds under all the classic coefficient schemes, from the
//!   trivial zero/one choices through viscosity, visit probability, the
//!   full recursive triangle, and explicit product and path-sum forms
//!   ([`bounds::linear_bound`]),
//! - drift certificates for any candidate bound ([`bounds::verify_drift`]),
//! - fitness-landscape shortcut detection ([`bounds::detect_shortcuts`]).
//!
//! Built-in generators produce exact models for the one-bit-counting
//! landscape ([`model::onemax_model`]) and a two-peak landscape with a
//! deceptive branch ([`model::twomax1_model`]); arbitrary models load from
//! JSON ([`model::load_model`]). The [`oracle`] module provides the ground
//! truth the rest of the crate is tested against: exhaustive `2^n` chain
//! enumeration, brute-force path-sum coefficients, and seeded Monte Carlo
//! simulation.
//!
//! ```
//! use levelbound::bounds::{exact_hitting_time, linear_bound, Direction, Scheme};
//! use levelbound::model::twomax1_model;
//!
//! let model = twomax1_model(32).unwrap();
//! let exact = exact_hitting_time(&model).unwrap();
//!
//! // The scalar-coefficient lower bound collapses on this landscape...
//! let scalar = linear_bound(&model, Scheme::Viscosity, Direction::Lower).unwrap();
//! assert!(scalar.final_level() < 10.0);
//!
//! // ...while the full recursive scheme recovers the exact hitting time.
//! let full = linear_bound(&model, Scheme::Full, Direction::Lower).unwrap();
//! assert!((full.final_level() / exact.final_level() - 1.0).abs() < 1e-9);
//! ```

pub mod bounds;
mod error;
pub mod kernel;
pub mod model;
pub mod oracle;
mod sum;

pub use error::{Error, Result};
