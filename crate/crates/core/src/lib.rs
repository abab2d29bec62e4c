//! Tempered multiplicative belief revision.
//!
//! A belief `q` over `K` candidates is revised against verifier evidence `b`
//! by `q' ∝ (q · b)^α`. This crate provides the simplex utilities, the
//! dynamics of the update, a log-space estimator for α, and the experiment
//! drivers built on them.

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod evidence;
pub mod experiments;
pub mod records;
pub mod report;
pub mod seeding;
pub mod simplex;
pub mod stats;

pub use error::{Error, Result};
