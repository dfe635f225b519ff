//! Follow the Perturbed Leader with adaptive learning rates.
//!
//! The crate provides the FPL decision rule and its variants, exact choice
//! probabilities, loss environments, and a harness that plays games,
//! replicates them and checks regret bounds against the measured losses.
//!
//! Experts are indexed from 0; rounds are numbered from 1.

pub mod config;
pub mod environments;
pub mod error;
pub mod exact;
pub mod experts;
pub mod harness;
pub mod perturbation;
pub mod predictors;
pub mod scenarios;
pub mod schedules;

pub use error::{FplError, Result};
pub use experts::{Decision, ExpertPool, GameState, LossVector};
pub use perturbation::Regime;
pub use schedules::{LossSource, Schedule};
