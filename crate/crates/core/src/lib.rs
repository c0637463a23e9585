//! Run-time assurance for learned controllers through an active set
//! invariance filter.
//!
//! The crate covers the plant models and integrator ([`dynamics`]), primary
//! controllers ([`controllers`]), control barrier functions ([`barrier`]), the
//! minimal-deviation QP filter ([`asif`]), a closed-loop simulation harness
//! ([`harness`]) and assurance-case tooling ([`assurance`]). The [`cli`]
//! module backs the `asif-rta` binary.

pub mod asif;
pub mod assurance;
pub mod barrier;
pub mod cli;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod harness;

pub use error::{Error, Result};
