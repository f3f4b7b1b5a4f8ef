//! Temporal-epistemic verification of dynamic access-control policies.
//!
//! A policy is parsed and grounded ([`policy`]), turned into an interpreted
//! system whose agents learn facts through read permissions ([`kernel`]),
//! and checked against CTLK properties either directly ([`mc`]) or through
//! counterexample-guided refinement of a variable-hiding abstraction
//! ([`abstraction`], [`cegar`]).

pub mod abstraction;
pub mod bits;
pub mod cegar;
pub mod ctlk;
pub mod error;
pub mod expr;
pub mod its;
pub mod kernel;
pub mod mc;
pub mod policy;
pub mod syntax;
pub mod system;

pub use bits::State;
pub use error::{Error, Result};
