//! Reversible mass-action kinetics as systems of binomial events.
//!
//! An event `σM - τN` couples two monomials with positive rates. This crate
//! computes the exact structure of an event-system (stoichiometry,
//! conservation laws, naturality certificates, atomicity), its positive
//! strong equilibria, and integrates the mass-action ODE with invariant
//! monitoring.

pub mod analysis;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod parser;
pub mod report;
pub mod simulate;
pub mod system;

pub use error::{Error, Result};
pub use parser::{parse_system, serialize_system};
pub use system::{Event, EventSystem, Monomial, Rate};
