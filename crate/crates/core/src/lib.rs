//! Credit bounds for the Credit-Based Shaper (CBS) of a TSN egress port.
//!
//! * [`model`]: port configuration, exact rationals, config files.
//! * [`bounds`]: closed-form credit upper/lower bounds and service curves.
//! * [`simulator`]: event-driven simulation of the egress scheduler with
//!   exact time and credit.
//! * [`scenarios`]: tightness scenarios, seeded random scenarios and a
//!   fixed-step reference simulator.
//! * [`cli`]: the `cbs` command-line front end.

pub mod bounds;
pub mod cli;
pub mod model;
pub mod scenarios;
pub mod simulator;

pub use model::Rat;
