//! Exact Equal Shares participatory budgeting.
//!
//! The crate implements the Method of Equal Shares ([`rules::mes`]), its
//! exhaustive variant ([`rules::ees`]), stability certificates, and budget
//! completion sweeps that jump straight to the next virtual budget at which
//! the EES outcome changes.

pub mod compare;
pub mod completion;
pub mod generate;
pub mod model;
pub mod oracles;
pub mod pabulib;
pub mod rational;
pub mod rules;
pub mod stability;

pub use model::{Election, ProjectId, Solution, Utility, VoterId};
pub use rational::Rational;
