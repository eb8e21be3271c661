//! Deterministic simulation of randomized decision trees.
//!
//! Every quantity is an exact rational. The main entry points are
//! [`global_derand::derandomize`], [`instance_opt::find`],
//! [`instance_opt::nisan`] and [`online::online_eval`].

pub mod error;
pub mod fourier;
pub mod global_derand;
pub mod influence;
pub mod instance_opt;
pub mod online;
pub mod oracle;
pub mod prg;
pub mod rational;
pub mod tree;

pub use error::{Error, Result};
pub use rational::Rational;
pub use tree::{Candidate, Restriction, Tree, TreeStats};
