//! Hardware-aware quantum circuit optimizer over a Z-Rotation / Phased-X /
//! CNOT gate set on a 1D nearest-neighbor chain.
//!
//! Circuits are rewritten through verified local transformations. Hard rules
//! are applied automatically (pruning); soft rules are selected either by
//! simulated annealing or by a fully convolutional PPO agent operating on
//! grid-encoded observations and actions.

pub mod circuit;
pub mod cost;
pub mod datagen;
pub mod env;
pub mod error;
pub mod nn;
pub mod ppo;
pub mod qaoa;
pub mod rules;
pub mod sa;
pub mod synth;
pub mod unitary;

pub use circuit::{Circuit, Gate, Schedule};
pub use cost::{quality, success_probability, QualityFn, QualityWeights};
pub use error::{Error, Result};
