pub mod coord;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod workers;

pub use error::{Error, Result};

/// The seeded generator used for every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;
