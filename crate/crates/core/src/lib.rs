//! Markov inducing schemes, twisted transfer operators and correlation decay
//! for suspension semiflows over model hyperbolic systems.

pub mod cli;
pub mod error;
pub mod inducing;
pub mod models;
pub mod semiflow;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
