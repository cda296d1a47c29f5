//! Spectral regularization toolkit.

pub mod advtrain;
pub mod cli;
pub mod error;
pub mod filters;
pub mod frames;
pub mod laws;
pub mod operators;
pub mod output;
pub mod pnp;
pub mod ratelab;
pub mod risk;
pub mod seqspace;
pub mod special;

pub use error::{Error, Result};
