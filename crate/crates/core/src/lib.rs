pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod model;
pub mod net;
pub mod ood;
pub mod rng;
pub mod sdde;

pub use error::{Error, Result};
