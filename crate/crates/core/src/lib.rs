pub mod cli;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod numerics;
pub mod objectives;
pub mod rng;
pub mod trainer;
pub mod zeroshot;

pub use error::{HecvlError, Level, Result};
