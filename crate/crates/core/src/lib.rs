pub mod bench;
pub mod cli;
pub mod curriculum;
pub mod dataset;
pub mod error;
pub mod labels;
pub mod matrix;
pub mod mixer;
pub mod pipeline;
pub mod rng;
pub mod trainer;
pub mod variants;

pub use error::{Error, Result};
