//! Screenplay structure parsing, hierarchical scene encoders for
//! multi-label tag prediction, scene descriptor (dictionary learning)
//! models, similarity-aware tag evaluation and narrative trajectories.

pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod encoders;
pub mod parser;
pub mod pipeline;
pub mod tensor;
pub mod trajectories;

pub use error::{Error, Result};
