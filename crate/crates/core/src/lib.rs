pub mod classical;
pub mod classifier;
pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod rng;
pub mod synthetic;
pub mod textcnn;
pub mod textprep;

pub use error::{Error, Result};
