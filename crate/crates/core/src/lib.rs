pub mod corpus;
pub mod error;

pub use error::{Error, Result};
pub mod index;
pub mod embeddings;
pub mod drmm;
pub mod eval;
pub mod crossval;
pub mod synthetic;
pub mod pipeline;
