pub mod assembly;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod numcore;
pub mod objectives;
pub mod seed;
pub mod syntax;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
