pub mod cli;
pub mod corpus;
pub mod decode;
pub mod encodings;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod nnet;
pub mod textproc;

pub use error::{Error, Result};
