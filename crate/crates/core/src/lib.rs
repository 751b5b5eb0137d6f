pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod kg;
pub mod link;
pub mod numerics;
pub mod toy;
pub mod writer;

pub use error::{Error, Result};
