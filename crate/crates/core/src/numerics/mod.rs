//! Dense tensors, reverse-mode gradients, the GRU cell and Adam.
//!
//! Everything runs in double precision on a single thread per model
//! instance. Models create a fresh [`Tape`] for each forward pass; parameter
//! leaves borrow from the [`ParamStore`] so binding weights is free.

mod adam;
mod gru;
mod modelfile;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gru::{gru_cell, GruParams, GruVars};
pub use modelfile::{read_model_file, write_model_file, MODEL_MAGIC, MODEL_VERSION};
pub use params::{ParamId, ParamStore, INIT_BOUND};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
