//! Link prediction and graph enrichment.
//!
//! Each entity is represented by a multi-head graph-attention encoding of
//! its neighborhood concatenated with a bi-GRU encoding of its context
//! sentences. Triples are scored translation-style on a learned projection
//! of that representation and trained with a margin ranking loss. Entities
//! whose representations are close in cosine similarity then share their
//! neighbors, which yields the enriched graph used for writing.

mod model;
mod propagate;
mod train;

pub use model::{
    cosine, entity_similarity, translation_score, EntityRepresentation, LinkConfig, LinkModel,
};
pub use propagate::{propagate_links, related_entities};
pub use train::{entities_by_type, sample_corruption, MarginTrainOptions, MarginTrainReport};

/// Default similarity threshold for propagation.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.95;

/// Default number of related entities handed to the writer.
pub const RELATED_ENTITY_LIMIT: usize = 10;
