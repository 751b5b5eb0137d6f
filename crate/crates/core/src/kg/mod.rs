//! Background knowledge graph: ingestion, adjacency queries, contextual
//! sentences and dictionary matching of entities in titles.
//!
//! Triples are directed as stored. No inverse edges are added.

mod context;
mod graph;
mod io;
mod matcher;

pub use context::ContextIndex;
pub use graph::{Edge, Entity, EntityType, KnowledgeGraph, Relation, Triple};
pub use io::{
    ingest_records, ingest_sentence_records, ingest_sentences, ingest_triples, write_graph,
    write_sentences, SentenceRecord, TripleRecord,
};
pub use matcher::{match_title_entities, Lexicon, TitleMatch};

/// Whitespace tokenization with lowercasing, the convention for all text in
/// this crate.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}
