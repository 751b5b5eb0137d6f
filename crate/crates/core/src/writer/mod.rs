//! Knowledge-aware paper writer.
//!
//! A bi-GRU reads the source text, a multi-hop memory network over related
//! entity embeddings initializes the decoder, and each decoding step mixes
//! vocabulary generation with copying from the source and from the entity
//! names. Reference and entity coverage vectors feed back into attention and
//! into the loss. Decoding uses beam search with repetition masking, and the
//! three task models are chained into title → abstract → conclusion → title.

mod beam;
mod chain;
mod corpus;
mod inference;
mod model;
mod params;
mod train;
mod vocab;

pub use beam::{beam_search, beam_search_encoded, candidates, is_allowed, BeamOptions, Decoded, TaggedToken};
pub use chain::{
    entities_for, generate_chain, BeamWriter, ChainOptions, ChainWriters, GenerationRecord,
    RelatedEntity, StageOutput, StageWriter,
};
pub use corpus::{read_corpus, CorpusPair, Task};
pub use inference::{DecoderState, EncodedSource, StepOutput};
pub use model::{
    coverage_terms, GateOverride, MemoryEntity, MixtureDistribution, SequenceLoss, Source, SourceTag,
    MAX_TOKENS,
};
pub use params::{WriterDims, WriterModel};
pub use train::{
    corpus_nll, corpus_perplexity, train_model, train_writer, WriterTrainOptions,
    WriterTrainReport,
};
pub use vocab::{default_stopwords, is_punctuation, parse_word_list, Vocabulary, BOS, EOS, PAD, UNK};
