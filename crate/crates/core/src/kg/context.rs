use std::collections::BTreeMap;

use super::graph::KnowledgeGraph;

/// Sentences mentioning each entity. Tokens are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextIndex {
    sentences: BTreeMap<u64, Vec<String>>,
    by_entity: BTreeMap<usize, Vec<u64>>,
    /// Mentions dropped because the external id is not in the graph.
    pub skipped_mentions: Vec<(u64, String)>,
}

impl ContextIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sentence; re-adding an id replaces its tokens.
    pub fn add_sentence(&mut self, sid: u64, tokens: &[String]) {
        let toks = tokens.iter().map(|t| t.to_lowercase()).collect();
        self.sentences.insert(sid, toks);
    }

    pub fn link(&mut self, entity: usize, sid: u64) {
        let ids = self.by_entity.entry(entity).or_default();
        if !ids.contains(&sid) {
            ids.push(sid);
            ids.sort_unstable();
        }
    }

    pub fn sentence(&self, sid: u64) -> Option<&[String]> {
        self.sentences.get(&sid).map(Vec::as_slice)
    }

    pub fn sentences(&self) -> impl Iterator<Item = (u64, &[String])> {
        self.sentences.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Sentence ids for an entity, ascending. Empty when none.
    pub fn sentence_ids(&self, entity: usize) -> &[u64] {
        self.by_entity.get(&entity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entity_sentences(&self, entity: usize) -> Vec<&[String]> {
        self.sentence_ids(entity)
            .iter()
            .filter_map(|sid| self.sentence(*sid))
            .collect()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn linked_entities(&self) -> impl Iterator<Item = (usize, &[u64])> {
        self.by_entity.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Copies each entity's sentence ids into the graph's entity records.
    pub fn attach(&self, g: &mut KnowledgeGraph) {
        for e in 0..g.num_entities() {
            g.set_context_ids(e, self.sentence_ids(e).to_vec());
        }
    }
}
