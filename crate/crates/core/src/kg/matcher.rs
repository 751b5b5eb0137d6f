use std::collections::HashMap;

use super::graph::KnowledgeGraph;

/// An entity mention covering `tokens[start..end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TitleMatch {
    pub entity: usize,
    pub start: usize,
    pub end: usize,
}

/// Case-insensitive dictionary of entity surface names.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, usize>,
    max_len: usize,
}

impl Lexicon {
    /// When two entities share a surface name the lower id wins.
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        let mut lex = Lexicon::default();
        for e in g.entities() {
            lex.insert(&e.surface_name, e.id);
        }
        lex
    }

    pub fn insert(&mut self, surface: &str, entity: usize) {
        let key: Vec<String> = surface.split_whitespace().map(str::to_lowercase).collect();
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries
            .entry(key)
            .and_modify(|e| *e = (*e).min(entity))
            .or_insert(entity);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Left-to-right scan taking the longest entry at each position.
    pub fn find(&self, tokens: &[String]) -> Vec<TitleMatch> {
        let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            let longest = (1..=self.max_len.min(lowered.len() - i))
                .rev()
                .find_map(|n| self.entries.get(&lowered[i..i + n]).map(|&e| (n, e)));
            match longest {
                Some((n, entity)) => {
                    out.push(TitleMatch {
                        entity,
                        start: i,
                        end: i + n,
                    });
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

pub fn match_title_entities(title_tokens: &[String], g: &KnowledgeGraph) -> Vec<TitleMatch> {
    Lexicon::from_graph(g).find(title_tokens)
}
