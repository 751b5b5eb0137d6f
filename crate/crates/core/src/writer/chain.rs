use serde::{Deserialize, Serialize};

use super::beam::{beam_search, BeamOptions, Decoded, TaggedToken};
use super::model::Source;
use super::params::WriterModel;
use crate::error::{Error, Result};
use crate::kg::{match_title_entities, tokenize, KnowledgeGraph};
use crate::link::{related_entities, RELATED_ENTITY_LIMIT};

/// Anything that turns an input text plus related entity names into output.
pub trait StageWriter {
    fn write(&self, input: &[String], entities: &[String]) -> Result<Decoded>;
}

/// A trained writer decoded with beam search.
pub struct BeamWriter<'a> {
    pub model: &'a WriterModel,
    pub options: BeamOptions,
}

impl StageWriter for BeamWriter<'_> {
    fn write(&self, input: &[String], entities: &[String]) -> Result<Decoded> {
        let src = Source::new(self.model, input, entities, self.options.max_len)?;
        beam_search(self.model, &src, &self.options)
    }
}

/// Writers for the three chained tasks.
pub struct ChainWriters<'a> {
    pub title_to_abstract: &'a dyn StageWriter,
    pub abstract_to_conclusion: &'a dyn StageWriter,
    pub conclusion_to_title: &'a dyn StageWriter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedEntity {
    pub name: String,
    pub confidence: f64,
}

/// One stage of the chain: the entities given as memory and the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub input_entities: Vec<String>,
    pub related_entities: Vec<RelatedEntity>,
    pub text: String,
    pub tokens: Vec<TaggedToken>,
}

/// Title → abstract → conclusion and future work → new title → second
/// abstract. Later stages are absent when an earlier one failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<StageOutput>,
    pub conclusion_future_work: Option<StageOutput>,
    pub new_title: Option<StageOutput>,
    pub second_abstract: Option<StageOutput>,
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    /// Stages in chain order, present ones only.
    pub fn stages(&self) -> Vec<&StageOutput> {
        [
            &self.abstract_text,
            &self.conclusion_future_work,
            &self.new_title,
            &self.second_abstract,
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

/// Entities matched in `tokens` and their top related entities in `kg`.
pub fn entities_for(tokens: &[String], kg: &KnowledgeGraph, limit: usize) -> (Vec<String>, Vec<RelatedEntity>) {
    let matches = match_title_entities(tokens, kg);
    let ids: Vec<usize> = matches.iter().map(|m| m.entity).collect();
    let name = |id: usize| {
        kg.entity(id)
            .map(|e| e.surface_name.to_lowercase())
            .unwrap_or_default()
    };
    let input = ids.iter().map(|&id| name(id)).collect();
    let related = related_entities(&ids, kg, limit)
        .into_iter()
        .map(|(id, confidence)| RelatedEntity {
            name: name(id),
            confidence,
        })
        .collect();
    (input, related)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub related_limit: usize,
    pub second_abstract: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            related_limit: RELATED_ENTITY_LIMIT,
            second_abstract: true,
        }
    }
}

/// Runs the incremental writing chain on `title` over the enriched graph.
/// Every stage retrieves related entities for its own input text.
pub fn generate_chain(
    title: &str,
    kg: &KnowledgeGraph,
    writers: &ChainWriters<'_>,
    opts: &ChainOptions,
) -> Result<GenerationRecord> {
    let tokens = tokenize(title);
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty title".into()));
    }
    let mut record = GenerationRecord {
        title: tokens.join(" "),
        abstract_text: None,
        conclusion_future_work: None,
        new_title: None,
        second_abstract: None,
        error: None,
    };
    let run = |input: &[String], writer: &dyn StageWriter| -> Result<StageOutput> {
        let (input_entities, related) = entities_for(input, kg, opts.related_limit);
        let names: Vec<String> = related.iter().map(|r| r.name.clone()).collect();
        let out = writer.write(input, &names)?;
        Ok(StageOutput {
            input_entities,
            related_entities: related,
            text: out.words().join(" "),
            tokens: out.tokens,
        })
    };
    let mut stages: Vec<(&str, &dyn StageWriter)> = vec![
        ("abstract", writers.title_to_abstract),
        ("conclusion_future_work", writers.abstract_to_conclusion),
        ("new_title", writers.conclusion_to_title),
    ];
    if opts.second_abstract {
        stages.push(("second_abstract", writers.title_to_abstract));
    }
    let mut input = tokens;
    for (i, (name, writer)) in stages.into_iter().enumerate() {
        let out = run(&input, writer)?;
        let empty = out.tokens.is_empty();
        input = out.tokens.iter().map(|t| t.token.clone()).collect();
        let slot = match i {
            0 => &mut record.abstract_text,
            1 => &mut record.conclusion_future_work,
            2 => &mut record.new_title,
            _ => &mut record.second_abstract,
        };
        *slot = Some(out);
        if empty {
            record.error = Some(format!("stage {name} produced empty output"));
            break;
        }
    }
    Ok(record)
}
