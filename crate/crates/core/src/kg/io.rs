//! Line-oriented text formats for graphs and context sentences.
//!
//! Triples: UTF-8, tab-separated, `#` lines and blank lines ignored.
//!
//! ```text
//! head_external_id  head_name  head_type  relation  tail_external_id  tail_name  tail_type  [confidence]
//! ```
//!
//! The eighth column is optional on input (defaults to 1) and always written
//! on output. Sentences: one JSON object per line,
//! `{"sid": 3, "tokens": ["..."], "entities": ["MESH:D0001"]}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::context::ContextIndex;
use super::graph::{EntityType, KnowledgeGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TripleRecord {
    pub head_external_id: String,
    pub head_name: String,
    pub head_type: EntityType,
    pub relation: String,
    pub tail_external_id: String,
    pub tail_name: String,
    pub tail_type: EntityType,
    pub confidence: f64,
}

impl TripleRecord {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 && cols.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 7 or 8 tab-separated columns, found {}", cols.len()),
            });
        }
        let ty = |s: &str| {
            s.parse::<EntityType>()
                .map_err(|msg| Error::Parse { line: line_no, msg })
        };
        let confidence = match cols.get(7) {
            Some(c) => c.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad confidence `{c}`: {e}"),
            })?,
            None => 1.0,
        };
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("confidence {confidence} outside [0,1]"),
            });
        }
        for (i, c) in cols.iter().enumerate().take(7) {
            if c.trim().is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("column {} is empty", i + 1),
                });
            }
        }
        Ok(TripleRecord {
            head_external_id: cols[0].trim().to_string(),
            head_name: cols[1].trim().to_string(),
            head_type: ty(cols[2])?,
            relation: cols[3].trim().to_string(),
            tail_external_id: cols[4].trim().to_string(),
            tail_name: cols[5].trim().to_string(),
            tail_type: ty(cols[6])?,
            confidence,
        })
    }
}

/// Builds a graph from records; ids follow first appearance.
pub fn ingest_records<I>(records: I) -> Result<KnowledgeGraph>
where
    I: IntoIterator<Item = TripleRecord>,
{
    let mut g = KnowledgeGraph::new();
    for r in records {
        let h = g.intern_entity(&r.head_external_id, &r.head_name, r.head_type)?;
        let t = g.intern_entity(&r.tail_external_id, &r.tail_name, r.tail_type)?;
        let rel = g.intern_relation(&r.relation);
        g.insert_triple(h, rel, t, r.confidence)?;
    }
    Ok(g)
}

pub fn ingest_triples<R: BufRead>(reader: R) -> Result<KnowledgeGraph> {
    let mut g = KnowledgeGraph::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let r = TripleRecord::parse(trimmed, line_no)?;
        let h = g
            .intern_entity(&r.head_external_id, &r.head_name, r.head_type)
            .map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
        let t = g
            .intern_entity(&r.tail_external_id, &r.tail_name, r.tail_type)
            .map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
        let rel = g.intern_relation(&r.relation);
        g.insert_triple(h, rel, t, r.confidence)?;
    }
    Ok(g)
}

/// Writes every triple with its confidence as the eighth column.
pub fn write_graph<W: Write>(g: &KnowledgeGraph, out: &mut W) -> std::io::Result<()> {
    for t in g.triples() {
        let h = &g.entities()[t.head];
        let tl = &g.entities()[t.tail];
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            h.external_id,
            h.surface_name,
            h.entity_type,
            g.relations()[t.relation].subtype_name,
            tl.external_id,
            tl.surface_name,
            tl.entity_type,
            t.confidence
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sid: u64,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
}

/// Builds the context index; mentions of unknown entities are logged and
/// skipped.
pub fn ingest_sentence_records<I>(records: I, g: &KnowledgeGraph) -> ContextIndex
where
    I: IntoIterator<Item = SentenceRecord>,
{
    let mut idx = ContextIndex::new();
    for r in records {
        idx.add_sentence(r.sid, &r.tokens);
        for ext in &r.entities {
            match g.entity_by_external(ext) {
                Some(e) => idx.link(e, r.sid),
                None => {
                    log::warn!("sentence {}: unknown entity {ext}, skipped", r.sid);
                    idx.skipped_mentions.push((r.sid, ext.clone()));
                }
            }
        }
    }
    idx
}

pub fn ingest_sentences<R: BufRead>(reader: R, g: &KnowledgeGraph) -> Result<ContextIndex> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SentenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        records.push(r);
    }
    Ok(ingest_sentence_records(records, g))
}

/// Writes the index back as sentence records, mentions in entity-id order.
pub fn write_sentences<W: Write>(idx: &ContextIndex, g: &KnowledgeGraph, out: &mut W) -> Result<()> {
    let mut mentions: std::collections::BTreeMap<u64, Vec<String>> = Default::default();
    for (e, sids) in idx.linked_entities() {
        for sid in sids {
            mentions
                .entry(*sid)
                .or_default()
                .push(g.entity(e)?.external_id.clone());
        }
    }
    for (sid, tokens) in idx.sentences() {
        let rec = SentenceRecord {
            sid,
            tokens: tokens.to_vec(),
            entities: mentions.remove(&sid).unwrap_or_default(),
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<sentences>", e))?;
    }
    Ok(())
}
