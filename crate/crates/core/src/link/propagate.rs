use std::collections::{BTreeMap, HashSet};

use super::model::{entity_similarity, EntityRepresentation};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

/// One round of neighbor propagation between similar entities.
///
/// For every unordered pair with similarity `≥ threshold`, each entity
/// receives the other's original outgoing edges `(relation, tail)` that it
/// lacks, with confidence equal to the similarity. Edges that would become
/// self-loops are not transferred. When several partners offer the same edge
/// the highest similarity is kept. Original triples keep confidence 1.
pub fn propagate_links(
    g: &KnowledgeGraph,
    reps: &[EntityRepresentation],
    threshold: f64,
) -> Result<KnowledgeGraph> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "similarity threshold {threshold} outside (0, 1]"
        )));
    }
    let n = g.num_entities();
    if reps.len() < n {
        return Err(Error::InvalidArgument(format!(
            "{} representations for {n} entities",
            reps.len()
        )));
    }
    let mut added: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let sim = entity_similarity(&reps[a], &reps[b]);
            if sim < threshold {
                continue;
            }
            for (to, from) in [(a, b), (b, a)] {
                for edge in g.neighbors(from)? {
                    if edge.tail == to || g.contains(to, edge.relation, edge.tail) {
                        continue;
                    }
                    let slot = added.entry((to, edge.relation, edge.tail)).or_insert(sim);
                    *slot = slot.max(sim);
                }
            }
        }
    }
    let mut out = g.clone();
    for ((h, r, t), conf) in added {
        out.insert_triple(h, r, t, conf)?;
    }
    Ok(out)
}

/// Neighbors of the title entities ranked by confidence (descending, ties by
/// entity id), excluding the title entities themselves.
pub fn related_entities(title_entities: &[usize], g: &KnowledgeGraph, limit: usize) -> Vec<(usize, f64)> {
    let title: HashSet<usize> = title_entities.iter().copied().collect();
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for &e in title_entities {
        let Ok(edges) = g.neighbors(e) else { continue };
        for edge in edges {
            if title.contains(&edge.tail) {
                continue;
            }
            let slot = best.entry(edge.tail).or_insert(edge.confidence);
            *slot = slot.max(edge.confidence);
        }
    }
    let mut ranked: Vec<(usize, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(limit.max(1));
    ranked
}
