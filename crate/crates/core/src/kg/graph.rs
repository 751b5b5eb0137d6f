use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    Disease,
    Chemical,
    Gene,
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "Disease" => Ok(EntityType::Disease),
            "Chemical" => Ok(EntityType::Chemical),
            "Gene" => Ok(EntityType::Gene),
            other => Err(format!("unknown entity type `{other}`")),
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityType::Disease => "Disease",
            EntityType::Chemical => "Chemical",
            EntityType::Gene => "Gene",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: usize,
    pub surface_name: String,
    pub entity_type: EntityType,
    pub external_id: String,
    pub context_sentence_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub subtype_id: usize,
    pub subtype_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
    pub confidence: f64,
}

impl Triple {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.head, self.relation, self.tail)
    }
}

/// Outgoing edge as seen from its head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub relation: usize,
    pub tail: usize,
    pub confidence: f64,
}

/// Directed, typed knowledge graph. Immutable once built; enrichment
/// produces a new value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    by_external: HashMap<String, usize>,
    relations: Vec<Relation>,
    by_relation_name: HashMap<String, usize>,
    triples: Vec<Triple>,
    triple_index: HashMap<(usize, usize, usize), usize>,
    adjacency: Vec<Vec<Edge>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the existing id for `external_id`, or registers a new entity.
    pub fn intern_entity(
        &mut self,
        external_id: &str,
        surface_name: &str,
        entity_type: EntityType,
    ) -> Result<usize> {
        if let Some(&id) = self.by_external.get(external_id) {
            let e = &self.entities[id];
            if e.entity_type != entity_type {
                return Err(Error::InvalidArgument(format!(
                    "entity {external_id} declared as both {} and {entity_type}",
                    e.entity_type
                )));
            }
            return Ok(id);
        }
        let id = self.entities.len();
        self.entities.push(Entity {
            id,
            surface_name: surface_name.to_string(),
            entity_type,
            external_id: external_id.to_string(),
            context_sentence_ids: Vec::new(),
        });
        self.by_external.insert(external_id.to_string(), id);
        self.adjacency.push(Vec::new());
        Ok(id)
    }

    pub fn intern_relation(&mut self, name: &str) -> usize {
        if let Some(&id) = self.by_relation_name.get(name) {
            return id;
        }
        let id = self.relations.len();
        self.relations.push(Relation {
            subtype_id: id,
            subtype_name: name.to_string(),
        });
        self.by_relation_name.insert(name.to_string(), id);
        id
    }

    /// Inserts a triple unless it is already present. Returns whether it was
    /// new.
    pub fn insert_triple(&mut self, head: usize, relation: usize, tail: usize, confidence: f64) -> Result<bool> {
        let n = self.entities.len();
        if head >= n {
            return Err(Error::UnknownEntity(format!("#{head}")));
        }
        if tail >= n {
            return Err(Error::UnknownEntity(format!("#{tail}")));
        }
        if relation >= self.relations.len() {
            return Err(Error::UnknownRelation(relation));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidArgument(format!("confidence {confidence} outside [0,1]")));
        }
        let key = (head, relation, tail);
        if self.triple_index.contains_key(&key) {
            return Ok(false);
        }
        self.triple_index.insert(key, self.triples.len());
        self.triples.push(Triple {
            head,
            relation,
            tail,
            confidence,
        });
        self.adjacency[head].push(Edge {
            relation,
            tail,
            confidence,
        });
        Ok(true)
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, id: usize) -> Result<&Entity> {
        self.entities
            .get(id)
            .ok_or_else(|| Error::UnknownEntity(format!("#{id}")))
    }

    pub fn entity_by_external(&self, external_id: &str) -> Option<usize> {
        self.by_external.get(external_id).copied()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation_by_name(&self, name: &str) -> Option<usize> {
        self.by_relation_name.get(name).copied()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, head: usize, relation: usize, tail: usize) -> bool {
        self.triple_index.contains_key(&(head, relation, tail))
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Outgoing edges of `e`, in insertion order.
    pub fn neighbors(&self, e: usize) -> Result<&[Edge]> {
        self.adjacency
            .get(e)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownEntity(format!("#{e}")))
    }

    /// Distinct tail entities of `e`, sorted by id.
    pub fn neighbor_entities(&self, e: usize) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = self.neighbors(e)?.iter().map(|edge| edge.tail).collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub(crate) fn set_context_ids(&mut self, e: usize, ids: Vec<u64>) {
        self.entities[e].context_sentence_ids = ids;
    }

    /// Copy of the graph keeping only triples with confidence exactly 1.
    pub fn original_only(&self) -> KnowledgeGraph {
        let mut g = self.skeleton();
        for t in &self.triples {
            if t.confidence == 1.0 {
                g.insert_triple(t.head, t.relation, t.tail, 1.0).expect("ids valid");
            }
        }
        g
    }

    /// Same entities and relations, no triples.
    pub fn skeleton(&self) -> KnowledgeGraph {
        KnowledgeGraph {
            entities: self.entities.clone(),
            by_external: self.by_external.clone(),
            relations: self.relations.clone(),
            by_relation_name: self.by_relation_name.clone(),
            triples: Vec::new(),
            triple_index: HashMap::new(),
            adjacency: vec![Vec::new(); self.entities.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_adjacency() {
        let mut g = KnowledgeGraph::new();
        let a = g.intern_entity("D1", "a", EntityType::Disease).unwrap();
        let b = g.intern_entity("C1", "b", EntityType::Chemical).unwrap();
        let r = g.intern_relation("marker");
        for _ in 0..3 {
            g.insert_triple(a, r, b, 1.0).unwrap();
        }
        assert_eq!(g.triples().len(), 1);
        assert_eq!(g.neighbors(a).unwrap().len(), 1);
        assert!(g.neighbors(b).unwrap().is_empty());
        assert!(g.neighbors(7).is_err());
    }

    #[test]
    fn type_conflict_rejected() {
        let mut g = KnowledgeGraph::new();
        g.intern_entity("X", "x", EntityType::Gene).unwrap();
        assert!(g.intern_entity("X", "x", EntityType::Disease).is_err());
    }
}
