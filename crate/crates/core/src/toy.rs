//! Small synthetic and bundled data sets for examples and tests.

use crate::writer::CorpusPair;
use crate::kg::{
    ingest_records, ingest_sentence_records, ContextIndex, EntityType, KnowledgeGraph,
    SentenceRecord, TripleRecord,
};

/// A two-cluster graph with held-out triples and a planted twin pair.
#[derive(Debug, Clone)]
pub struct ClusterKg {
    /// Training graph (held-out triples removed).
    pub train: KnowledgeGraph,
    /// Full graph, used to reject false corruptions during evaluation.
    pub full: KnowledgeGraph,
    pub context: ContextIndex,
    /// `(head, relation, tail)` ids, valid in both graphs.
    pub held_out: Vec<(usize, usize, usize)>,
    /// The planted twins.
    pub twins: (usize, usize),
    /// Edges each twin should inherit from the other: `(entity, relation, tail)`.
    pub transferable: Vec<(usize, usize, usize)>,
}

fn rec(h: &str, ht: EntityType, rel: &str, t: &str, tt: EntityType) -> TripleRecord {
    TripleRecord {
        head_external_id: format!("X:{h}"),
        head_name: h.to_string(),
        head_type: ht,
        relation: rel.to_string(),
        tail_external_id: format!("X:{t}"),
        tail_name: t.to_string(),
        tail_type: tt,
        confidence: 1.0,
    }
}

/// Two 10-entity clusters, 40 triples in total.
///
/// Cluster A (genes `ga0..ga9`) is an ordered chain with `next`, `skip2`
/// and a few `skip3` edges. Cluster B (chemicals `cb0..cb9`) holds the twins
/// `cb0` and `cb1`, which bind three common partners and one private partner
/// each, plus a chain over `cb2..cb9`. The twins share their context
/// sentences; every other entity has its own.
pub fn cluster_kg() -> ClusterKg {
    use EntityType::{Chemical, Gene};
    let a = |i: usize| format!("ga{i}");
    let b = |i: usize| format!("cb{i}");
    let mut records = Vec::new();
    for i in 0..9 {
        records.push(rec(&a(i), Gene, "next", &a(i + 1), Gene));
    }
    for i in 0..8 {
        records.push(rec(&a(i), Gene, "skip2", &a(i + 2), Gene));
    }
    for i in 0..3 {
        records.push(rec(&a(i), Gene, "skip3", &a(i + 3), Gene));
    }
    for t in [2, 3, 4, 5] {
        records.push(rec(&b(0), Chemical, "binds", &b(t), Chemical));
    }
    for t in [2, 3, 4, 6] {
        records.push(rec(&b(1), Chemical, "binds", &b(t), Chemical));
    }
    for i in 2..9 {
        records.push(rec(&b(i), Chemical, "next", &b(i + 1), Chemical));
    }
    for i in 2..7 {
        records.push(rec(&b(i), Chemical, "skip2", &b(i + 2), Chemical));
    }
    debug_assert_eq!(records.len(), 40);

    let held_names = [
        (a(3), "next", a(4)),
        (a(6), "next", a(7)),
        (a(1), "skip2", a(3)),
        (a(5), "skip2", a(7)),
    ];
    let full = ingest_records(records.clone()).expect("valid records");
    let held_keys: Vec<(String, String, String)> = held_names
        .iter()
        .map(|(h, r, t)| (format!("X:{h}"), r.to_string(), format!("X:{t}")))
        .collect();
    let train_records: Vec<TripleRecord> = records
        .into_iter()
        .filter(|r| {
            !held_keys.iter().any(|(h, rel, t)| {
                &r.head_external_id == h && &r.relation == rel && &r.tail_external_id == t
            })
        })
        .collect();
    let mut train = full.skeleton();
    for r in &train_records {
        let h = full.entity_by_external(&r.head_external_id).unwrap();
        let t = full.entity_by_external(&r.tail_external_id).unwrap();
        let rel = full.relation_by_name(&r.relation).unwrap();
        train.insert_triple(h, rel, t, 1.0).unwrap();
    }
    let id = |name: &str| full.entity_by_external(&format!("X:{name}")).unwrap();
    let rid = |name: &str| full.relation_by_name(name).unwrap();
    let held_out = held_names
        .iter()
        .map(|(h, r, t)| (id(h), rid(r), id(t)))
        .collect();

    let mut sentences = Vec::new();
    let mut sid = 0u64;
    let mut push = |tokens: &str, ents: &[String]| {
        sentences.push(SentenceRecord {
            sid,
            tokens: tokens.split_whitespace().map(String::from).collect(),
            entities: ents.iter().map(|e| format!("X:{e}")).collect(),
        });
        sid += 1;
    };
    for i in 0..10 {
        let name = a(i);
        push(
            &format!("{name} gene expression step {i} in the signaling cascade"),
            std::slice::from_ref(&name),
        );
    }
    for i in 2..10 {
        let name = b(i);
        push(
            &format!("{name} compound number {i} alters membrane transport"),
            std::slice::from_ref(&name),
        );
    }
    let twins = [b(0), b(1)];
    push("divalent metal ions bind cd14 and neuropilin receptors", &twins);
    push("metal ion supplementation modulates receptor binding", &twins);
    let context = ingest_sentence_records(sentences, &full);

    let twin_ids = (id(&b(0)), id(&b(1)));
    let binds = rid("binds");
    let transferable = vec![(twin_ids.0, binds, id(&b(6))), (twin_ids.1, binds, id(&b(5)))];
    ClusterKg {
        train,
        full,
        context,
        held_out,
        twins: twin_ids,
        transferable,
    }
}

const TOY_TRIPLES: &str = include_str!("../data/toy/triples.tsv");
const TOY_SENTENCES: &str = include_str!("../data/toy/sentences.jsonl");
const TOY_TITLE2ABSTRACT: &str = include_str!("../data/toy/title2abstract.jsonl");
const TOY_ABSTRACT2CONCLUSION: &str = include_str!("../data/toy/abstract2conclusion.jsonl");
const TOY_CONCLUSION2TITLE: &str = include_str!("../data/toy/conclusion2title.jsonl");

/// The bundled 20-paper biomedical toy corpus.
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub graph: KnowledgeGraph,
    pub context: ContextIndex,
    pub title2abstract: Vec<CorpusPair>,
    pub abstract2conclusion: Vec<CorpusPair>,
    pub conclusion2title: Vec<CorpusPair>,
}

pub fn toy_corpus() -> ToyCorpus {
    let graph = crate::kg::ingest_triples(TOY_TRIPLES.as_bytes()).expect("bundled triples");
    let context = crate::kg::ingest_sentences(TOY_SENTENCES.as_bytes(), &graph).expect("bundled sentences");
    let load = |s: &str| crate::writer::read_corpus(s.as_bytes()).expect("bundled corpus");
    ToyCorpus {
        title2abstract: load(TOY_TITLE2ABSTRACT),
        abstract2conclusion: load(TOY_ABSTRACT2CONCLUSION),
        conclusion2title: load(TOY_CONCLUSION2TITLE),
        graph,
        context,
    }
}

impl ToyCorpus {
    pub fn pairs(&self, task: crate::writer::Task) -> &[CorpusPair] {
        use crate::writer::Task;
        match task {
            Task::Title2Abstract => &self.title2abstract,
            Task::Abstract2Conclusion => &self.abstract2conclusion,
            Task::Conclusion2Title => &self.conclusion2title,
        }
    }
}

/// Titles used for chained generation demos.
pub const TOY_TITLES: &str = include_str!("../data/toy/titles.txt");
