#![allow(dead_code)]

use kgwriter::kg::{ingest_records, ContextIndex, EntityType, KnowledgeGraph, TripleRecord};
use kgwriter::link::{LinkConfig, LinkModel};
use kgwriter::numerics::{seeded_rng, ParamStore, Tensor};
use kgwriter::writer::{default_stopwords, CorpusPair, Vocabulary, WriterDims, WriterModel};

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn tiny_dims() -> WriterDims {
    WriterDims {
        embedding: 4,
        hidden: 6,
        attention: 5,
        init_hops: 3,
        memory_hops: 3,
    }
}

/// Writer over an explicit word list (specials are added).
pub fn writer_with_words(words: &[&str], entities: &[&str], dims: WriterDims, seed: u64) -> WriterModel {
    let mut tokens = strings(&["<pad>", "<s>", "</s>", "<unk>"]);
    tokens.extend(words.iter().map(|w| w.to_string()));
    let vocab = Vocabulary::from_tokens(tokens, default_stopwords());
    let mut rng = seeded_rng(seed);
    WriterModel::new(dims, vocab, strings(entities), &mut rng).unwrap()
}

pub fn writer_for(corpus: &[CorpusPair], dims: WriterDims, seed: u64) -> WriterModel {
    let mut rng = seeded_rng(seed);
    WriterModel::for_corpus(dims, corpus, 1, default_stopwords(), 120, &mut rng).unwrap()
}

/// Scales every parameter by `factor`, for gradients well above roundoff.
pub fn scale_params(store: &mut ParamStore, factor: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for x in store.get_mut(id).data_mut() {
            *x *= factor;
        }
    }
}

pub fn set_param(store: &mut ParamStore, name: &str, data: &[f64]) {
    let id = store.find(name).unwrap_or_else(|| panic!("no parameter {name}"));
    let t = store.get_mut(id);
    assert_eq!(t.len(), data.len(), "{name}");
    t.data_mut().copy_from_slice(data);
}

pub fn zero_params(store: &mut ParamStore) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.get_mut(id).data_mut().fill(0.0);
    }
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Compares `grads` against central differences of `loss` for every
/// element of every parameter. Relative error is
/// `|g − fd| / max(|g|, |fd|, floor)`.
pub fn finite_difference_check<M>(
    model: &mut M,
    store: impl Fn(&mut M) -> &mut ParamStore,
    loss: impl Fn(&M) -> f64,
    grads: &[Tensor],
    eps: f64,
    floor: f64,
) -> FdReport {
    let ids: Vec<_> = store(model).ids().collect();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for id in ids {
        let n = store(model).get(id).len();
        for i in 0..n {
            let orig = store(model).get(id).data()[i];
            store(model).get_mut(id).data_mut()[i] = orig + eps;
            let up = loss(model);
            store(model).get_mut(id).data_mut()[i] = orig - eps;
            let down = loss(model);
            store(model).get_mut(id).data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * eps);
            let g = grads[id.index()].data()[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = format!("{}[{i}]: analytic {g:e}, numeric {fd:e}", store(model).name(id));
            }
        }
    }
    report
}

fn rec(h: (&str, &str, EntityType), rel: &str, t: (&str, &str, EntityType)) -> TripleRecord {
    TripleRecord {
        head_external_id: h.0.into(),
        head_name: h.1.into(),
        head_type: h.2,
        relation: rel.into(),
        tail_external_id: t.0.into(),
        tail_name: t.1.into(),
        tail_type: t.2,
        confidence: 1.0,
    }
}

/// Calcium and zinc with shared and distinct neighbors.
pub fn shared_neighbors() -> KnowledgeGraph {
    use EntityType::{Chemical, Gene};
    let ca = ("MESH:D002118", "calcium", Chemical);
    let zn = ("MESH:D015032", "zinc", Chemical);
    let cd14 = ("GENE:929", "cd14 molecule", Gene);
    let nrp2 = ("GENE:8828", "neuropilin 2", Gene);
    let tp53 = ("GENE:7157", "tp53", Gene);
    let egfr = ("GENE:1956", "egfr", Gene);
    ingest_records(vec![
        rec(ca, "affects_binding", tp53),
        rec(zn, "affects_binding", cd14),
        rec(zn, "increases_expression", nrp2),
        rec(ca, "increases_expression", egfr),
        rec(zn, "increases_expression", tp53),
        rec(ca, "affects_binding", cd14),
    ])
    .unwrap()
}

pub fn small_link_config() -> LinkConfig {
    LinkConfig {
        entity_dim: 4,
        heads: 2,
        head_hidden: 2,
        text_emb: 3,
        text_hidden: 2,
        leaky_relu_alpha: 0.2,
        margin: 1.0,
    }
}

pub fn shared_context(g: &KnowledgeGraph) -> ContextIndex {
    let mut ctx = ContextIndex::new();
    ctx.add_sentence(0, &toks("calcium binds cd14 molecule"));
    ctx.add_sentence(1, &toks("zinc raises neuropilin 2 levels"));
    ctx.add_sentence(2, &toks("zinc and calcium"));
    let id = |x: &str| g.entity_by_external(x).unwrap();
    ctx.link(id("MESH:D002118"), 0);
    ctx.link(id("GENE:929"), 0);
    ctx.link(id("MESH:D015032"), 1);
    ctx.link(id("GENE:8828"), 1);
    ctx.link(id("MESH:D015032"), 2);
    ctx.link(id("MESH:D002118"), 2);
    ctx
}

pub fn small_link_model(g: &KnowledgeGraph, ctx: &ContextIndex, seed: u64) -> LinkModel {
    let mut rng = seeded_rng(seed);
    LinkModel::new(small_link_config(), g, ctx, &mut rng)
}
