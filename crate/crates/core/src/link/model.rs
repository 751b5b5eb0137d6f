use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{ContextIndex, KnowledgeGraph};
use crate::numerics::{
    read_model_file, write_model_file, GruParams, GruVars, ParamId, ParamStore, Tape, Tensor, Var,
};

/// Sizes and loss settings for the link predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub entity_dim: usize,
    pub heads: usize,
    pub head_hidden: usize,
    pub text_emb: usize,
    pub text_hidden: usize,
    pub leaky_relu_alpha: f64,
    pub margin: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            entity_dim: 64,
            heads: 8,
            head_hidden: 8,
            text_emb: 128,
            text_hidden: 64,
            leaky_relu_alpha: 0.2,
            margin: 1.0,
        }
    }
}

impl LinkConfig {
    /// Width of the graph vector, and of the text vector.
    pub fn rep_dim(&self) -> usize {
        self.heads * self.head_hidden
    }
}

/// Graph-structure and context-text encodings of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRepresentation {
    pub graph_vector: Vec<f64>,
    pub text_vector: Vec<f64>,
    pub combined: Vec<f64>,
}

impl EntityRepresentation {
    pub fn new(graph_vector: Vec<f64>, text_vector: Vec<f64>) -> Self {
        let mut combined = graph_vector.clone();
        combined.extend_from_slice(&text_vector);
        EntityRepresentation {
            graph_vector,
            text_vector,
            combined,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LinkIds {
    pub entity_emb: ParamId,
    pub relation_emb: ParamId,
    pub head_w: Vec<ParamId>,
    pub head_a: Vec<ParamId>,
    pub token_emb: ParamId,
    pub text_fwd: GruParams,
    pub text_bwd: GruParams,
    pub text_proj: ParamId,
    pub text_bias: ParamId,
    pub score_proj: ParamId,
}

#[derive(Serialize, Deserialize)]
struct LinkMeta {
    config: LinkConfig,
    num_entities: usize,
    num_relations: usize,
    text_vocab: Vec<String>,
}

/// Learnable state of the link predictor plus its text vocabulary.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub config: LinkConfig,
    pub params: ParamStore,
    pub(crate) ids: LinkIds,
    num_entities: usize,
    num_relations: usize,
    text_vocab: Vec<String>,
    token_index: HashMap<String, usize>,
}

pub(crate) struct LinkVars {
    entity_emb: Var,
    relation_emb: Var,
    head_w: Vec<Var>,
    head_a: Vec<Var>,
    token_emb: Var,
    text_fwd: GruVars,
    text_bwd: GruVars,
    text_proj: Var,
    text_bias: Var,
    score_proj: Var,
}

const UNK: &str = "<unk>";

impl LinkModel {
    /// Fresh parameters sized for `g`, with a token vocabulary drawn from
    /// `ctx`.
    pub fn new<R: Rng + ?Sized>(
        config: LinkConfig,
        g: &KnowledgeGraph,
        ctx: &ContextIndex,
        rng: &mut R,
    ) -> Self {
        let mut vocab: Vec<String> = ctx
            .sentences()
            .flat_map(|(_, toks)| toks.iter().cloned())
            .collect();
        vocab.sort();
        vocab.dedup();
        vocab.retain(|t| t != UNK);
        vocab.insert(0, UNK.to_string());
        Self::with_vocab(config, g.num_entities(), g.num_relations(), vocab, rng)
    }

    fn with_vocab<R: Rng + ?Sized>(
        config: LinkConfig,
        num_entities: usize,
        num_relations: usize,
        text_vocab: Vec<String>,
        rng: &mut R,
    ) -> Self {
        let c = &config;
        let mut store = ParamStore::new();
        let entity_emb = store.add_uniform("entity_emb", &[num_entities.max(1), c.entity_dim], rng);
        let relation_emb =
            store.add_uniform("relation_emb", &[num_relations.max(1), c.rep_dim()], rng);
        let mut head_w = Vec::new();
        let mut head_a = Vec::new();
        for k in 0..c.heads {
            head_w.push(store.add_uniform(format!("gat.{k}.w"), &[c.head_hidden, c.entity_dim], rng));
            head_a.push(store.add_uniform(format!("gat.{k}.a"), &[2 * c.head_hidden], rng));
        }
        let token_emb = store.add_uniform("text.token_emb", &[text_vocab.len(), c.text_emb], rng);
        let text_fwd = GruParams::register(&mut store, "text.fwd", c.text_emb, c.text_hidden, rng);
        let text_bwd = GruParams::register(&mut store, "text.bwd", c.text_emb, c.text_hidden, rng);
        let text_proj = store.add_uniform("text.proj", &[c.rep_dim(), 2 * c.text_hidden], rng);
        let text_bias = store.add_uniform("text.bias", &[c.rep_dim()], rng);
        let score_proj = store.add_uniform("score.proj", &[c.rep_dim(), 2 * c.rep_dim()], rng);
        let token_index = text_vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        LinkModel {
            config,
            params: store,
            ids: LinkIds {
                entity_emb,
                relation_emb,
                head_w,
                head_a,
                token_emb,
                text_fwd,
                text_bwd,
                text_proj,
                text_bias,
                score_proj,
            },
            num_entities,
            num_relations,
            text_vocab,
            token_index,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn text_vocab(&self) -> &[String] {
        &self.text_vocab
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.find(name)
    }

    pub(crate) fn token_id(&self, tok: &str) -> usize {
        self.token_index.get(tok).copied().unwrap_or(0)
    }

    pub(crate) fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> LinkVars {
        self.bind_store(tape, &self.params)
    }

    /// Binds an alternate store with the same layout (used for perturbed
    /// copies in gradient checks).
    pub(crate) fn bind_store<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore) -> LinkVars {
        let ids = &self.ids;
        LinkVars {
            entity_emb: tape.param(store, ids.entity_emb),
            relation_emb: tape.param(store, ids.relation_emb),
            head_w: ids.head_w.iter().map(|&id| tape.param(store, id)).collect(),
            head_a: ids.head_a.iter().map(|&id| tape.param(store, id)).collect(),
            token_emb: tape.param(store, ids.token_emb),
            text_fwd: ids.text_fwd.bind(tape, store),
            text_bwd: ids.text_bwd.bind(tape, store),
            text_proj: tape.param(store, ids.text_proj),
            text_bias: tape.param(store, ids.text_bias),
            score_proj: tape.param(store, ids.score_proj),
        }
    }

    /// Multi-head graph attention over `{e} ∪ neighbors(e)`.
    ///
    /// Per head `k`: `s_j = LeakyReLU(a_k · [W_k x_e ‖ W_k x_j])`, softmax over
    /// `j`, output `Σ_j w_j W_k x_j`; heads are concatenated.
    pub(crate) fn graph_var(
        &self,
        tape: &mut Tape<'_>,
        v: &LinkVars,
        g: &KnowledgeGraph,
        e: usize,
    ) -> Result<Var> {
        let mut members = g.neighbor_entities(e)?;
        if let Err(pos) = members.binary_search(&e) {
            members.insert(pos, e);
        }
        let embs: Vec<Var> = members.iter().map(|&j| tape.row(v.entity_emb, j)).collect();
        let self_pos = members.binary_search(&e).expect("inserted");
        let mut heads = Vec::with_capacity(self.config.heads);
        for k in 0..self.config.heads {
            let proj: Vec<Var> = embs.iter().map(|&x| tape.matvec(v.head_w[k], x)).collect();
            let scores: Vec<Var> = proj
                .iter()
                .map(|&pj| {
                    let pair = tape.concat(&[proj[self_pos], pj]);
                    let s = tape.dot(v.head_a[k], pair);
                    tape.leaky_relu(s, self.config.leaky_relu_alpha)
                })
                .collect();
            let s = tape.concat(&scores);
            let w = tape.softmax(s);
            heads.push(tape.weighted_sum(w, &proj));
        }
        Ok(tape.concat(&heads))
    }

    fn sentence_var(&self, tape: &mut Tape<'_>, v: &LinkVars, tokens: &[String]) -> Var {
        let h = self.config.text_hidden;
        let embs: Vec<Var> = tokens
            .iter()
            .map(|t| tape.row(v.token_emb, self.token_id(t)))
            .collect();
        let mut fwd = tape.constant(Tensor::zeros(&[h]));
        for &x in &embs {
            fwd = v.text_fwd.step(tape, x, fwd);
        }
        let mut bwd = tape.constant(Tensor::zeros(&[h]));
        for &x in embs.iter().rev() {
            bwd = v.text_bwd.step(tape, x, bwd);
        }
        tape.concat(&[fwd, bwd])
    }

    /// Bi-GRU over each context sentence, mean of final states, affine
    /// projection. Zero vector when the entity has no sentences.
    pub(crate) fn text_var(
        &self,
        tape: &mut Tape<'_>,
        v: &LinkVars,
        ctx: &ContextIndex,
        e: usize,
    ) -> Var {
        let sentences: Vec<&[String]> = ctx
            .entity_sentences(e)
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return tape.constant(Tensor::zeros(&[self.config.rep_dim()]));
        }
        let states: Vec<Var> = sentences
            .iter()
            .map(|s| self.sentence_var(tape, v, s))
            .collect();
        let total = tape.add_all(&states);
        let mean = tape.scale(total, 1.0 / states.len() as f64);
        let p = tape.matvec(v.text_proj, mean);
        tape.add(p, v.text_bias)
    }

    pub(crate) fn combined_var(
        &self,
        tape: &mut Tape<'_>,
        v: &LinkVars,
        g: &KnowledgeGraph,
        ctx: &ContextIndex,
        e: usize,
    ) -> Result<Var> {
        let gv = self.graph_var(tape, v, g, e)?;
        let tv = self.text_var(tape, v, ctx, e);
        Ok(tape.concat(&[gv, tv]))
    }

    /// `−‖P h + r − P t‖₂`.
    pub(crate) fn score_var(
        &self,
        tape: &mut Tape<'_>,
        v: &LinkVars,
        h: Var,
        relation: usize,
        t: Var,
    ) -> Result<Var> {
        if relation >= self.num_relations {
            return Err(Error::UnknownRelation(relation));
        }
        let r = tape.row(v.relation_emb, relation);
        Ok(score_vars(tape, v.score_proj, h, r, t))
    }

    pub fn encode_graph(&self, g: &KnowledgeGraph, e: usize) -> Result<Vec<f64>> {
        self.check_entity(e)?;
        let mut tape = Tape::new();
        let v = self.bind(&mut tape);
        let out = self.graph_var(&mut tape, &v, g, e)?;
        Ok(tape.data(out).to_vec())
    }

    pub fn encode_context(&self, ctx: &ContextIndex, e: usize) -> Vec<f64> {
        let mut tape = Tape::new();
        let v = self.bind(&mut tape);
        let out = self.text_var(&mut tape, &v, ctx, e);
        tape.data(out).to_vec()
    }

    pub fn represent(&self, g: &KnowledgeGraph, ctx: &ContextIndex, e: usize) -> Result<EntityRepresentation> {
        Ok(EntityRepresentation::new(
            self.encode_graph(g, e)?,
            self.encode_context(ctx, e),
        ))
    }

    /// Representations of every entity of `g`, indexed by entity id.
    pub fn represent_all(&self, g: &KnowledgeGraph, ctx: &ContextIndex) -> Result<Vec<EntityRepresentation>> {
        (0..g.num_entities())
            .map(|e| self.represent(g, ctx, e))
            .collect()
    }

    pub fn score_triple(
        &self,
        h: &EntityRepresentation,
        relation: usize,
        t: &EntityRepresentation,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let v = self.bind(&mut tape);
        let hv = tape.constant(Tensor::vector(h.combined.clone()));
        let tv = tape.constant(Tensor::vector(t.combined.clone()));
        let s = self.score_var(&mut tape, &v, hv, relation, tv)?;
        Ok(tape.scalar(s))
    }

    fn check_entity(&self, e: usize) -> Result<()> {
        if e >= self.num_entities {
            return Err(Error::UnknownEntity(format!("#{e}")));
        }
        Ok(())
    }

    pub fn save<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let meta = serde_json::to_string(&LinkMeta {
            config: self.config.clone(),
            num_entities: self.num_entities,
            num_relations: self.num_relations,
            text_vocab: self.text_vocab.clone(),
        })?;
        write_model_file(out, "link", &meta, &self.params)
            .map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn load<R: std::io::Read>(input: &mut R) -> Result<Self> {
        let (meta, store) = read_model_file(input, "link")?;
        let meta: LinkMeta = serde_json::from_str(&meta)?;
        let mut rng = crate::numerics::seeded_rng(0);
        let mut model = Self::with_vocab(
            meta.config,
            meta.num_entities,
            meta.num_relations,
            meta.text_vocab,
            &mut rng,
        );
        model.params.copy_from(&store)?;
        Ok(model)
    }
}

pub(crate) fn score_vars(tape: &mut Tape<'_>, proj: Var, h: Var, r: Var, t: Var) -> Var {
    let ph = tape.matvec(proj, h);
    let pt = tape.matvec(proj, t);
    let s = tape.add(ph, r);
    let d = tape.sub(s, pt);
    let n = tape.norm(d);
    tape.scale(n, -1.0)
}

/// Translation score with an explicit projection matrix.
pub fn translation_score(proj: &Tensor, relation: &[f64], h: &[f64], t: &[f64]) -> Result<f64> {
    if proj.shape().len() != 2
        || proj.cols() != h.len()
        || proj.cols() != t.len()
        || proj.rows() != relation.len()
    {
        return Err(Error::shape(
            "translation_score",
            format!(
                "projection {:?} with h {}, r {}, t {}",
                proj.shape(),
                h.len(),
                relation.len(),
                t.len()
            ),
        ));
    }
    let mut tape = Tape::new();
    let p = tape.constant(proj.clone());
    let hv = tape.constant(Tensor::vector(h.to_vec()));
    let rv = tape.constant(Tensor::vector(relation.to_vec()));
    let tv = tape.constant(Tensor::vector(t.to_vec()));
    let s = score_vars(&mut tape, p, hv, rv, tv);
    Ok(tape.scalar(s))
}

/// Cosine similarity; 0 when either vector is zero.
pub fn entity_similarity(a: &EntityRepresentation, b: &EntityRepresentation) -> f64 {
    cosine(&a.combined, &b.combined)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (d / (na * nb)).clamp(-1.0, 1.0)
}
