use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::CorpusPair;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{
    read_model_file, write_model_file, GruParams, GruVars, ParamId, ParamStore, Tape, Var,
};

/// Writer sizes. The reference encoder runs `hidden / 2` units per
/// direction so that its concatenated states match the decoder width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterDims {
    pub embedding: usize,
    pub hidden: usize,
    pub attention: usize,
    /// φ: memory hops used to initialize the decoder.
    pub init_hops: usize,
    /// ψ: memory hops at every decoding step.
    pub memory_hops: usize,
}

impl Default for WriterDims {
    fn default() -> Self {
        WriterDims {
            embedding: 128,
            hidden: 256,
            attention: 256,
            init_hops: 3,
            memory_hops: 3,
        }
    }
}

impl WriterDims {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.hidden % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "decoder hidden size must be even and positive, got {}",
                self.hidden
            )));
        }
        if self.embedding == 0 || self.attention == 0 {
            return Err(Error::InvalidArgument("sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HopIds {
    pub w_q: ParamId,
    pub u_e: ParamId,
    pub b: ParamId,
    pub nu: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct WriterIds {
    pub embedding: ParamId,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    pub decoder: GruParams,
    pub entity_memory: ParamId,
    pub init_hops: Vec<HopIds>,
    pub mem_hops: Vec<HopIds>,
    pub w_cov_ent: ParamId,
    pub w_h: ParamId,
    pub w_tau: ParamId,
    pub w_cov_ref: ParamId,
    pub b_tau: ParamId,
    pub varsigma: ParamId,
    pub w_gen: ParamId,
    pub b_gen: ParamId,
    pub w_p: ParamId,
    pub w_z: ParamId,
    pub b_p: ParamId,
    pub w_phi: ParamId,
    pub w_chi: ParamId,
    pub b_copy: ParamId,
}

pub(crate) struct HopVars {
    pub w_q: Var,
    pub u_e: Var,
    pub b: Var,
    pub nu: Var,
}

pub(crate) struct WriterVars {
    pub embedding: Var,
    pub enc_fwd: GruVars,
    pub enc_bwd: GruVars,
    pub decoder: GruVars,
    pub entity_memory: Var,
    pub init_hops: Vec<HopVars>,
    pub mem_hops: Vec<HopVars>,
    pub w_cov_ent: Var,
    pub w_h: Var,
    pub w_tau: Var,
    pub w_cov_ref: Var,
    pub b_tau: Var,
    pub varsigma: Var,
    pub w_gen: Var,
    pub b_gen: Var,
    pub w_p: Var,
    pub w_z: Var,
    pub b_p: Var,
    pub w_phi: Var,
    pub w_chi: Var,
    pub b_copy: Var,
}

#[derive(Serialize, Deserialize)]
struct WriterMeta {
    dims: WriterDims,
    vocabulary: Vec<String>,
    stopwords: BTreeSet<String>,
    entities: Vec<String>,
}

/// A trained (or freshly initialized) writer for one task.
#[derive(Debug, Clone)]
pub struct WriterModel {
    pub dims: WriterDims,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    pub(crate) ids: WriterIds,
    entity_names: Vec<String>,
    entity_index: HashMap<String, usize>,
}

impl WriterModel {
    /// Row 0 of the entity memory table is shared by unseen entities.
    pub fn new<R: Rng + ?Sized>(
        dims: WriterDims,
        vocab: Vocabulary,
        entity_names: Vec<String>,
        rng: &mut R,
    ) -> Result<Self> {
        dims.validate()?;
        let mut names = vec!["<unk-entity>".to_string()];
        for n in entity_names {
            let n = n.to_lowercase();
            if !names.contains(&n) {
                names.push(n);
            }
        }
        let (d, m, a, v) = (dims.hidden, dims.embedding, dims.attention, vocab.len());
        let mut s = ParamStore::new();
        let embedding = s.add_uniform("embedding", &[v, m], rng);
        let enc_fwd = GruParams::register(&mut s, "encoder.fwd", m, d / 2, rng);
        let enc_bwd = GruParams::register(&mut s, "encoder.bwd", m, d / 2, rng);
        let decoder = GruParams::register(&mut s, "decoder", m, d, rng);
        let entity_memory = s.add_uniform("entity_memory", &[names.len(), d], rng);
        let mut hops = |s: &mut ParamStore, prefix: &str, n: usize| -> Vec<HopIds> {
            (0..n)
                .map(|k| HopIds {
                    w_q: s.add_uniform(format!("{prefix}.{k}.w_q"), &[a, d], rng),
                    u_e: s.add_uniform(format!("{prefix}.{k}.u_e"), &[a, d], rng),
                    b: s.add_uniform(format!("{prefix}.{k}.b"), &[a], rng),
                    nu: s.add_uniform(format!("{prefix}.{k}.nu"), &[a], rng),
                })
                .collect()
        };
        let init_hops = hops(&mut s, "init_hop", dims.init_hops);
        let mem_hops = hops(&mut s, "mem_hop", dims.memory_hops);
        let w_cov_ent = s.add_uniform("mem.w_cov", &[a], rng);
        let w_h = s.add_uniform("ref.w_h", &[a, d], rng);
        let w_tau = s.add_uniform("ref.w_tau", &[a, d], rng);
        let w_cov_ref = s.add_uniform("ref.w_cov", &[a], rng);
        let b_tau = s.add_uniform("ref.b", &[a], rng);
        let varsigma = s.add_uniform("ref.varsigma", &[a], rng);
        let w_gen = s.add_uniform("gen.w", &[v, 3 * d], rng);
        let b_gen = s.add_uniform("gen.b", &[v], rng);
        let w_p = s.add_uniform("gate.w_p", &[d], rng);
        let w_z = s.add_uniform("gate.w_z", &[m], rng);
        let b_p = s.add_uniform("gate.b_p", &[1], rng);
        let w_phi = s.add_uniform("gate.w_phi", &[d], rng);
        let w_chi = s.add_uniform("gate.w_chi", &[d], rng);
        let b_copy = s.add_uniform("gate.b_copy", &[1], rng);
        let entity_index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(WriterModel {
            dims,
            vocab,
            params: s,
            ids: WriterIds {
                embedding,
                enc_fwd,
                enc_bwd,
                decoder,
                entity_memory,
                init_hops,
                mem_hops,
                w_cov_ent,
                w_h,
                w_tau,
                w_cov_ref,
                b_tau,
                varsigma,
                w_gen,
                b_gen,
                w_p,
                w_z,
                b_p,
                w_phi,
                w_chi,
                b_copy,
            },
            entity_names: names,
            entity_index,
        })
    }

    /// Vocabulary from sources and targets (after truncation to
    /// `max_len`), entity memory from every pair's entities.
    pub fn for_corpus<R: Rng + ?Sized>(
        dims: WriterDims,
        corpus: &[CorpusPair],
        min_freq: usize,
        stopwords: BTreeSet<String>,
        max_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let texts = corpus.iter().flat_map(|p| {
            [
                &p.src[..p.src.len().min(max_len)],
                &p.tgt[..p.tgt.len().min(max_len)],
            ]
        });
        let vocab = Vocabulary::build(texts, min_freq, stopwords);
        let mut ents: Vec<String> = corpus.iter().flat_map(|p| p.entities.iter().cloned()).collect();
        ents.sort();
        ents.dedup();
        Self::new(dims, vocab, ents, rng)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub(crate) fn entity_slot(&self, name: &str) -> usize {
        self.entity_index.get(&name.to_lowercase()).copied().unwrap_or(0)
    }

    /// Forward and backward encoder GRUs.
    pub fn encoder_grus(&self) -> (&GruParams, &GruParams) {
        (&self.ids.enc_fwd, &self.ids.enc_bwd)
    }

    pub fn decoder_gru(&self) -> &GruParams {
        &self.ids.decoder
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.find(name)
    }

    pub(crate) fn bind<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore) -> WriterVars {
        let ids = &self.ids;
        let mut p = |id: ParamId| tape.param(store, id);
        let embedding = p(ids.embedding);
        let entity_memory = p(ids.entity_memory);
        let w_cov_ent = p(ids.w_cov_ent);
        let w_h = p(ids.w_h);
        let w_tau = p(ids.w_tau);
        let w_cov_ref = p(ids.w_cov_ref);
        let b_tau = p(ids.b_tau);
        let varsigma = p(ids.varsigma);
        let w_gen = p(ids.w_gen);
        let b_gen = p(ids.b_gen);
        let w_p = p(ids.w_p);
        let w_z = p(ids.w_z);
        let b_p = p(ids.b_p);
        let w_phi = p(ids.w_phi);
        let w_chi = p(ids.w_chi);
        let b_copy = p(ids.b_copy);
        let hop = |tape: &mut Tape<'a>, h: &HopIds| HopVars {
            w_q: tape.param(store, h.w_q),
            u_e: tape.param(store, h.u_e),
            b: tape.param(store, h.b),
            nu: tape.param(store, h.nu),
        };
        let init_hops = ids.init_hops.iter().map(|h| hop(tape, h)).collect();
        let mem_hops = ids.mem_hops.iter().map(|h| hop(tape, h)).collect();
        WriterVars {
            embedding,
            enc_fwd: ids.enc_fwd.bind(tape, store),
            enc_bwd: ids.enc_bwd.bind(tape, store),
            decoder: ids.decoder.bind(tape, store),
            entity_memory,
            init_hops,
            mem_hops,
            w_cov_ent,
            w_h,
            w_tau,
            w_cov_ref,
            b_tau,
            varsigma,
            w_gen,
            b_gen,
            w_p,
            w_z,
            b_p,
            w_phi,
            w_chi,
            b_copy,
        }
    }

    pub fn save<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let meta = serde_json::to_string(&WriterMeta {
            dims: self.dims.clone(),
            vocabulary: self.vocab.tokens().to_vec(),
            stopwords: self.vocab.stopwords().clone(),
            entities: self.entity_names[1..].to_vec(),
        })?;
        write_model_file(out, "writer", &meta, &self.params)
            .map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn load<R: std::io::Read>(input: &mut R) -> Result<Self> {
        let (meta, store) = read_model_file(input, "writer")?;
        let meta: WriterMeta = serde_json::from_str(&meta)?;
        let vocab = Vocabulary::from_tokens(meta.vocabulary, meta.stopwords);
        let mut rng = crate::numerics::seeded_rng(0);
        let mut model = Self::new(meta.dims, vocab, meta.entities, &mut rng)?;
        model.params.copy_from(&store)?;
        Ok(model)
    }
}
