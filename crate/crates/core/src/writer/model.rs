//! Forward computation of the writer.
//!
//! Reading order for one decoding step `i`:
//!
//! 1. `h̃_i = GRU(emb(y_{i−1}), h̃_{i−1})`, with `h̃_0` produced by the
//!    initial memory hops over the related entities, queried with the last
//!    reference-encoder state.
//! 2. Memory network: `ψ` hops over entity memories, queried with `h̃_i` and
//!    biased by the entity coverage `ĉ`. The last hop's distribution is `β_i`
//!    and its read-out is `χ_i`.
//! 3. Reference attention over encoder states with reference coverage `c̃`,
//!    giving `α′_i` and context `φ_i`.
//! 4. Mixture `P = g_p P_gen + (1 − g_p)(g̃_p P_τ + (1 − g̃_p) P_e)` over the
//!    vocabulary extended with out-of-vocabulary source words.
//!
//! Hop attentions are softmax-normalized at every hop. `P_e` splits each
//! entity's weight evenly over its tokens so it stays a distribution. With an
//! empty entity memory the copy mass goes entirely to the title.

use serde::{Deserialize, Serialize};

use super::params::{HopVars, WriterModel, WriterVars};
use super::vocab::{BOS, UNK};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Default cap on source and target lengths.
pub const MAX_TOKENS: usize = 120;

/// An entity held in memory during decoding.
#[derive(Debug, Clone)]
pub struct MemoryEntity {
    pub name: String,
    pub slot: usize,
    pub token_ext_ids: Vec<usize>,
}

/// Source text and related entities mapped into the extended vocabulary.
#[derive(Debug, Clone)]
pub struct Source {
    pub tokens: Vec<String>,
    pub vocab_ids: Vec<usize>,
    pub ext_ids: Vec<usize>,
    pub entities: Vec<MemoryEntity>,
    /// Out-of-vocabulary source words; word `k` has extended id `V + k`.
    pub oov: Vec<String>,
    vocab_len: usize,
}

impl Source {
    /// Truncates `tokens` to `max_len`. Duplicate entity names are dropped.
    pub fn new(model: &WriterModel, tokens: &[String], entities: &[String], max_len: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty source text".into()));
        }
        let vocab = &model.vocab;
        let vocab_len = vocab.len();
        let tokens: Vec<String> = tokens[..tokens.len().min(max_len.max(1))].to_vec();
        let mut oov: Vec<String> = Vec::new();
        let ext = |w: &str, oov: &mut Vec<String>| match vocab.get(w) {
            Some(id) => id,
            None => match oov.iter().position(|o| o == w) {
                Some(k) => vocab_len + k,
                None => {
                    oov.push(w.to_string());
                    vocab_len + oov.len() - 1
                }
            },
        };
        let ext_ids: Vec<usize> = tokens.iter().map(|t| ext(t, &mut oov)).collect();
        let vocab_ids = tokens.iter().map(|t| vocab.id(t)).collect();
        let mut seen = std::collections::HashSet::new();
        let mut mem = Vec::new();
        for name in entities {
            let name = name.to_lowercase();
            let words: Vec<&str> = name.split_whitespace().collect();
            if words.is_empty() || !seen.insert(name.clone()) {
                continue;
            }
            let token_ext_ids = words.iter().map(|w| ext(w, &mut oov)).collect();
            mem.push(MemoryEntity {
                slot: model.entity_slot(&name),
                name,
                token_ext_ids,
            });
        }
        Ok(Source {
            tokens,
            vocab_ids,
            ext_ids,
            entities: mem,
            oov,
            vocab_len,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ext_len(&self) -> usize {
        self.vocab_len + self.oov.len()
    }

    /// Extended id of a target word: vocabulary id, else copied source
    /// word, else UNK.
    pub fn ext_id(&self, model: &WriterModel, word: &str) -> usize {
        if let Some(id) = model.vocab.get(word) {
            return id;
        }
        match self.oov.iter().position(|o| o == word) {
            Some(k) => self.vocab_len + k,
            None => UNK,
        }
    }

    pub fn word<'a>(&'a self, model: &'a WriterModel, ext: usize) -> &'a str {
        if ext < self.vocab_len {
            model.vocab.token(ext)
        } else {
            &self.oov[ext - self.vocab_len]
        }
    }

    /// Vocabulary id used to embed a previously emitted token.
    pub fn input_id(&self, ext: usize) -> usize {
        if ext < self.vocab_len {
            ext
        } else {
            UNK
        }
    }
}

/// Pins the mixture gates to constants instead of their learned values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GateOverride {
    /// `g_p`: weight of vocabulary generation.
    pub generate: Option<f64>,
    /// `g̃_p`: share of the copy mass that goes to the title.
    pub copy_title: Option<f64>,
}

/// Which mixture branch contributed most to an emitted token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    Generate,
    CopyTitle,
    CopyEntity,
}

/// Combined output distribution of one step and its components.
#[derive(Debug, Clone)]
pub struct MixtureDistribution {
    /// Over the fixed vocabulary.
    pub p_gen: Vec<f64>,
    /// Over the extended vocabulary; zero outside source words.
    pub p_title: Vec<f64>,
    /// Over the extended vocabulary; zero outside entity words.
    pub p_entity: Vec<f64>,
    pub g_gen: f64,
    pub g_title: f64,
    pub combined: Vec<f64>,
}

impl MixtureDistribution {
    pub fn tag(&self, ext: usize) -> SourceTag {
        let gen = if ext < self.p_gen.len() {
            self.g_gen * self.p_gen[ext]
        } else {
            0.0
        };
        let copy = 1.0 - self.g_gen;
        let title = copy * self.g_title * self.p_title[ext];
        let ent = copy * (1.0 - self.g_title) * self.p_entity[ext];
        if gen >= title && gen >= ent {
            SourceTag::Generate
        } else if title >= ent {
            SourceTag::CopyTitle
        } else {
            SourceTag::CopyEntity
        }
    }
}

/// Encoder states and per-sequence projections that do not change across
/// decoding steps.
pub(crate) struct Encoded {
    pub h: Vec<Var>,
    pub w_tau_h: Vec<Var>,
    pub entities: Vec<Var>,
    pub init_ue: Vec<Vec<Var>>,
    pub mem_ue: Vec<Vec<Var>>,
}

pub(crate) struct MixtureVars {
    pub p_gen: Var,
    pub p_title: Var,
    pub p_entity: Option<Var>,
    pub g_gen: Var,
    pub g_title: Var,
    pub combined: Var,
}

pub(crate) struct StepVars {
    pub hidden: Var,
    pub alpha: Var,
    pub beta: Option<Var>,
    pub mix: MixtureVars,
    pub cov_ref: Var,
    pub cov_ent: Option<Var>,
    pub coverage_term: Var,
}

impl WriterModel {
    /// Bi-GRU states `h_j = [→h_j ‖ ←h_j]`.
    pub(crate) fn encoder_states(&self, tape: &mut Tape<'_>, v: &WriterVars, ids: &[usize]) -> Vec<Var> {
        let half = self.dims.hidden / 2;
        let embs: Vec<Var> = ids.iter().map(|&i| tape.row(v.embedding, i)).collect();
        let mut fwd = Vec::with_capacity(embs.len());
        let mut state = tape.constant(Tensor::zeros(&[half]));
        for &x in &embs {
            state = v.enc_fwd.step(tape, x, state);
            fwd.push(state);
        }
        let mut bwd = vec![state; embs.len()];
        let mut state = tape.constant(Tensor::zeros(&[half]));
        for (j, &x) in embs.iter().enumerate().rev() {
            state = v.enc_bwd.step(tape, x, state);
            bwd[j] = state;
        }
        fwd.iter()
            .zip(&bwd)
            .map(|(&f, &b)| tape.concat(&[f, b]))
            .collect()
    }

    pub(crate) fn encoded_from(&self, tape: &mut Tape<'_>, v: &WriterVars, h: Vec<Var>, entities: Vec<Var>) -> Encoded {
        let w_tau_h = h.iter().map(|&hj| tape.matvec(v.w_tau, hj)).collect();
        let proj = |tape: &mut Tape<'_>, hops: &[HopVars]| -> Vec<Vec<Var>> {
            hops.iter()
                .map(|hop| entities.iter().map(|&e| tape.matvec(hop.u_e, e)).collect())
                .collect()
        };
        let init_ue = proj(tape, &v.init_hops);
        let mem_ue = proj(tape, &v.mem_hops);
        Encoded {
            h,
            w_tau_h,
            entities,
            init_ue,
            mem_ue,
        }
    }

    pub(crate) fn encode_vars(&self, tape: &mut Tape<'_>, v: &WriterVars, src: &Source) -> Encoded {
        let h = self.encoder_states(tape, v, &src.vocab_ids);
        let entities = src
            .entities
            .iter()
            .map(|e| tape.row(v.entity_memory, e.slot))
            .collect();
        self.encoded_from(tape, v, h, entities)
    }

    /// `W_q q + b + U_e e_j (+ W_ĉ ĉ_j)` given `base = W_q q + b`.
    pub(crate) fn hop_preactivation(
        tape: &mut Tape<'_>,
        base: Var,
        ue: Var,
        coverage: Option<(Var, Var)>,
        j: usize,
    ) -> Var {
        let pre = tape.add(base, ue);
        match coverage {
            Some((w_cov, cov)) => {
                let c = tape.gather(cov, j);
                let bias = tape.scale_by(w_cov, c);
                tape.add(pre, bias)
            }
            None => pre,
        }
    }

    /// One memory hop: attention over entities given `query`, optional
    /// coverage bias. Returns `(distribution, read-out)`.
    fn hop(
        tape: &mut Tape<'_>,
        hop: &HopVars,
        ue: &[Var],
        entities: &[Var],
        query: Var,
        coverage: Option<(Var, Var)>,
    ) -> (Var, Var) {
        let wq = tape.matvec(hop.w_q, query);
        let base = tape.add(wq, hop.b);
        let scores: Vec<Var> = ue
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let pre = Self::hop_preactivation(tape, base, u, coverage, j);
                let act = tape.tanh(pre);
                tape.dot(hop.nu, act)
            })
            .collect();
        let s = tape.concat(&scores);
        let p = tape.softmax(s);
        let read = tape.weighted_sum(p, entities);
        (p, read)
    }

    /// `q_0 = h_l`; `q_k = Σ_i p_ki e_i + q_{k−1}` for `φ` hops.
    pub(crate) fn init_query(&self, tape: &mut Tape<'_>, v: &WriterVars, enc: &Encoded) -> Var {
        let mut q = *enc.h.last().expect("non-empty source");
        if enc.entities.is_empty() {
            return q;
        }
        for (k, hop) in v.init_hops.iter().enumerate() {
            let (_, read) = Self::hop(tape, hop, &enc.init_ue[k], &enc.entities, q, None);
            q = tape.add(read, q);
        }
        q
    }

    /// Returns `(χ_i, β_i)`; `χ_i = 0` and no `β` for an empty memory.
    pub(crate) fn memory_vars(
        &self,
        tape: &mut Tape<'_>,
        v: &WriterVars,
        enc: &Encoded,
        hidden: Var,
        cov_ent: Option<Var>,
    ) -> (Var, Option<Var>) {
        if enc.entities.is_empty() || v.mem_hops.is_empty() {
            return (tape.constant(Tensor::zeros(&[self.dims.hidden])), None);
        }
        let mut q = hidden;
        let mut last = None;
        for (k, hop) in v.mem_hops.iter().enumerate() {
            let cov = cov_ent.map(|c| (v.w_cov_ent, c));
            let (p, read) = Self::hop(tape, hop, &enc.mem_ue[k], &enc.entities, q, cov);
            q = tape.add(read, q);
            last = Some((p, read));
        }
        let (beta, chi) = last.expect("at least one hop");
        (chi, Some(beta))
    }

    /// Returns `(φ_i, α′_i)`.
    pub(crate) fn reference_vars(
        &self,
        tape: &mut Tape<'_>,
        v: &WriterVars,
        enc: &Encoded,
        hidden: Var,
        cov_ref: Var,
    ) -> (Var, Var) {
        let wh = tape.matvec(v.w_h, hidden);
        let base = tape.add(wh, v.b_tau);
        let scores: Vec<Var> = enc
            .w_tau_h
            .iter()
            .enumerate()
            .map(|(j, &wt)| {
                let c = tape.gather(cov_ref, j);
                let cov = tape.scale_by(v.w_cov_ref, c);
                let pre = tape.add(base, wt);
                let pre = tape.add(pre, cov);
                let act = tape.tanh(pre);
                tape.dot(v.varsigma, act)
            })
            .collect();
        let s = tape.concat(&scores);
        let alpha = tape.softmax(s);
        let phi = tape.weighted_sum(alpha, &enc.h);
        (phi, alpha)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn mixture_vars(
        &self,
        tape: &mut Tape<'_>,
        v: &WriterVars,
        src: &Source,
        hidden: Var,
        phi: Var,
        chi: Var,
        alpha: Var,
        beta: Option<Var>,
        prev_emb: Var,
        gates: &GateOverride,
    ) -> MixtureVars {
        let n_ext = src.ext_len();
        let vlen = self.vocab.len();

        let feats = tape.concat(&[hidden, phi, chi]);
        let logits = tape.matvec(v.w_gen, feats);
        let logits = tape.add(logits, v.b_gen);
        let p_gen = tape.softmax(logits);

        let g_gen = match gates.generate {
            Some(g) => tape.constant(Tensor::scalar(g)),
            None => {
                let a = tape.dot(v.w_p, hidden);
                let b = tape.dot(v.w_z, prev_emb);
                let s = tape.add(a, b);
                let s = tape.add(s, v.b_p);
                tape.sigmoid(s)
            }
        };
        let g_title = match (beta, gates.copy_title) {
            (None, _) => tape.constant(Tensor::scalar(1.0)),
            (Some(_), Some(g)) => tape.constant(Tensor::scalar(g)),
            (Some(_), None) => {
                let a = tape.dot(v.w_phi, phi);
                let b = tape.dot(v.w_chi, chi);
                let s = tape.add(a, b);
                let s = tape.add(s, v.b_copy);
                tape.sigmoid(s)
            }
        };

        let gen_ext = tape.scatter(p_gen, (0..vlen).map(|i| (i, i, 1.0)).collect(), n_ext);
        let p_title = tape.scatter(
            alpha,
            src.ext_ids.iter().enumerate().map(|(m, &z)| (m, z, 1.0)).collect(),
            n_ext,
        );
        let p_entity = beta.map(|b| {
            let mut entries = Vec::new();
            for (m, e) in src.entities.iter().enumerate() {
                let share = 1.0 / e.token_ext_ids.len() as f64;
                for &z in &e.token_ext_ids {
                    entries.push((m, z, share));
                }
            }
            tape.scatter(b, entries, n_ext)
        });

        let copy = tape.one_minus(g_gen);
        let gen_part = tape.scale_by(gen_ext, g_gen);
        let title_w = tape.mul(copy, g_title);
        let title_part = tape.scale_by(p_title, title_w);
        let mut combined = tape.add(gen_part, title_part);
        if let Some(pe) = p_entity {
            let rest = tape.one_minus(g_title);
            let ent_w = tape.mul(copy, rest);
            let ent_part = tape.scale_by(pe, ent_w);
            combined = tape.add(combined, ent_part);
        }
        MixtureVars {
            p_gen,
            p_title,
            p_entity,
            g_gen,
            g_title,
            combined,
        }
    }

    /// One decoding step from `hidden` (= `h̃_{i−1}`) and the previous token.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step_vars(
        &self,
        tape: &mut Tape<'_>,
        v: &WriterVars,
        src: &Source,
        enc: &Encoded,
        hidden: Var,
        cov_ref: Var,
        cov_ent: Option<Var>,
        prev_ext: usize,
        gates: &GateOverride,
    ) -> StepVars {
        let prev_emb = tape.row(v.embedding, src.input_id(prev_ext));
        let h = v.decoder.step(tape, prev_emb, hidden);
        let (chi, beta) = self.memory_vars(tape, v, enc, h, cov_ent);
        let (phi, alpha) = self.reference_vars(tape, v, enc, h, cov_ref);
        let mix = self.mixture_vars(tape, v, src, h, phi, chi, alpha, beta, prev_emb, gates);

        let m = tape.min(alpha, cov_ref);
        let mut coverage_term = tape.sum(m);
        if let (Some(b), Some(c)) = (beta, cov_ent) {
            let m = tape.min(b, c);
            let s = tape.sum(m);
            coverage_term = tape.add(coverage_term, s);
        }
        let next_ref = tape.add(cov_ref, alpha);
        let next_ent = match (beta, cov_ent) {
            (Some(b), Some(c)) => Some(tape.add(c, b)),
            _ => None,
        };
        StepVars {
            hidden: h,
            alpha,
            beta,
            mix,
            cov_ref: next_ref,
            cov_ent: next_ent,
            coverage_term,
        }
    }

    /// Teacher-forced loss `Σ_i −log P(z_i) + λ Σ_i Σ_j (min(α′_ij, c̃_ij) +
    /// min(β_ij, ĉ_ij))` over `target` followed by EOS.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn sequence_vars(
        &self,
        tape: &mut Tape<'_>,
        v: &WriterVars,
        src: &Source,
        target_ext: &[usize],
        lambda: f64,
        gates: &GateOverride,
    ) -> SequenceVars {
        let enc = self.encode_vars(tape, v, src);
        let mut hidden = self.init_query(tape, v, &enc);
        let mut cov_ref = tape.constant(Tensor::zeros(&[src.len()]));
        let mut cov_ent = if enc.entities.is_empty() {
            None
        } else {
            Some(tape.constant(Tensor::zeros(&[enc.entities.len()])))
        };
        let mut prev = BOS;
        let mut terms = Vec::with_capacity(target_ext.len());
        let mut gold_probs = Vec::with_capacity(target_ext.len());
        let mut coverage = Vec::with_capacity(target_ext.len());
        for &gold in target_ext {
            let step = self.step_vars(tape, v, src, &enc, hidden, cov_ref, cov_ent, prev, gates);
            let p = tape.gather(step.mix.combined, gold);
            gold_probs.push(tape.scalar(p));
            coverage.push(tape.scalar(step.coverage_term));
            let lp = tape.ln(p);
            let nll = tape.scale(lp, -1.0);
            let cov = tape.scale(step.coverage_term, lambda);
            terms.push(tape.add(nll, cov));
            hidden = step.hidden;
            cov_ref = step.cov_ref;
            cov_ent = step.cov_ent;
            prev = gold;
        }
        let all = tape.concat(&terms);
        let loss = tape.sum(all);
        SequenceVars {
            loss,
            gold_probs,
            coverage,
        }
    }

    /// Maps target words into `src`'s extended vocabulary, truncates to
    /// `max_len` and appends EOS.
    pub fn target_ids(&self, src: &Source, target: &[String], max_len: usize) -> Vec<usize> {
        target
            .iter()
            .take(max_len)
            .map(|w| src.ext_id(self, w))
            .chain(std::iter::once(super::vocab::EOS))
            .collect()
    }
}

pub(crate) struct SequenceVars {
    pub loss: Var,
    pub gold_probs: Vec<f64>,
    pub coverage: Vec<f64>,
}

/// Loss of one teacher-forced sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLoss {
    pub loss: f64,
    /// `P(z_i)` of each gold token, EOS included.
    pub gold_probs: Vec<f64>,
    /// Unweighted coverage term of each step.
    pub coverage: Vec<f64>,
}

impl SequenceLoss {
    pub fn nll(&self) -> f64 {
        self.gold_probs.iter().map(|p| -p.ln()).sum()
    }

    pub fn tokens(&self) -> usize {
        self.gold_probs.len()
    }
}

/// Coverage term `Σ_j min(a_ij, c_ij)` of each row of an attention
/// sequence, where `c_i` is the sum of the rows before it.
pub fn coverage_terms(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut cov: Vec<f64> = Vec::new();
    rows.iter()
        .map(|row| {
            cov.resize(row.len().max(cov.len()), 0.0);
            let term = row.iter().zip(&cov).map(|(a, c)| a.min(*c)).sum();
            for (c, a) in cov.iter_mut().zip(row) {
                *c += a;
            }
            term
        })
        .collect()
}
