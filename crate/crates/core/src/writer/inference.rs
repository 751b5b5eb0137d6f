//! Tensor-level entry points: each decoding operation can be run on plain
//! tensors, and a prepared source can be stepped one token at a time.

use super::model::{Encoded, GateOverride, MixtureDistribution, SequenceLoss, Source};
use super::params::{WriterModel, WriterVars};
use super::vocab::BOS;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Encoder output for one source, reused across decoding steps.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub states: Vec<Tensor>,
    pub entities: Vec<Tensor>,
    pub initial: Tensor,
}

/// Decoder state after emitting `prefix`.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub hidden: Tensor,
    pub ref_coverage: Vec<f64>,
    pub ent_coverage: Vec<f64>,
    pub prefix: Vec<usize>,
}

/// Result of one decoding step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub distribution: MixtureDistribution,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub hidden: Tensor,
}

fn data(tape: &Tape<'_>, v: Var) -> Vec<f64> {
    tape.data(v).to_vec()
}

fn check_len(op: &'static str, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::shape(op, format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

impl WriterModel {
    fn constants<'a>(tape: &mut Tape<'a>, ts: &'a [Tensor]) -> Vec<Var> {
        ts.iter().map(|t| tape.constant_ref(t)).collect()
    }

    fn check_vectors(&self, op: &'static str, ts: &[Tensor]) -> Result<()> {
        for t in ts {
            check_len(op, "state", t.len(), self.dims.hidden)?;
        }
        Ok(())
    }

    /// Encoder states `h_1..h_l` of a token sequence, each of width `hidden`.
    pub fn encode_reference(&self, tokens: &[String]) -> Result<Vec<Tensor>> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty source text".into()));
        }
        let ids: Vec<usize> = tokens.iter().map(|t| self.vocab.id(t)).collect();
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let h = self.encoder_states(&mut tape, &v, &ids);
        Ok(h.iter().map(|&x| tape.value(x).clone()).collect())
    }

    /// Initial decoder state from encoder states and entity embeddings.
    pub fn init_decoder_state(&self, states: &[Tensor], entities: &[Tensor]) -> Result<Tensor> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("no encoder states".into()));
        }
        self.check_vectors("init_decoder_state", states)?;
        self.check_vectors("init_decoder_state", entities)?;
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let h = Self::constants(&mut tape, states);
        let e = Self::constants(&mut tape, entities);
        let enc = self.encoded_from(&mut tape, &v, h, e);
        let q = self.init_query(&mut tape, &v, &enc);
        Ok(tape.value(q).clone())
    }

    /// Memory read-out `(χ, β)` for decoder state `hidden` and entity
    /// coverage. Empty memory gives `χ = 0` and an empty `β`.
    pub fn memory_step(&self, hidden: &Tensor, entities: &[Tensor], coverage: &[f64]) -> Result<(Tensor, Vec<f64>)> {
        self.check_vectors("memory_step", std::slice::from_ref(hidden))?;
        self.check_vectors("memory_step", entities)?;
        check_len("memory_step", "coverage", coverage.len(), entities.len())?;
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let e = Self::constants(&mut tape, entities);
        let enc = self.encoded_from(&mut tape, &v, Vec::new(), e);
        let h = tape.constant_ref(hidden);
        let cov = (!entities.is_empty()).then(|| tape.constant(Tensor::vector(coverage.to_vec())));
        let (chi, beta) = self.memory_vars(&mut tape, &v, &enc, h, cov);
        Ok((
            tape.value(chi).clone(),
            beta.map(|b| data(&tape, b)).unwrap_or_default(),
        ))
    }

    /// Pre-activation of entity `entity` in per-step memory hop `hop` for
    /// query `query` and entity coverage `coverage`.
    pub fn memory_preactivation(&self, hop: usize, query: &Tensor, entity: &Tensor, coverage: f64) -> Result<Tensor> {
        self.check_vectors("memory_preactivation", &[query.clone(), entity.clone()])?;
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let h = v.mem_hops.get(hop).ok_or_else(|| {
            Error::InvalidArgument(format!("hop {hop} out of range ({} hops)", v.mem_hops.len()))
        })?;
        let q = tape.constant_ref(query);
        let e = tape.constant_ref(entity);
        let wq = tape.matvec(h.w_q, q);
        let base = tape.add(wq, h.b);
        let ue = tape.matvec(h.u_e, e);
        let cov = tape.constant(Tensor::vector(vec![coverage]));
        let pre = Self::hop_preactivation(&mut tape, base, ue, Some((v.w_cov_ent, cov)), 0);
        Ok(tape.value(pre).clone())
    }

    /// Reference context `(φ, α′)` over encoder states with coverage.
    pub fn reference_attention(&self, hidden: &Tensor, states: &[Tensor], coverage: &[f64]) -> Result<(Tensor, Vec<f64>)> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("no encoder states".into()));
        }
        self.check_vectors("reference_attention", std::slice::from_ref(hidden))?;
        self.check_vectors("reference_attention", states)?;
        check_len("reference_attention", "coverage", coverage.len(), states.len())?;
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let h = Self::constants(&mut tape, states);
        let enc = self.encoded_from(&mut tape, &v, h, Vec::new());
        let q = tape.constant_ref(hidden);
        let cov = tape.constant(Tensor::vector(coverage.to_vec()));
        let (phi, alpha) = self.reference_vars(&mut tape, &v, &enc, q, cov);
        Ok((tape.value(phi).clone(), data(&tape, alpha)))
    }

    /// Output distribution over `src`'s extended vocabulary.
    #[allow(clippy::too_many_arguments)]
    pub fn mixture(
        &self,
        src: &Source,
        hidden: &Tensor,
        phi: &Tensor,
        chi: &Tensor,
        alpha: &[f64],
        beta: &[f64],
        prev: usize,
        gates: &GateOverride,
    ) -> Result<MixtureDistribution> {
        self.check_vectors("mixture", &[hidden.clone(), phi.clone(), chi.clone()])?;
        check_len("mixture", "alpha", alpha.len(), src.len())?;
        if !src.entities.is_empty() {
            check_len("mixture", "beta", beta.len(), src.entities.len())?;
        }
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let h = tape.constant_ref(hidden);
        let p = tape.constant_ref(phi);
        let c = tape.constant_ref(chi);
        let a = tape.constant(Tensor::vector(alpha.to_vec()));
        let b = (!src.entities.is_empty()).then(|| tape.constant(Tensor::vector(beta.to_vec())));
        let prev_emb = tape.row(v.embedding, src.input_id(prev));
        let mix = self.mixture_vars(&mut tape, &v, src, h, p, c, a, b, prev_emb, gates);
        Ok(Self::distribution(&tape, &mix, src.ext_len()))
    }

    fn distribution(tape: &Tape<'_>, mix: &super::model::MixtureVars, n_ext: usize) -> MixtureDistribution {
        MixtureDistribution {
            p_gen: data(tape, mix.p_gen),
            p_title: data(tape, mix.p_title),
            p_entity: mix
                .p_entity
                .map(|p| data(tape, p))
                .unwrap_or_else(|| vec![0.0; n_ext]),
            g_gen: tape.scalar(mix.g_gen),
            g_title: tape.scalar(mix.g_title),
            combined: data(tape, mix.combined),
        }
    }

    /// Teacher-forced loss of `target` given `src`, with coverage weight
    /// `lambda`.
    pub fn sequence_loss(&self, src: &Source, target: &[String], max_len: usize, lambda: f64) -> Result<SequenceLoss> {
        let ids = self.target_ids(src, target, max_len);
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let s = self.sequence_vars(&mut tape, &v, src, &ids, lambda, &GateOverride::default());
        Ok(SequenceLoss {
            loss: tape.scalar(s.loss),
            gold_probs: s.gold_probs,
            coverage: s.coverage,
        })
    }

    /// Teacher-forced loss and its gradient for every parameter, in store
    /// order.
    pub fn loss_and_gradients(&self, src: &Source, target: &[String], max_len: usize, lambda: f64) -> Result<(f64, Vec<Tensor>)> {
        let ids = self.target_ids(src, target, max_len);
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let s = self.sequence_vars(&mut tape, &v, src, &ids, lambda, &GateOverride::default());
        let grads = tape.backward(s.loss)?.params(&self.params);
        Ok((tape.scalar(s.loss), grads))
    }

    /// Encodes `src` once for step-by-step decoding.
    pub fn prepare(&self, src: &Source) -> EncodedSource {
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let enc = self.encode_vars(&mut tape, &v, src);
        let q = self.init_query(&mut tape, &v, &enc);
        EncodedSource {
            states: enc.h.iter().map(|&x| tape.value(x).clone()).collect(),
            entities: enc.entities.iter().map(|&x| tape.value(x).clone()).collect(),
            initial: tape.value(q).clone(),
        }
    }

    pub fn initial_state(&self, enc: &EncodedSource) -> DecoderState {
        DecoderState {
            hidden: enc.initial.clone(),
            ref_coverage: vec![0.0; enc.states.len()],
            ent_coverage: vec![0.0; enc.entities.len()],
            prefix: Vec::new(),
        }
    }

    fn encoded_consts<'a>(&self, tape: &mut Tape<'a>, v: &WriterVars, enc: &'a EncodedSource) -> Encoded {
        let h = Self::constants(tape, &enc.states);
        let e = Self::constants(tape, &enc.entities);
        self.encoded_from(tape, v, h, e)
    }

    /// Distribution of the next token after `state.prefix`.
    pub fn decode_step(&self, src: &Source, enc: &EncodedSource, state: &DecoderState, gates: &GateOverride) -> StepOutput {
        let mut tape = Tape::new();
        let v = self.bind(&mut tape, &self.params);
        let e = self.encoded_consts(&mut tape, &v, enc);
        let h = tape.constant_ref(&state.hidden);
        let cov_ref = tape.constant(Tensor::vector(state.ref_coverage.clone()));
        let cov_ent = (!enc.entities.is_empty()).then(|| tape.constant(Tensor::vector(state.ent_coverage.clone())));
        let prev = state.prefix.last().copied().unwrap_or(BOS);
        let step = self.step_vars(&mut tape, &v, src, &e, h, cov_ref, cov_ent, prev, gates);
        StepOutput {
            distribution: Self::distribution(&tape, &step.mix, src.ext_len()),
            alpha: data(&tape, step.alpha),
            beta: step.beta.map(|b| data(&tape, b)).unwrap_or_default(),
            hidden: tape.value(step.hidden).clone(),
        }
    }

    /// State after emitting `token` from `out`.
    pub fn advance(&self, state: &DecoderState, out: &StepOutput, token: usize) -> DecoderState {
        let add = |a: &[f64], b: &[f64]| -> Vec<f64> {
            if b.is_empty() {
                a.to_vec()
            } else {
                a.iter().zip(b).map(|(x, y)| x + y).collect()
            }
        };
        let mut prefix = state.prefix.clone();
        prefix.push(token);
        DecoderState {
            hidden: out.hidden.clone(),
            ref_coverage: add(&state.ref_coverage, &out.alpha),
            ent_coverage: add(&state.ent_coverage, &out.beta),
            prefix,
        }
    }
}
