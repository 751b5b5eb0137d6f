use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::inference::{DecoderState, EncodedSource};
use super::model::{GateOverride, Source, SourceTag, MAX_TOKENS};
use super::params::WriterModel;
use super::vocab::{BOS, EOS, PAD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamOptions {
    pub beam: usize,
    pub max_len: usize,
    /// Forbid re-emitting any word outside the stop-word and punctuation sets.
    pub masking: bool,
    pub gates: GateOverride,
}

impl Default for BeamOptions {
    fn default() -> Self {
        BeamOptions {
            beam: 4,
            max_len: MAX_TOKENS,
            masking: true,
            gates: GateOverride::default(),
        }
    }
}

/// One emitted word and the mixture branch that contributed most to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub token: String,
    pub source: SourceTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Extended-vocabulary ids, EOS excluded.
    pub ids: Vec<usize>,
    pub tokens: Vec<TaggedToken>,
    /// Sum of log-probabilities, EOS included.
    pub log_prob: f64,
    /// `log_prob` divided by the number of scored steps.
    pub score: f64,
    pub ended_with_eos: bool,
}

impl Decoded {
    pub fn words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.token.clone()).collect()
    }
}

#[derive(Clone)]
struct Hyp {
    state: DecoderState,
    tags: Vec<SourceTag>,
    log_prob: f64,
    steps: usize,
    finished: bool,
    eos: bool,
}

impl Hyp {
    fn score(&self) -> f64 {
        self.log_prob / self.steps.max(1) as f64
    }

    /// Higher score first, then lexicographically smaller ids.
    fn rank(&self, other: &Hyp) -> Ordering {
        other
            .score()
            .partial_cmp(&self.score())
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.state.prefix.cmp(&other.state.prefix))
    }
}

/// Whether `ext` may be emitted after `prefix`.
pub fn is_allowed(model: &WriterModel, src: &Source, prefix: &[usize], ext: usize, masking: bool) -> bool {
    if ext == PAD || ext == BOS {
        return false;
    }
    if !masking || ext == EOS || !prefix.contains(&ext) {
        return true;
    }
    model.vocab.is_exempt(src.word(model, ext))
}

/// Next-token choices for one hypothesis, best first: `(id, prob)` pairs with
/// positive probability. When masking removes every candidate, the most
/// probable stop word is used; if none has positive probability the list is
/// empty and the hypothesis ends.
pub fn candidates(model: &WriterModel, src: &Source, prefix: &[usize], dist: &[f64], masking: bool) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = dist
        .iter()
        .enumerate()
        .filter(|&(z, &p)| p > 0.0 && is_allowed(model, src, prefix, z, masking))
        .map(|(z, &p)| (z, p))
        .collect();
    if out.is_empty() {
        let stop = dist
            .iter()
            .enumerate()
            .filter(|&(z, &p)| p > 0.0 && z > EOS && model.vocab.stopwords().contains(src.word(model, z)))
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(Ordering::Equal).then(b.0.cmp(&a.0)));
        if let Some((z, &p)) = stop {
            out.push((z, p));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    out
}

/// Beam search with length-normalized scores.
pub fn beam_search(model: &WriterModel, src: &Source, opts: &BeamOptions) -> Result<Decoded> {
    if opts.beam == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    let enc = model.prepare(src);
    beam_search_encoded(model, src, &enc, opts)
}

pub fn beam_search_encoded(model: &WriterModel, src: &Source, enc: &EncodedSource, opts: &BeamOptions) -> Result<Decoded> {
    let mut pool = vec![Hyp {
        state: model.initial_state(enc),
        tags: Vec::new(),
        log_prob: 0.0,
        steps: 0,
        finished: false,
        eos: false,
    }];
    while pool.iter().any(|h| !h.finished) {
        let mut next: Vec<Hyp> = Vec::new();
        for hyp in pool {
            if hyp.finished {
                next.push(hyp);
                continue;
            }
            if hyp.state.prefix.len() >= opts.max_len {
                next.push(Hyp { finished: true, ..hyp });
                continue;
            }
            let out = model.decode_step(src, enc, &hyp.state, &opts.gates);
            let dist = &out.distribution.combined;
            let cands = candidates(model, src, &hyp.state.prefix, dist, opts.masking);
            if cands.is_empty() {
                next.push(Hyp { finished: true, ..hyp });
                continue;
            }
            for &(z, p) in cands.iter().take(opts.beam) {
                let log_prob = hyp.log_prob + p.ln();
                if z == EOS {
                    next.push(Hyp {
                        log_prob,
                        steps: hyp.steps + 1,
                        finished: true,
                        eos: true,
                        ..hyp.clone()
                    });
                } else {
                    let mut tags = hyp.tags.clone();
                    tags.push(out.distribution.tag(z));
                    next.push(Hyp {
                        state: model.advance(&hyp.state, &out, z),
                        tags,
                        log_prob,
                        steps: hyp.steps + 1,
                        finished: false,
                        eos: false,
                    });
                }
            }
        }
        next.sort_by(|a, b| a.rank(b));
        next.truncate(opts.beam);
        pool = next;
    }
    let best = pool.into_iter().next().expect("non-empty pool");
    let score = best.score();
    Ok(Decoded {
        tokens: best
            .state
            .prefix
            .iter()
            .zip(&best.tags)
            .map(|(&z, &source)| TaggedToken {
                token: src.word(model, z).to_string(),
                source,
            })
            .collect(),
        ids: best.state.prefix,
        log_prob: best.log_prob,
        score,
        ended_with_eos: best.eos,
    })
}
