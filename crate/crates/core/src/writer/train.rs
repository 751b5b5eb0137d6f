use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::corpus::CorpusPair;
use super::model::{GateOverride, Source, MAX_TOKENS};
use super::params::{WriterDims, WriterModel};
use super::vocab::default_stopwords;
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Adam, Tape};

#[derive(Debug, Clone)]
pub struct WriterTrainOptions {
    pub dims: WriterDims,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Coverage loss weight λ.
    pub coverage_lambda: f64,
    pub max_len: usize,
    /// Words seen fewer times map to UNK.
    pub min_freq: usize,
    pub stopwords: BTreeSet<String>,
    /// Stop once corpus perplexity falls below this value.
    pub target_perplexity: Option<f64>,
}

impl Default for WriterTrainOptions {
    fn default() -> Self {
        WriterTrainOptions {
            dims: WriterDims::default(),
            epochs: 500,
            seed: 7,
            learning_rate: 0.001,
            coverage_lambda: 1.0,
            max_len: MAX_TOKENS,
            min_freq: 5,
            stopwords: default_stopwords(),
            target_perplexity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriterTrainReport {
    /// Mean per-pair loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    /// Token perplexity of each epoch, measured before each update.
    pub epoch_perplexities: Vec<f64>,
    /// Perplexity of the final model over the whole corpus.
    pub final_perplexity: f64,
    pub epochs_run: usize,
}

/// Total gold-token NLL and token count of `corpus` under `model`.
pub fn corpus_nll(model: &WriterModel, corpus: &[CorpusPair], max_len: usize) -> Result<(f64, usize)> {
    let mut nll = 0.0;
    let mut tokens = 0;
    for pair in corpus {
        let src = Source::new(model, &pair.src, &pair.entities, max_len)?;
        let l = model.sequence_loss(&src, &pair.tgt, max_len, 0.0)?;
        nll += l.nll();
        tokens += l.tokens();
    }
    Ok((nll, tokens))
}

/// Token perplexity `exp(NLL / tokens)` of `corpus`.
pub fn corpus_perplexity(model: &WriterModel, corpus: &[CorpusPair], max_len: usize) -> Result<f64> {
    let (nll, n) = corpus_nll(model, corpus, max_len)?;
    Ok((nll / n.max(1) as f64).exp())
}

/// Builds a model for `corpus` and trains it with one Adam step per pair.
pub fn train_writer(corpus: &[CorpusPair], opts: &WriterTrainOptions) -> Result<(WriterModel, WriterTrainReport)> {
    let mut rng = seeded_rng(opts.seed);
    let mut model = WriterModel::for_corpus(
        opts.dims.clone(),
        corpus,
        opts.min_freq,
        opts.stopwords.clone(),
        opts.max_len,
        &mut rng,
    )?;
    let report = train_model(&mut model, corpus, opts, &mut rng)?;
    Ok((model, report))
}

/// Continues training an existing model.
pub fn train_model(
    model: &mut WriterModel,
    corpus: &[CorpusPair],
    opts: &WriterTrainOptions,
    rng: &mut crate::numerics::SeededRng,
) -> Result<WriterTrainReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    let sources = corpus
        .iter()
        .map(|p| Source::new(model, &p.src, &p.entities, opts.max_len))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<Vec<usize>> = corpus
        .iter()
        .zip(&sources)
        .map(|(p, s)| model.target_ids(s, &p.tgt, opts.max_len))
        .collect();
    let mut adam = Adam::new(opts.learning_rate, &model.params);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::new();
    let mut epoch_perplexities = Vec::new();
    let gates = GateOverride::default();
    for epoch in 0..opts.epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut nll = 0.0;
        let mut tokens = 0usize;
        for &i in &order {
            let grads = {
                let mut tape = Tape::new();
                let v = model.bind(&mut tape, &model.params);
                let s = model.sequence_vars(&mut tape, &v, &sources[i], &targets[i], opts.coverage_lambda, &gates);
                let loss = tape.scalar(s.loss);
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        op: "writer loss",
                        index: i,
                        value: loss,
                    });
                }
                loss_sum += loss;
                nll += s.gold_probs.iter().map(|p| -p.ln()).sum::<f64>();
                tokens += s.gold_probs.len();
                tape.backward(s.loss)?.params(&model.params)
            };
            adam.update(&mut model.params, &grads);
        }
        let ppl = (nll / tokens as f64).exp();
        epoch_losses.push(loss_sum / corpus.len() as f64);
        epoch_perplexities.push(ppl);
        log::debug!("writer epoch {} loss {:.4} ppl {:.4}", epoch + 1, loss_sum / corpus.len() as f64, ppl);
        if let Some(target) = opts.target_perplexity {
            if ppl < target && corpus_perplexity(model, corpus, opts.max_len)? < target {
                break;
            }
        }
    }
    let final_perplexity = corpus_perplexity(model, corpus, opts.max_len)?;
    Ok(WriterTrainReport {
        epochs_run: epoch_losses.len(),
        epoch_losses,
        epoch_perplexities,
        final_perplexity,
    })
}
