use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use super::model::LinkModel;
use crate::error::{Error, Result};
use crate::kg::{ContextIndex, EntityType, KnowledgeGraph, Triple};
use crate::numerics::{seeded_rng, Adam, Tape, Tensor, Var};

#[derive(Debug, Clone)]
pub struct MarginTrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MarginTrainOptions {
    fn default() -> Self {
        MarginTrainOptions {
            epochs: 200,
            seed: 7,
            learning_rate: 0.001,
            batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MarginTrainReport {
    /// Sum of hinge terms over each epoch, measured before that batch's
    /// update.
    pub epoch_losses: Vec<f64>,
    /// `(gold, corruption)` pairs sampled in the last epoch.
    pub last_corruptions: Vec<(Triple, Triple)>,
    pub updates: u64,
}

/// Same-type replacement of head or tail; resamples while the corruption is
/// a real triple. `None` when no valid corruption exists.
pub fn sample_corruption<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    by_type: &HashMap<EntityType, Vec<usize>>,
    gold: &Triple,
    rng: &mut R,
) -> Option<Triple> {
    let replace_head = rng.gen_bool(0.5);
    for side in [replace_head, !replace_head] {
        let slot = if side { gold.head } else { gold.tail };
        let ty = g.entities()[slot].entity_type;
        let pool = &by_type[&ty];
        for _ in 0..100 {
            let cand = pool[rng.gen_range(0..pool.len())];
            let (h, t) = if side { (cand, gold.tail) } else { (gold.head, cand) };
            if !g.contains(h, gold.relation, t) {
                return Some(Triple {
                    head: h,
                    relation: gold.relation,
                    tail: t,
                    confidence: 1.0,
                });
            }
        }
    }
    None
}

pub fn entities_by_type(g: &KnowledgeGraph) -> HashMap<EntityType, Vec<usize>> {
    let mut map: HashMap<EntityType, Vec<usize>> = HashMap::new();
    for e in g.entities() {
        map.entry(e.entity_type).or_default().push(e.id);
    }
    map
}

impl LinkModel {
    /// Hinge loss `Σ max(0, γ + score(corrupt) − score(gold))` on one batch,
    /// built on `tape`. Entities are encoded once per batch.
    pub(crate) fn batch_loss<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        g: &KnowledgeGraph,
        ctx: &ContextIndex,
        pairs: &[(Triple, Triple)],
    ) -> Result<Var> {
        let v = self.bind(tape);
        let mut reps: BTreeMap<usize, Var> = BTreeMap::new();
        let mut terms = Vec::with_capacity(pairs.len());
        for (gold, bad) in pairs {
            for e in [gold.head, gold.tail, bad.head, bad.tail] {
                if let std::collections::btree_map::Entry::Vacant(slot) = reps.entry(e) {
                    slot.insert(self.combined_var(tape, &v, g, ctx, e)?);
                }
            }
            let sg = self.score_var(tape, &v, reps[&gold.head], gold.relation, reps[&gold.tail])?;
            let sb = self.score_var(tape, &v, reps[&bad.head], bad.relation, reps[&bad.tail])?;
            let diff = tape.sub(sb, sg);
            let shifted = tape.constant(crate::numerics::Tensor::scalar(self.config.margin));
            let pre = tape.add(diff, shifted);
            terms.push(tape.leaky_relu(pre, 0.0));
        }
        let stacked = tape.concat(&terms);
        Ok(tape.sum(stacked))
    }

    /// Hinge loss of `pairs` and its gradient for every parameter, in store
    /// order.
    pub fn margin_loss_and_gradients(
        &self,
        g: &KnowledgeGraph,
        ctx: &ContextIndex,
        pairs: &[(Triple, Triple)],
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let loss = self.batch_loss(&mut tape, g, ctx, pairs)?;
        let grads = tape.backward(loss)?.params(&self.params);
        Ok((tape.scalar(loss), grads))
    }

    /// Margin-ranking training with Adam. Deterministic for a fixed seed.
    pub fn train_margin(
        &mut self,
        g: &KnowledgeGraph,
        ctx: &ContextIndex,
        opts: &MarginTrainOptions,
    ) -> Result<MarginTrainReport> {
        if g.triples().is_empty() {
            return Err(Error::InvalidArgument("cannot train on a graph with no triples".into()));
        }
        if opts.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let mut rng = seeded_rng(opts.seed);
        let by_type = entities_by_type(g);
        let mut adam = Adam::new(opts.learning_rate, &self.params);
        let mut report = MarginTrainReport::default();
        let mut order: Vec<usize> = (0..g.triples().len()).collect();
        for epoch in 0..opts.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut sampled = Vec::with_capacity(order.len());
            for chunk in order.chunks(opts.batch_size) {
                let pairs: Vec<(Triple, Triple)> = chunk
                    .iter()
                    .filter_map(|&i| {
                        let gold = g.triples()[i];
                        sample_corruption(g, &by_type, &gold, &mut rng).map(|bad| (gold, bad))
                    })
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                sampled.extend_from_slice(&pairs);
                let grads = {
                    let mut tape = Tape::new();
                    let loss = self.batch_loss(&mut tape, g, ctx, &pairs)?;
                    let value = tape.scalar(loss);
                    epoch_loss += value;
                    if value == 0.0 {
                        continue;
                    }
                    tape.backward(loss)?.params(&self.params)
                };
                adam.update(&mut self.params, &grads);
            }
            log::debug!("link epoch {epoch}: loss {epoch_loss:.6}");
            report.epoch_losses.push(epoch_loss);
            report.last_corruptions = sampled;
        }
        report.updates = adam.steps();
        Ok(report)
    }
}
