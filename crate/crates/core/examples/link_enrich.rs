//! Train the link model on a small clustered graph, check ranking quality and
//! enrich the graph by sharing edges between similar entities.

use kgwriter::kg::Triple;
use kgwriter::link::{
    entities_by_type, entity_similarity, propagate_links, related_entities, sample_corruption, LinkConfig,
    LinkModel, MarginTrainOptions,
};
use kgwriter::numerics::seeded_rng;
use kgwriter::toy::cluster_kg;

fn main() -> kgwriter::Result<()> {
    let kg = cluster_kg();
    let mut model = LinkModel::new(LinkConfig::default(), &kg.train, &kg.context, &mut seeded_rng(7));
    let opts = MarginTrainOptions { epochs: 200, ..MarginTrainOptions::default() };
    let report = model.train_margin(&kg.train, &kg.context, &opts)?;
    println!(
        "hinge loss {:.3} -> {:.3} over {} epochs",
        report.epoch_losses[0],
        report.epoch_losses.last().unwrap(),
        report.epoch_losses.len()
    );

    let reps = model.represent_all(&kg.train, &kg.context)?;
    let by_type = entities_by_type(&kg.full);
    let mut rng = seeded_rng(99);
    let mut mrr = 0.0;
    for &(head, relation, tail) in &kg.held_out {
        let gold = Triple { head, relation, tail, confidence: 1.0 };
        let s = model.score_triple(&reps[head], relation, &reps[tail])?;
        let mut rank = 1;
        for _ in 0..20 {
            let c = sample_corruption(&kg.full, &by_type, &gold, &mut rng).expect("same-type entities exist");
            if model.score_triple(&reps[c.head], relation, &reps[c.tail])? >= s {
                rank += 1;
            }
        }
        mrr += 1.0 / rank as f64;
    }
    println!("held-out MRR against 20 corruptions: {:.3}", mrr / kg.held_out.len() as f64);

    let (a, b) = kg.twins;
    println!("twin similarity: {:.3}", entity_similarity(&reps[a], &reps[b]));
    let enriched = propagate_links(&kg.train, &reps, 0.9)?;
    println!("enriched: {} -> {} triples", kg.train.triples().len(), enriched.triples().len());
    for t in enriched.triples().iter().filter(|t| t.confidence < 1.0).take(5) {
        let name = |e: usize| enriched.entities()[e].surface_name.clone();
        println!(
            "  {} {} {} ({:.3})",
            name(t.head),
            enriched.relations()[t.relation].subtype_name,
            name(t.tail),
            t.confidence
        );
    }
    println!("related to {}:", enriched.entities()[a].surface_name);
    for (e, c) in related_entities(&[a], &enriched, 5) {
        println!("  {} ({c:.3})", enriched.entities()[e].surface_name);
    }
    Ok(())
}
