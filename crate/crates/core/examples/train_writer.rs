//! Fit the writer on the toy title-to-abstract corpus until it memorizes it,
//! then save and reload the model.

use kgwriter::eval::perplexity;
use kgwriter::toy::toy_corpus;
use kgwriter::writer::{train_writer, WriterModel, WriterTrainOptions};

fn main() -> kgwriter::Result<()> {
    let corpus = toy_corpus().title2abstract;
    let opts = WriterTrainOptions {
        min_freq: 1,
        target_perplexity: Some(1.3),
        ..WriterTrainOptions::default()
    };
    let (model, report) = train_writer(&corpus, &opts)?;
    for (i, p) in report.epoch_perplexities.iter().enumerate().step_by(5) {
        println!("epoch {:>3}: perplexity {p:.3}", i + 1);
    }
    println!("stopped after {} epochs at perplexity {:.4}", report.epochs_run, report.final_perplexity);

    let mut buf = Vec::new();
    model.save(&mut buf)?;
    let back = WriterModel::load(&mut buf.as_slice())?;
    println!(
        "model file {} bytes, vocabulary {}, reloaded perplexity {:.4}",
        buf.len(),
        back.vocab.len(),
        perplexity(&back, &corpus)?
    );
    Ok(())
}
