//! Train the three stage writers on the toy corpus and run the writing chain
//! over the toy titles, printing one JSON record per title.

use kgwriter::toy::{toy_corpus, TOY_TITLES};
use kgwriter::writer::{
    generate_chain, train_writer, BeamOptions, BeamWriter, ChainOptions, ChainWriters, Task, WriterModel,
    WriterTrainOptions,
};

fn main() -> kgwriter::Result<()> {
    let toy = toy_corpus();
    let opts = WriterTrainOptions {
        min_freq: 1,
        epochs: 60,
        target_perplexity: Some(1.3),
        ..WriterTrainOptions::default()
    };
    let mut models: Vec<WriterModel> = Vec::new();
    for task in Task::ALL {
        let (m, report) = train_writer(toy.pairs(task), &opts)?;
        println!("{task}: perplexity {:.3} after {} epochs", report.final_perplexity, report.epochs_run);
        models.push(m);
    }
    let beam = BeamOptions { beam: 4, max_len: 30, ..BeamOptions::default() };
    let w: Vec<BeamWriter<'_>> = models.iter().map(|model| BeamWriter { model, options: beam }).collect();
    let writers = ChainWriters {
        title_to_abstract: &w[0],
        abstract_to_conclusion: &w[1],
        conclusion_to_title: &w[2],
    };
    for title in TOY_TITLES.lines().filter(|l| !l.trim().is_empty()) {
        let record = generate_chain(title, &toy.graph, &writers, &ChainOptions::default())?;
        println!("{}", serde_json::to_string_pretty(&record)?);
    }
    Ok(())
}
