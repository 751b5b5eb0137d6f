//! Beam decoding with and without repetition masking, and pure copy mode.

use kgwriter::toy::toy_corpus;
use kgwriter::writer::{beam_search, train_writer, BeamOptions, GateOverride, Source, WriterDims, WriterTrainOptions};

fn main() -> kgwriter::Result<()> {
    let corpus = toy_corpus().title2abstract;
    let opts = WriterTrainOptions {
        dims: WriterDims { embedding: 32, hidden: 32, attention: 32, ..WriterDims::default() },
        epochs: 8,
        min_freq: 1,
        ..WriterTrainOptions::default()
    };
    // deliberately undertrained so that repeats show up without masking
    let (model, _) = train_writer(&corpus, &opts)?;

    let masked = BeamOptions { beam: 4, max_len: 25, ..BeamOptions::default() };
    let variants = [
        ("masked", masked),
        ("unmasked", BeamOptions { masking: false, ..masked }),
        ("copy only", BeamOptions { gates: GateOverride { generate: Some(0.0), copy_title: Some(1.0) }, ..masked }),
    ];
    for pair in corpus.iter().take(3) {
        let src = Source::new(&model, &pair.src, &pair.entities, opts.max_len)?;
        println!("title: {}", pair.src.join(" "));
        for (name, o) in &variants {
            let d = beam_search(&model, &src, o)?;
            let tagged: Vec<String> = d.tokens.iter().map(|t| format!("{}/{:?}", t.token, t.source)).collect();
            println!("  {name:<9} score {:.3}: {}", d.score, tagged.join(" "));
        }
    }
    Ok(())
}
