//! Overlap, repetition and reference metrics on a hand-written pair.

use kgwriter::eval::{bleu_rouge, format_table, ngram_overlap, repetition_rate, MetricReport};
use kgwriter::kg::tokenize;

fn main() {
    let title = tokenize("snail transcription factor negatively regulates maspin tumor suppressor");
    let written = "Snail transcription factor represses maspin. Maspin tumor suppressor loss promotes maspin \
                   dependent invasion. Snail is a target.";
    let reference = "Snail transcription factor represses maspin. Loss of maspin promotes invasion.";
    let out = tokenize(written);

    let mut overlap = MetricReport::new("title n-gram overlap", &["example"]);
    for n in 1..=4 {
        let o = ngram_overlap(&title, &out, n);
        overlap = overlap.value(&format!("{n}-gram %"), o.percent);
    }
    let lexicon = ["snail", "maspin", "maspin tumor suppressor"];
    let rep = MetricReport::new("repetition rate", &["example"])
        .value("rate", repetition_rate(written, &lexicon))
        .param("entities", lexicon.len());
    let s = bleu_rouge(&out, &tokenize(reference), 4);
    let mut refs = MetricReport::new("reference metrics", &["example"]).value("ROUGE-L", s.rouge_l);
    for (i, b) in s.bleu.iter().enumerate() {
        refs = refs.value(&format!("BLEU-{}", i + 1), *b);
    }
    print!("{}", format_table(&[overlap, rep, refs]));
}
