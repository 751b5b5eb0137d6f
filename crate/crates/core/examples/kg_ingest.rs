//! Load the toy triple store and its sentence index, then inspect it.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use kgwriter::kg::{ingest_sentences, ingest_triples, match_title_entities, tokenize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let g = ingest_triples(BufReader::new(File::open(data.join("triples.tsv"))?))?;
    let ctx = ingest_sentences(BufReader::new(File::open(data.join("sentences.jsonl"))?), &g)?;
    println!(
        "{} entities, {} relations, {} triples, {} sentences",
        g.num_entities(),
        g.num_relations(),
        g.triples().len(),
        ctx.num_sentences()
    );

    let snail = g.entity_by_external("GENE:6615").expect("snail is in the toy graph");
    println!("\noutgoing edges of {}:", g.entity(snail)?.surface_name);
    for edge in g.neighbors(snail)? {
        println!("  {} -> {}", g.relations()[edge.relation].subtype_name, g.entities()[edge.tail].surface_name);
    }
    for sent in ctx.entity_sentences(snail).iter().take(2) {
        println!("  mentioned in: {}", sent.join(" "));
    }

    let title = "snail transcription factor negatively regulates maspin tumor suppressor in human prostate cancer cells";
    let tokens = tokenize(title);
    println!("\nentities in title:");
    for m in match_title_entities(&tokens, &g) {
        println!("  [{}..{}) {}", m.start, m.end, g.entities()[m.entity].surface_name);
    }
    Ok(())
}
