mod common;

use std::collections::BTreeSet;

use common::*;
use kgwriter::kg::{
    ingest_records, ingest_sentences, ingest_triples, match_title_entities, write_graph, write_sentences, EntityType,
    TripleRecord,
};
use kgwriter::Error;
use proptest::prelude::*;

const SHARED: &str = "\
# figure 3 fragment
MESH:D002118\tcalcium\tChemical\taffects_binding\tGENE:7157\ttp53\tGene
MESH:D015032\tzinc\tChemical\taffects_binding\tGENE:929\tcd14 molecule\tGene
MESH:D015032\tzinc\tChemical\tincreases_expression\tGENE:8828\tneuropilin 2\tGene
MESH:D002118\tcalcium\tChemical\tincreases_expression\tGENE:1956\tegfr\tGene

MESH:D015032\tzinc\tChemical\tincreases_expression\tGENE:7157\ttp53\tGene
MESH:D002118\tcalcium\tChemical\taffects_binding\tGENE:929\tcd14 molecule\tGene\t1
";

#[test]
fn empty_stream_gives_empty_graph() {
    let g = ingest_triples("".as_bytes()).unwrap();
    assert_eq!((g.num_entities(), g.triples().len()), (0, 0));
}

#[test]
fn shared_neighbor_fragment() {
    let g = ingest_triples(SHARED.as_bytes()).unwrap();
    assert_eq!(g.triples().len(), 6);
    assert_eq!(g.num_entities(), 6);
    assert_eq!(g, shared_neighbors());
    let ca = g.entity_by_external("MESH:D002118").unwrap();
    let names: Vec<&str> = g
        .neighbor_entities(ca)
        .unwrap()
        .iter()
        .map(|&e| g.entities()[e].surface_name.as_str())
        .collect();
    assert_eq!(names, ["tp53", "cd14 molecule", "egfr"]);
}

#[test]
fn repeated_triple_stored_once() {
    let line = "A:1\ta\tGene\tbinds\tB:1\tb\tGene\n";
    let g = ingest_triples(line.repeat(3).as_bytes()).unwrap();
    assert_eq!(g.triples().len(), 1);
}

#[test]
fn malformed_lines_report_line_numbers() {
    let bad = "A:1\ta\tGene\tbinds\tB:1\tb\tGene\nA:1\ta\tProtein\tbinds\tB:1\tb\tGene\n";
    match ingest_triples(bad.as_bytes()) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 2);
            assert!(msg.contains("Protein"));
        }
        other => panic!("{other:?}"),
    }
    match ingest_triples("\n\nonly\tthree\tcols\n".as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn graph_round_trips_through_text() {
    let g = shared_neighbors();
    let mut buf = Vec::new();
    write_graph(&g, &mut buf).unwrap();
    assert_eq!(ingest_triples(buf.as_slice()).unwrap(), g);
}

#[test]
fn sentences_index_both_ways() {
    let g = shared_neighbors();
    let text = r#"{"sid": 4, "tokens": ["Calcium", "binds", "CD14"], "entities": ["MESH:D002118", "GENE:929", "NOPE:1"]}
{"sid": 9, "tokens": ["zinc"], "entities": ["MESH:D015032"]}
"#;
    let ctx = ingest_sentences(text.as_bytes(), &g).unwrap();
    let ca = g.entity_by_external("MESH:D002118").unwrap();
    assert_eq!(ctx.sentence(4).unwrap(), toks("calcium binds cd14").as_slice());
    assert_eq!(ctx.sentence_ids(ca), &[4]);
    assert_eq!(ctx.num_sentences(), 2);
    let mut buf = Vec::new();
    write_sentences(&ctx, &g, &mut buf).unwrap();
    let again = ingest_sentences(buf.as_slice(), &g).unwrap();
    assert_eq!(again.sentence_ids(ca), ctx.sentence_ids(ca));
}

#[test]
fn title_matching_prefers_longest_span() {
    let g = shared_neighbors();
    let m = match_title_entities(&toks("zinc and cd14 molecule regulate neuropilin 2"), &g);
    let found: Vec<&str> = m.iter().map(|t| g.entities()[t.entity].surface_name.as_str()).collect();
    assert_eq!(found, ["zinc", "cd14 molecule", "neuropilin 2"]);
}

fn record(h: usize, r: usize, t: usize) -> TripleRecord {
    let ty = |i: usize| if i % 2 == 0 { EntityType::Gene } else { EntityType::Chemical };
    TripleRecord {
        head_external_id: format!("E:{h}"),
        head_name: format!("e{h}"),
        head_type: ty(h),
        relation: format!("r{r}"),
        tail_external_id: format!("E:{t}"),
        tail_name: format!("e{t}"),
        tail_type: ty(t),
        confidence: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_mirrors_triples(raw in prop::collection::vec((0usize..15, 0usize..4, 0usize..15), 100)) {
        let g = ingest_records(raw.iter().map(|&(h, r, t)| record(h, r, t))).unwrap();
        // brute-force rebuild of the distinct (head, relation, tail) names
        let want: BTreeSet<(String, String, String)> = raw
            .iter()
            .map(|&(h, r, t)| (format!("E:{h}"), format!("r{r}"), format!("E:{t}")))
            .collect();
        let got: BTreeSet<(String, String, String)> = g
            .triples()
            .iter()
            .map(|t| (
                g.entities()[t.head].external_id.clone(),
                g.relations()[t.relation].subtype_name.clone(),
                g.entities()[t.tail].external_id.clone(),
            ))
            .collect();
        prop_assert_eq!(&got, &want);
        prop_assert_eq!(g.triples().len(), want.len());
        // every triple appears exactly once across all adjacency lists
        let mut seen = BTreeSet::new();
        for e in 0..g.num_entities() {
            for edge in g.neighbors(e).unwrap() {
                prop_assert!(seen.insert((e, edge.relation, edge.tail)));
                prop_assert!(g.contains(e, edge.relation, edge.tail));
            }
        }
        prop_assert_eq!(seen.len(), g.triples().len());
        // ids follow first appearance
        let mut order = Vec::new();
        for &(h, _, t) in &raw {
            for x in [h, t] {
                if !order.contains(&x) {
                    order.push(x);
                }
            }
        }
        for (id, x) in order.iter().enumerate() {
            prop_assert_eq!(g.entity_by_external(&format!("E:{x}")), Some(id));
        }
    }

    #[test]
    fn title_spans_do_not_overlap(words in prop::collection::vec(0usize..8, 1..20)) {
        let g = shared_neighbors();
        let vocab = ["zinc", "calcium", "cd14", "molecule", "neuropilin", "2", "and", "tp53"];
        let title: Vec<String> = words.iter().map(|&i| vocab[i].to_string()).collect();
        let m = match_title_entities(&title, &g);
        for w in m.windows(2) {
            prop_assert!(w[0].start < w[0].end && w[0].end <= w[1].start);
        }
    }
}
