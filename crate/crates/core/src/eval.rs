//! Automatic metrics: perplexity, n-gram overlap between input and output,
//! sentence-level entity repetition, BLEU and ROUGE-L.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::writer::{CorpusPair, Source, WriterModel, MAX_TOKENS};

/// Anything that assigns a probability to each gold token of a target given
/// its source. The returned list includes any end-of-sequence token the
/// model scores.
pub trait SequenceScorer {
    fn gold_probabilities(&self, pair: &CorpusPair) -> Result<Vec<f64>>;
}

impl SequenceScorer for WriterModel {
    /// Teacher-forced probabilities, EOS included, with texts truncated to
    /// the default length cap.
    fn gold_probabilities(&self, pair: &CorpusPair) -> Result<Vec<f64>> {
        let src = Source::new(self, &pair.src, &pair.entities, MAX_TOKENS)?;
        Ok(self.sequence_loss(&src, &pair.tgt, MAX_TOKENS, 0.0)?.gold_probs)
    }
}

/// `exp(−mean ln P)` over every gold token of `corpus`; `+∞` when any gold
/// token has probability zero, `1` for an empty corpus.
pub fn perplexity<S: SequenceScorer + ?Sized>(model: &S, corpus: &[CorpusPair]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for pair in corpus {
        for p in model.gold_probabilities(pair)? {
            if p <= 0.0 {
                return Ok(f64::INFINITY);
            }
            sum += p.ln();
            n += 1;
        }
    }
    if n == 0 {
        return Ok(1.0);
    }
    Ok((-sum / n as f64).exp())
}

fn ngrams(tokens: &[String], n: usize) -> HashSet<&[String]> {
    if n == 0 || tokens.len() < n {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    /// Percentage in `[0, 100]`.
    pub percent: f64,
    /// Set when the input has fewer than `n` tokens; `percent` is then 0.
    pub input_too_short: bool,
}

/// Share of the distinct input n-grams that also occur in the output.
pub fn ngram_overlap(input: &[String], output: &[String], n: usize) -> Overlap {
    let n = n.max(1);
    let inp = ngrams(input, n);
    if inp.is_empty() {
        return Overlap {
            percent: 0.0,
            input_too_short: true,
        };
    }
    let out = ngrams(output, n);
    let shared = inp.iter().filter(|g| out.contains(*g)).count();
    Overlap {
        percent: 100.0 * shared as f64 / inp.len() as f64,
        input_too_short: false,
    }
}

/// Splits after `.`, `!` or `?` when followed by whitespace or the end.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(i, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let next = chars.get(k + 1).map(|&(_, c)| c);
            if next.is_none_or(char::is_whitespace) {
                let end = i + c.len_utf8();
                out.push(text[start..end].trim().to_string());
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.retain(|s| !s.is_empty());
    out
}

/// Lowercased words with surrounding punctuation removed.
pub fn words(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Counts non-overlapping, longest-first mentions of each lexicon entry.
fn mention_counts(tokens: &[String], lexicon: &HashMap<Vec<String>, usize>, max_len: usize) -> HashMap<usize, usize> {
    let mut counts = HashMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let hit = (1..=max_len.min(tokens.len() - i))
            .rev()
            .find_map(|n| lexicon.get(&tokens[i..i + n]).map(|&e| (n, e)));
        match hit {
            Some((n, e)) => {
                *counts.entry(e).or_default() += 1;
                i += n;
            }
            None => i += 1,
        }
    }
    counts
}

/// Fraction of sentences mentioning some lexicon entity at least twice.
pub fn repetition_rate(text: &str, lexicon: &[&str]) -> f64 {
    let sentences: Vec<Vec<String>> = split_sentences(text).iter().map(|s| words(s)).collect();
    repetition_rate_sentences(&sentences, lexicon)
}

/// As [`repetition_rate`] on already split and tokenized sentences.
pub fn repetition_rate_sentences(sentences: &[Vec<String>], lexicon: &[&str]) -> f64 {
    let entries: HashMap<Vec<String>, usize> = lexicon
        .iter()
        .enumerate()
        .map(|(i, e)| (words(e), i))
        .filter(|(w, _)| !w.is_empty())
        .collect();
    if sentences.is_empty() || entries.is_empty() {
        return 0.0;
    }
    let max_len = entries.keys().map(Vec::len).max().unwrap_or(1);
    let repeated = sentences
        .iter()
        .filter(|s| mention_counts(s, &entries, max_len).values().any(|&c| c >= 2))
        .count();
    repeated as f64 / sentences.len() as f64
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_default() += 1;
        }
    }
    m
}

/// Clipped n-gram matches and candidate n-gram count.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let matched = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuRouge {
    /// Cumulative BLEU-1 to BLEU-`max_n`.
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
}

/// Sentence-level BLEU with brevity penalty and add-one smoothing of zero
/// match counts for `n ≥ 2`, plus ROUGE-L F1. Empty candidate or reference
/// gives zeros.
pub fn bleu_rouge(candidate: &[String], reference: &[String], max_n: usize) -> BleuRouge {
    let max_n = max_n.max(1);
    if candidate.is_empty() || reference.is_empty() {
        return BleuRouge {
            bleu: vec![0.0; max_n],
            rouge_l: 0.0,
        };
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    let mut log_sum = 0.0;
    let mut bleu = Vec::with_capacity(max_n);
    let mut zero = false;
    for n in 1..=max_n {
        let (m, total) = modified_precision(candidate, reference, n);
        let p = if n == 1 {
            if m == 0 {
                zero = true;
            }
            m as f64 / total as f64
        } else if m == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            m as f64 / total as f64
        };
        if !zero {
            log_sum += p.ln();
        }
        bleu.push(if zero { 0.0 } else { bp * (log_sum / n as f64).exp() });
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let rouge_l = if lcs == 0.0 {
        0.0
    } else {
        let (p, rec) = (lcs / c, lcs / r);
        2.0 * p * rec / (p + rec)
    };
    BleuRouge { bleu, rouge_l }
}

/// One metric with its parameters, as written by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub values: BTreeMap<String, f64>,
    pub corpus: Vec<String>,
    pub params: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(metric: &str, corpus: &[&str]) -> Self {
        MetricReport {
            metric: metric.to_string(),
            values: BTreeMap::new(),
            corpus: corpus.iter().map(|s| s.to_string()).collect(),
            params: BTreeMap::new(),
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn param(mut self, key: &str, v: impl ToString) -> Self {
        self.params.insert(key.to_string(), v.to_string());
        self
    }
}

/// Aligned text table, one row per report and value.
pub fn format_table(reports: &[MetricReport]) -> String {
    let rows: Vec<(String, String, String)> = reports
        .iter()
        .flat_map(|r| {
            r.values
                .iter()
                .map(move |(k, v)| (r.metric.clone(), k.clone(), format!("{v:.4}")))
        })
        .collect();
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<w0$}  {:<w1$}  value\n", "metric", "field");
    for (m, k, v) in rows {
        out.push_str(&format!("{m:<w0$}  {k:<w1$}  {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    struct Uniform(usize);

    impl SequenceScorer for Uniform {
        fn gold_probabilities(&self, pair: &CorpusPair) -> Result<Vec<f64>> {
            Ok(vec![1.0 / self.0 as f64; pair.tgt.len()])
        }
    }

    #[test]
    fn uniform_model_perplexity_is_vocabulary_size() {
        let corpus = vec![CorpusPair::new("a", "x y z", &[]), CorpusPair::new("b", "q", &[])];
        for v in [1, 2, 7, 50] {
            let ppl = perplexity(&Uniform(v), &corpus).unwrap();
            assert!((ppl - v as f64).abs() < 1e-12 * v as f64, "{ppl} vs {v}");
        }
    }

    #[test]
    fn zero_probability_is_infinite() {
        struct Zero;
        impl SequenceScorer for Zero {
            fn gold_probabilities(&self, _: &CorpusPair) -> Result<Vec<f64>> {
                Ok(vec![0.5, 0.0])
            }
        }
        let corpus = vec![CorpusPair::new("a", "b c", &[])];
        assert_eq!(perplexity(&Zero, &corpus).unwrap(), f64::INFINITY);
    }

    #[test]
    fn overlap_hand_cases() {
        let o = ngram_overlap(&toks("a b c"), &toks("x a b"), 2);
        assert_eq!(o.percent, 50.0);
        assert_eq!(ngram_overlap(&toks("a b"), &toks("c d"), 1).percent, 0.0);
        let short = ngram_overlap(&toks("a"), &toks("a"), 2);
        assert!(short.input_too_short);
        assert_eq!(short.percent, 0.0);
    }

    #[test]
    fn repetition_cases() {
        assert_eq!(repetition_rate("snail inhibits snail.", &["snail"]), 1.0);
        assert_eq!(repetition_rate("no entities here. none at all!", &["snail"]), 0.0);
        assert_eq!(split_sentences("a b. c d? e"), vec!["a b.", "c d?", "e"]);
        assert_eq!(split_sentences("v1.2 works."), vec!["v1.2 works."]);
    }

    #[test]
    fn bleu_rouge_hand_case() {
        let r = bleu_rouge(&toks("a b c d"), &toks("a b d c"), 4);
        let (p1, p2, p3, p4) = (1.0f64, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 2.0);
        let want = [
            p1,
            (p1 * p2).sqrt(),
            (p1 * p2 * p3).powf(1.0 / 3.0),
            (p1 * p2 * p3 * p4).powf(0.25),
        ];
        for (g, w) in r.bleu.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert!((r.rouge_l - 0.75).abs() < 1e-12);
        assert_eq!(lcs_len(&toks("a b c d"), &toks("a b d c")), 3);
    }

    #[test]
    fn bleu_exact_and_disjoint() {
        let a = toks("the cat sat on the mat");
        let r = bleu_rouge(&a, &a, 4);
        assert!(r.bleu.iter().all(|&b| (b - 1.0).abs() < 1e-12));
        assert_eq!(r.rouge_l, 1.0);
        let d = bleu_rouge(&toks("x y z"), &a, 4);
        assert!(d.bleu.iter().all(|&b| b == 0.0));
        assert_eq!(d.rouge_l, 0.0);
        assert_eq!(bleu_rouge(&[], &a, 4).bleu, vec![0.0; 4]);
    }
}
