mod common;

use common::*;
use kgwriter::numerics::{gru_cell, Tensor};
use kgwriter::writer::{
    beam_search, train_writer, BeamOptions, CorpusPair, GateOverride, Source, WriterDims, WriterModel,
    WriterTrainOptions, BOS, EOS, PAD,
};
use proptest::prelude::*;

fn param<'a>(m: &'a WriterModel, name: &str) -> &'a Tensor {
    m.params.get(m.param_id(name).unwrap_or_else(|| panic!("{name}")))
}

fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.rows()).map(|i| w.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn weighted(p: &[f64], items: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; items[0].len()];
    for (w, it) in p.iter().zip(items) {
        for (o, x) in out.iter_mut().zip(it) {
            *o += w * x;
        }
    }
    out
}

fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = kgwriter::numerics::seeded_rng(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn vecs(n: usize, d: usize, seed: u64) -> Vec<Tensor> {
    (0..n).map(|i| Tensor::vector(rand_vec(d, seed * 100 + i as u64))).collect()
}

/// Oracle for one hop: scores ν·tanh(W_q q + b + U_e e_j + w_cov ĉ_j).
fn hop_oracle(m: &WriterModel, prefix: &str, k: usize, q: &[f64], ents: &[Vec<f64>], cov: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let wq = param(m, &format!("{prefix}.{k}.w_q"));
    let ue = param(m, &format!("{prefix}.{k}.u_e"));
    let b = param(m, &format!("{prefix}.{k}.b")).data();
    let nu = param(m, &format!("{prefix}.{k}.nu")).data();
    let wc = param(m, "mem.w_cov").data();
    let base = add(&matvec(wq, q), b);
    let scores: Vec<f64> = ents
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let mut pre = add(&base, &matvec(ue, e));
            if let Some(c) = cov {
                for (p, w) in pre.iter_mut().zip(wc) {
                    *p += w * c[j];
                }
            }
            dot(nu, &pre.iter().map(|x| x.tanh()).collect::<Vec<_>>())
        })
        .collect();
    let p = softmax(&scores);
    let read = weighted(&p, ents);
    (p, read)
}

fn ref_oracle(m: &WriterModel, h: &[f64], states: &[Vec<f64>], cov: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let base = add(&matvec(param(m, "ref.w_h"), h), param(m, "ref.b").data());
    let wc = param(m, "ref.w_cov").data();
    let vs = param(m, "ref.varsigma").data();
    let scores: Vec<f64> = states
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let pre = add(&base, &matvec(param(m, "ref.w_tau"), s));
            let act: Vec<f64> = pre.iter().zip(wc).map(|(p, w)| (p + w * cov[j]).tanh()).collect();
            dot(vs, &act)
        })
        .collect();
    let a = softmax(&scores);
    (weighted(&a, states), a)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
    }
}

fn model() -> WriterModel {
    writer_with_words(
        &["snail", "maspin", "prostate", "cancer", "regulates", "the", "cat", "sat", "."],
        &["snail", "maspin", "prostate cancer"],
        tiny_dims(),
        11,
    )
}

// ---- encoder ----

#[test]
fn encoder_single_token_is_one_gru_step_each_way() {
    let m = model();
    let half = m.dims.hidden / 2;
    let states = m.encode_reference(&toks("snail")).unwrap();
    assert_eq!(states.len(), 1);
    let emb = Tensor::vector(param(&m, "embedding").row(m.vocab.id("snail")).to_vec());
    let (f, b) = m.encoder_grus();
    let fwd = gru_cell(&emb, &Tensor::zeros(&[half]), &m.params, f).unwrap();
    let bwd = gru_cell(&emb, &Tensor::zeros(&[half]), &m.params, b).unwrap();
    let want: Vec<f64> = fwd.data().iter().chain(bwd.data()).cloned().collect();
    assert_close(states[0].data(), &want, 1e-12);
}

#[test]
fn encoder_zero_params_gives_zero_states() {
    let mut m = model();
    zero_params(&mut m.params);
    for s in m.encode_reference(&toks("snail regulates maspin")).unwrap() {
        assert!(s.data().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn encoder_three_tokens_match_two_pass_oracle() {
    let m = model();
    let half = m.dims.hidden / 2;
    let words = toks("snail regulates maspin");
    let embs: Vec<Tensor> = words
        .iter()
        .map(|w| Tensor::vector(param(&m, "embedding").row(m.vocab.id(w)).to_vec()))
        .collect();
    let (f, b) = m.encoder_grus();
    let mut fwd = Vec::new();
    let mut h = Tensor::zeros(&[half]);
    for e in &embs {
        h = gru_cell(e, &h, &m.params, f).unwrap();
        fwd.push(h.clone());
    }
    let mut bwd = vec![Tensor::zeros(&[half]); 3];
    let mut h = Tensor::zeros(&[half]);
    for j in (0..3).rev() {
        h = gru_cell(&embs[j], &h, &m.params, b).unwrap();
        bwd[j] = h.clone();
    }
    let states = m.encode_reference(&words).unwrap();
    for j in 0..3 {
        let want: Vec<f64> = fwd[j].data().iter().chain(bwd[j].data()).cloned().collect();
        assert_close(states[j].data(), &want, 1e-12);
    }
}

// ---- initial decoder state ----

#[test]
fn init_state_without_entities_is_last_encoder_state() {
    let m = model();
    let states = vecs(3, m.dims.hidden, 1);
    let q = m.init_decoder_state(&states, &[]).unwrap();
    assert_eq!(q.data(), states[2].data());
}

#[test]
fn init_state_single_entity_adds_it_each_hop() {
    let m = model();
    let states = vecs(2, m.dims.hidden, 2);
    let e = vecs(1, m.dims.hidden, 3);
    let q = m.init_decoder_state(&states, &e).unwrap();
    let phi = m.dims.init_hops as f64;
    let want: Vec<f64> = states[1].data().iter().zip(e[0].data()).map(|(h, x)| h + phi * x).collect();
    assert_close(q.data(), &want, 1e-12);
}

#[test]
fn init_state_two_entities_one_hop_by_hand() {
    let dims = WriterDims {
        embedding: 2,
        hidden: 2,
        attention: 2,
        init_hops: 1,
        memory_hops: 1,
    };
    let mut m = writer_with_words(&["a"], &[], dims, 1);
    set_param(&mut m.params, "init_hop.0.w_q", &[1.0, 0.0, 0.0, 1.0]);
    set_param(&mut m.params, "init_hop.0.u_e", &[1.0, 0.0, 0.0, 1.0]);
    set_param(&mut m.params, "init_hop.0.b", &[0.0, 0.0]);
    set_param(&mut m.params, "init_hop.0.nu", &[1.0, 1.0]);
    let h = vec![Tensor::vector(vec![0.5, -0.5])];
    let e = vec![Tensor::vector(vec![1.0, 0.0]), Tensor::vector(vec![0.0, 1.0])];
    // scores: tanh(1.5) + tanh(-0.5) and tanh(0.5) + tanh(0.5)
    let s1 = 1.5f64.tanh() + (-0.5f64).tanh();
    let s2 = 2.0 * 0.5f64.tanh();
    let p1 = s1.exp() / (s1.exp() + s2.exp());
    let want = [0.5 + p1, -0.5 + (1.0 - p1)];
    let q = m.init_decoder_state(&h, &e).unwrap();
    assert_close(q.data(), &want, 1e-12);
}

// ---- memory network ----

#[test]
fn memory_single_entity_reads_it_out() {
    let m = model();
    let h = Tensor::vector(rand_vec(m.dims.hidden, 4));
    let e = vecs(1, m.dims.hidden, 5);
    let (chi, beta) = m.memory_step(&h, &e, &[0.3]).unwrap();
    assert_eq!(beta, vec![1.0]);
    assert_close(chi.data(), e[0].data(), 1e-12);
}

#[test]
fn memory_identical_entities_get_uniform_weight() {
    let m = model();
    let h = Tensor::vector(rand_vec(m.dims.hidden, 6));
    let e = vec![Tensor::vector(rand_vec(m.dims.hidden, 7)); 4];
    let (_, beta) = m.memory_step(&h, &e, &[0.0; 4]).unwrap();
    assert_close(&beta, &[0.25; 4], 1e-12);
}

#[test]
fn memory_three_entities_two_hops_match_oracle() {
    let mut dims = tiny_dims();
    dims.memory_hops = 2;
    let m = writer_with_words(&["a", "b"], &[], dims, 9);
    let d = m.dims.hidden;
    let h = rand_vec(d, 8);
    let e = vecs(3, d, 9);
    let cov = [0.2, 0.0, 1.1];
    let ents: Vec<Vec<f64>> = e.iter().map(|t| t.data().to_vec()).collect();
    let (p0, r0) = hop_oracle(&m, "mem_hop", 0, &h, &ents, Some(&cov));
    let q1 = add(&r0, &h);
    let (p1, r1) = hop_oracle(&m, "mem_hop", 1, &q1, &ents, Some(&cov));
    assert!((p0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let (chi, beta) = m.memory_step(&Tensor::vector(h), &e, &cov).unwrap();
    assert_close(&beta, &p1, 1e-12);
    assert_close(chi.data(), &r1, 1e-12);
}

#[test]
fn memory_empty_gives_zero_readout() {
    let m = model();
    let h = Tensor::vector(rand_vec(m.dims.hidden, 10));
    let (chi, beta) = m.memory_step(&h, &[], &[]).unwrap();
    assert!(beta.is_empty());
    assert!(chi.data().iter().all(|&x| x == 0.0));
}

#[test]
fn memory_coverage_shifts_preactivation_by_w_cov() {
    let m = model();
    let d = m.dims.hidden;
    let q = Tensor::vector(rand_vec(d, 11));
    let e = Tensor::vector(rand_vec(d, 12));
    let a = m.memory_preactivation(0, &q, &e, 0.0).unwrap();
    let b = m.memory_preactivation(0, &q, &e, 0.7).unwrap();
    let wc = param(&m, "mem.w_cov").data();
    let diff: Vec<f64> = b.data().iter().zip(a.data()).map(|(x, y)| x - y).collect();
    let want: Vec<f64> = wc.iter().map(|w| 0.7 * w).collect();
    assert_close(&diff, &want, 1e-12);
    assert!(m.memory_preactivation(9, &q, &e, 0.0).is_err());
}

// ---- reference attention ----

#[test]
fn reference_single_state() {
    let m = model();
    let s = vecs(1, m.dims.hidden, 13);
    let h = Tensor::vector(rand_vec(m.dims.hidden, 14));
    let (phi, a) = m.reference_attention(&h, &s, &[2.0]).unwrap();
    assert_eq!(a, vec![1.0]);
    assert_close(phi.data(), s[0].data(), 1e-12);
}

#[test]
fn reference_identical_states_uniform() {
    let m = model();
    let s = vec![Tensor::vector(rand_vec(m.dims.hidden, 15)); 5];
    let h = Tensor::vector(rand_vec(m.dims.hidden, 16));
    let (_, a) = m.reference_attention(&h, &s, &[0.0; 5]).unwrap();
    assert_close(&a, &[0.2; 5], 1e-12);
}

#[test]
fn reference_four_states_match_oracle() {
    let m = model();
    let s = vecs(4, m.dims.hidden, 17);
    let h = rand_vec(m.dims.hidden, 18);
    let cov = [0.0, 0.5, 1.0, 0.25];
    let states: Vec<Vec<f64>> = s.iter().map(|t| t.data().to_vec()).collect();
    let (phi_o, a_o) = ref_oracle(&m, &h, &states, &cov);
    let (phi, a) = m.reference_attention(&Tensor::vector(h), &s, &cov).unwrap();
    assert_close(&a, &a_o, 1e-12);
    assert_close(phi.data(), &phi_o, 1e-12);
}

// ---- mixture ----

fn zero_gates(m: &mut WriterModel) {
    for n in ["gate.w_p", "gate.w_z", "gate.b_p", "gate.w_phi", "gate.w_chi", "gate.b_copy"] {
        let len = param(m, n).len();
        set_param(&mut m.params, n, &vec![0.0; len]);
    }
}

#[test]
fn mixture_sigmoid_zero_gates_split_half_quarter_quarter() {
    let mut m = model();
    zero_gates(&mut m);
    let src = Source::new(&m, &toks("snail regulates maspin"), &strings(&["prostate cancer"]), 120).unwrap();
    let d = m.dims.hidden;
    let z = Tensor::vector(rand_vec(d, 19));
    let dist = m
        .mixture(&src, &z, &z, &z, &[1.0 / 3.0; 3], &[1.0], BOS, &GateOverride::default())
        .unwrap();
    assert_eq!(dist.g_gen, 0.5);
    assert_eq!(dist.g_title, 0.5);
    let gen: f64 = dist.p_gen.iter().sum::<f64>() * dist.g_gen;
    let title: f64 = dist.p_title.iter().sum::<f64>() * 0.25;
    let ent: f64 = dist.p_entity.iter().sum::<f64>() * 0.25;
    assert!((gen - 0.5).abs() < 1e-12 && (title - 0.25).abs() < 1e-12 && (ent - 0.25).abs() < 1e-12);
    let total: f64 = dist.combined.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // "prostate" and "cancer" split the single entity's weight evenly
    let p = m.vocab.id("prostate");
    assert!((dist.p_entity[p] - 0.5).abs() < 1e-12);
}

#[test]
fn mixture_copy_accumulates_repeated_source_words() {
    let m = model();
    let src = Source::new(&m, &toks("the cat the"), &[], 120).unwrap();
    let gates = GateOverride {
        generate: Some(0.0),
        copy_title: None,
    };
    let z = Tensor::zeros(&[m.dims.hidden]);
    let dist = m.mixture(&src, &z, &z, &z, &[0.4, 0.3, 0.3], &[], BOS, &gates).unwrap();
    assert_eq!(dist.g_title, 1.0);
    assert!((dist.combined[m.vocab.id("the")] - 0.7).abs() < 1e-12);
    assert!((dist.combined[m.vocab.id("cat")] - 0.3).abs() < 1e-12);
}

#[test]
fn mixture_copies_out_of_vocabulary_words() {
    let m = model();
    let src = Source::new(&m, &toks("xylo yam"), &[], 120).unwrap();
    assert_eq!(src.ext_len(), m.vocab.len() + 2);
    let gates = GateOverride {
        generate: Some(0.0),
        copy_title: Some(1.0),
    };
    let z = Tensor::zeros(&[m.dims.hidden]);
    let dist = m.mixture(&src, &z, &z, &z, &[0.5, 0.5], &[], BOS, &gates).unwrap();
    let v = m.vocab.len();
    assert_eq!(&dist.combined[v..], &[0.5, 0.5]);
    assert_eq!(src.word(&m, v), "xylo");
}

#[test]
fn mixture_rejects_bad_lengths() {
    let m = model();
    let src = Source::new(&m, &toks("the cat"), &[], 120).unwrap();
    let z = Tensor::zeros(&[m.dims.hidden]);
    assert!(m.mixture(&src, &z, &z, &z, &[1.0], &[], BOS, &GateOverride::default()).is_err());
}

// ---- sequence loss ----

#[test]
fn sequence_loss_single_step_is_neg_log_eos() {
    let m = model();
    let src = Source::new(&m, &toks("snail maspin"), &strings(&["snail"]), 120).unwrap();
    let loss = m.sequence_loss(&src, &[], 120, 1.0).unwrap();
    let enc = m.prepare(&src);
    let st = m.initial_state(&enc);
    let out = m.decode_step(&src, &enc, &st, &GateOverride::default());
    let p = out.distribution.combined[EOS];
    assert_eq!(loss.tokens(), 1);
    assert!((loss.gold_probs[0] - p).abs() < 1e-12);
    // no coverage at step 0
    assert!((loss.loss + p.ln()).abs() < 1e-12);
}

#[test]
fn sequence_loss_matches_stepwise_decoding() {
    let m = model();
    let src = Source::new(&m, &toks("snail regulates maspin"), &strings(&["snail", "prostate cancer"]), 120).unwrap();
    let target = toks("maspin cancer");
    let lambda = 0.7;
    let loss = m.sequence_loss(&src, &target, 120, lambda).unwrap();
    let enc = m.prepare(&src);
    let mut st = m.initial_state(&enc);
    let mut nll = 0.0;
    let mut cov = 0.0;
    for gold in [m.vocab.id("maspin"), m.vocab.id("cancer"), EOS] {
        let out = m.decode_step(&src, &enc, &st, &GateOverride::default());
        nll -= out.distribution.combined[gold].ln();
        cov += out.alpha.iter().zip(&st.ref_coverage).map(|(a, c)| a.min(*c)).sum::<f64>();
        cov += out.beta.iter().zip(&st.ent_coverage).map(|(a, c)| a.min(*c)).sum::<f64>();
        st = m.advance(&st, &out, gold);
    }
    assert!(cov > 0.0);
    assert!((loss.loss - (nll + lambda * cov)).abs() < 1e-10, "{} vs {}", loss.loss, nll + lambda * cov);
    assert!((loss.nll() - nll).abs() < 1e-10);
}

#[test]
fn gradients_match_finite_differences_small() {
    let mut m = writer_with_words(&["a", "b", "c"], &["a", "b c"], tiny_dims(), 3);
    scale_params(&mut m.params, 6.0);
    let src = Source::new(&m, &toks("a b q"), &strings(&["a", "b c"]), 120).unwrap();
    let target = toks("c q a");
    let (_, grads) = m.loss_and_gradients(&src, &target, 120, 1.0).unwrap();
    let r = finite_difference_check(
        &mut m,
        |m| &mut m.params,
        |m| m.sequence_loss(&src, &target, 120, 1.0).unwrap().loss,
        &grads,
        1e-5,
        1e-5,
    );
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

// ---- training ----

fn tiny_corpus() -> Vec<CorpusPair> {
    vec![
        CorpusPair::new("snail regulates maspin", "maspin suppresses prostate cancer", &["maspin"]),
        CorpusPair::new("zinc binds cd14", "cd14 molecule binds zinc", &["cd14 molecule"]),
    ]
}

fn tiny_opts(epochs: usize) -> WriterTrainOptions {
    WriterTrainOptions {
        dims: tiny_dims(),
        epochs,
        learning_rate: 0.05,
        min_freq: 1,
        ..WriterTrainOptions::default()
    }
}

#[test]
fn zero_epochs_leaves_initial_parameters() {
    let corpus = tiny_corpus();
    let opts = tiny_opts(0);
    let (trained, report) = train_writer(&corpus, &opts).unwrap();
    let mut rng = kgwriter::numerics::seeded_rng(opts.seed);
    let fresh = WriterModel::for_corpus(opts.dims.clone(), &corpus, 1, opts.stopwords.clone(), opts.max_len, &mut rng).unwrap();
    assert_eq!(report.epochs_run, 0);
    for ((_, _, a), (_, _, b)) in trained.params.iter().zip(fresh.params.iter()) {
        assert_eq!(a, b);
    }
}

#[test]
fn single_pair_is_memorized() {
    let corpus = vec![tiny_corpus().remove(0)];
    let (m, report) = train_writer(&corpus, &tiny_opts(150)).unwrap();
    let nll_per_token = report.epoch_losses.last().copied().unwrap();
    let src = Source::new(&m, &corpus[0].src, &corpus[0].entities, 120).unwrap();
    let l = m.sequence_loss(&src, &corpus[0].tgt, 120, 0.0).unwrap();
    let per_token = l.nll() / l.tokens() as f64;
    assert!(per_token < 0.1, "nll/token {per_token}, last epoch {nll_per_token}");
}

#[test]
fn training_is_deterministic() {
    let corpus = tiny_corpus();
    let (a, ra) = train_writer(&corpus, &tiny_opts(5)).unwrap();
    let (b, rb) = train_writer(&corpus, &tiny_opts(5)).unwrap();
    assert_eq!(ra.epoch_losses, rb.epoch_losses);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.save(&mut x).unwrap();
    b.save(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn save_load_round_trip() {
    let m = model();
    let mut buf = Vec::new();
    m.save(&mut buf).unwrap();
    let n = WriterModel::load(&mut buf.as_slice()).unwrap();
    assert_eq!(n.vocab.tokens(), m.vocab.tokens());
    for ((_, na, a), (_, nb, b)) in n.params.iter().zip(m.params.iter()) {
        assert_eq!(na, nb);
        assert_eq!(a, b);
    }
}

// ---- beam search ----

/// Plants a generator that strongly prefers `word` regardless of context.
fn fixate(m: &mut WriterModel, word: &str) {
    zero_gates(m);
    set_param(&mut m.params, "gate.b_p", &[30.0]);
    let v = m.vocab.len();
    let mut b = vec![0.0; v];
    b[m.vocab.id(word)] = 20.0;
    let w = param(m, "gen.w").len();
    set_param(&mut m.params, "gen.w", &vec![0.0; w]);
    set_param(&mut m.params, "gen.b", &b);
}

#[test]
fn masking_blocks_repeated_content_words() {
    let mut m = model();
    fixate(&mut m, "cat");
    let src = Source::new(&m, &toks("the cat sat"), &[], 120).unwrap();
    let opts = BeamOptions {
        beam: 2,
        max_len: 6,
        ..BeamOptions::default()
    };
    let d = beam_search(&m, &src, &opts).unwrap();
    let cats = d.tokens.iter().filter(|t| t.token == "cat").count();
    assert_eq!(cats, 1, "{:?}", d.words());
    let unmasked = beam_search(&m, &src, &BeamOptions { masking: false, ..opts }).unwrap();
    assert!(unmasked.tokens.iter().filter(|t| t.token == "cat").count() > 1);
}

#[test]
fn stop_words_may_repeat() {
    let mut m = model();
    fixate(&mut m, "the");
    let src = Source::new(&m, &toks("the cat"), &[], 120).unwrap();
    let d = beam_search(&m, &src, &BeamOptions { beam: 1, max_len: 4, ..BeamOptions::default() }).unwrap();
    assert_eq!(d.words(), vec!["the"; 4]);
}

fn greedy(m: &WriterModel, src: &Source, max_len: usize) -> Vec<usize> {
    let enc = m.prepare(src);
    let mut st = m.initial_state(&enc);
    let mut out = Vec::new();
    for _ in 0..max_len {
        let step = m.decode_step(src, &enc, &st, &GateOverride::default());
        let best = kgwriter::writer::candidates(m, src, &st.prefix, &step.distribution.combined, true)
            .first()
            .map(|c| c.0);
        let Some(tok) = best else { break };
        if tok == EOS {
            break;
        }
        out.push(tok);
        st = m.advance(&st, &step, tok);
    }
    out
}

#[test]
fn beam_one_equals_greedy() {
    for seed in 0..5 {
        let m = writer_with_words(&["a", "b", "c", "d", "the"], &["a", "b c"], tiny_dims(), seed);
        let src = Source::new(&m, &toks("a b c q"), &strings(&["a", "b c"]), 120).unwrap();
        let d = beam_search(&m, &src, &BeamOptions { beam: 1, max_len: 8, ..BeamOptions::default() }).unwrap();
        assert_eq!(d.ids, greedy(&m, &src, 8), "seed {seed}");
    }
}

#[test]
fn decoded_never_contains_pad_or_bos() {
    let m = model();
    let src = Source::new(&m, &toks("snail regulates maspin"), &strings(&["prostate cancer"]), 120).unwrap();
    let d = beam_search(&m, &src, &BeamOptions { max_len: 10, ..BeamOptions::default() }).unwrap();
    assert!(!d.ids.contains(&PAD) && !d.ids.contains(&BOS) && !d.ids.contains(&EOS));
}

// ---- properties ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_is_a_distribution(seed in 0u64..1000, n_src in 1usize..6, n_ent in 0usize..4) {
        let m = writer_with_words(&["a", "b", "c"], &["a", "b c", "zz"], tiny_dims(), seed % 7);
        let words = ["a", "b", "c", "q", "r", "a"];
        let src_toks = strings(&words[..n_src]);
        let ents = strings(&["a", "b c", "zz"][..n_ent.min(3)]);
        let src = Source::new(&m, &src_toks, &ents, 120).unwrap();
        let d = m.dims.hidden;
        let alpha = softmax(&rand_vec(n_src, seed));
        let beta = softmax(&rand_vec(src.entities.len().max(1), seed + 1));
        let beta = if src.entities.is_empty() { vec![] } else { beta };
        let t = |s| Tensor::vector(rand_vec(d, s));
        let dist = m.mixture(&src, &t(seed + 2), &t(seed + 3), &t(seed + 4), &alpha, &beta, 4, &GateOverride::default()).unwrap();
        prop_assert!((dist.combined.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(dist.combined.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn coverage_is_monotone(seed in 0u64..1000, steps in 1usize..6) {
        let m = writer_with_words(&["a", "b", "c"], &["a"], tiny_dims(), seed % 5);
        let src = Source::new(&m, &toks("a b c"), &strings(&["a", "c"]), 120).unwrap();
        let enc = m.prepare(&src);
        let mut st = m.initial_state(&enc);
        prop_assert!(st.ref_coverage.iter().all(|&c| c == 0.0));
        for i in 1..=steps {
            let out = m.decode_step(&src, &enc, &st, &GateOverride::default());
            let next = m.advance(&st, &out, 4 + (seed as usize + i) % 3);
            for (a, b) in st.ref_coverage.iter().zip(&next.ref_coverage) {
                prop_assert!(b >= a);
            }
            for (a, b) in st.ent_coverage.iter().zip(&next.ent_coverage) {
                prop_assert!(b >= a);
            }
            prop_assert!((next.ref_coverage.iter().sum::<f64>() - i as f64).abs() < 1e-9);
            st = next;
        }
    }

    #[test]
    fn entity_order_does_not_change_loss(seed in 0u64..200) {
        let m = writer_with_words(&["a", "b", "c"], &["a", "b", "c"], tiny_dims(), seed);
        let fwd = Source::new(&m, &toks("a b"), &strings(&["a", "b", "c"]), 120).unwrap();
        let rev = Source::new(&m, &toks("a b"), &strings(&["c", "b", "a"]), 120).unwrap();
        let t = toks("c a");
        let x = m.sequence_loss(&fwd, &t, 120, 1.0).unwrap().loss;
        let y = m.sequence_loss(&rev, &t, 120, 1.0).unwrap().loss;
        prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
    }

    #[test]
    fn copy_mode_stays_in_source(seed in 0u64..200) {
        let m = writer_with_words(&["a", "b", "c", "d", "the"], &[], tiny_dims(), seed);
        let src = Source::new(&m, &toks("b q d"), &[], 120).unwrap();
        let opts = BeamOptions {
            beam: 3,
            max_len: 8,
            gates: GateOverride { generate: Some(0.0), copy_title: Some(1.0) },
            ..BeamOptions::default()
        };
        let d = beam_search(&m, &src, &opts).unwrap();
        for w in d.words() {
            prop_assert!(src.tokens.contains(&w.to_string()), "{}", w);
        }
    }
}
