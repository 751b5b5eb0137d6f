//! Command-line front end. Every command reads and writes fixed artifact
//! names inside a work directory and records a run manifest.
//!
//! | command        | reads                                   | writes                     |
//! |----------------|-----------------------------------------|----------------------------|
//! | `ingest`       | `--triples`, `--sentences`              | `graph.tsv`, `context.jsonl` |
//! | `train-link`   | `graph.tsv`, `context.jsonl`            | `link.model`               |
//! | `enrich`       | `graph.tsv`, `context.jsonl`, `link.model` | `enriched.tsv`          |
//! | `train-writer` | `--corpus`                              | `writer.<task>.model`      |
//! | `generate`     | `--titles`, `enriched.tsv`, writer models | `generations.jsonl`      |
//! | `eval`         | `--input`, `--output`, optional models  | `eval.json`                |

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, Config, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::eval::{bleu_rouge, format_table, ngram_overlap, perplexity, repetition_rate_sentences, MetricReport};
use crate::kg::{ingest_sentences, ingest_triples, tokenize, write_graph, write_sentences, ContextIndex, KnowledgeGraph};
use crate::link::{propagate_links, LinkModel};
use crate::numerics::seeded_rng;
use crate::writer::{
    generate_chain, read_corpus, train_writer, BeamWriter, ChainOptions, ChainWriters, Task, WriterModel,
};

pub const GRAPH: &str = "graph.tsv";
pub const CONTEXT: &str = "context.jsonl";
pub const LINK_MODEL: &str = "link.model";
pub const ENRICHED: &str = "enriched.tsv";
pub const GENERATIONS: &str = "generations.jsonl";
pub const EVAL_REPORT: &str = "eval.json";
pub const MANIFEST_DIR: &str = "manifests";

pub fn writer_model_name(task: Task) -> String {
    format!("writer.{task}.model")
}

#[derive(Debug, Parser)]
#[command(name = "kgwriter", version, about = "Knowledge-graph enrichment and paper writing")]
pub struct Cli {
    /// Config file; falls back to $KGWRITER_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding all artifacts.
    #[arg(long, global = true, default_value = "work")]
    pub workdir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load triples and context sentences into the work directory.
    Ingest {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        sentences: Option<PathBuf>,
    },
    /// Train the link predictor on the ingested graph.
    TrainLink,
    /// Propagate links between similar entities.
    Enrich {
        /// Overrides the configured similarity threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train one writer task on a JSONL corpus.
    TrainWriter {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Run the writing chain for every title (one per line).
    Generate {
        #[arg(long)]
        titles: PathBuf,
        /// Skip the second abstract written from the new title.
        #[arg(long)]
        no_second_abstract: bool,
    },
    /// Compare line-paired human and system texts; optionally score a corpus.
    Eval {
        /// Human text, one document per line.
        #[arg(long)]
        input: PathBuf,
        /// System text, one document per line.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        /// Corpus to score with the trained writer of `--task`.
        #[arg(long, requires = "task")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        task: Option<Task>,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Ingest { .. } => "ingest".into(),
            Command::TrainLink => "train-link".into(),
            Command::Enrich { .. } => "enrich".into(),
            Command::TrainWriter { task, .. } => format!("train-writer.{task}"),
            Command::Generate { .. } => "generate".into(),
            Command::Eval { .. } => "eval".into(),
        }
    }
}

/// Provenance of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: Config,
    /// Input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    /// Output path → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn manifest_path(workdir: &Path, command: &str) -> PathBuf {
    workdir.join(MANIFEST_DIR).join(format!("{command}.json"))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

struct Run<'a> {
    workdir: &'a Path,
    config: &'a Config,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run<'_> {
    /// An upstream artifact that must already exist.
    fn require(&mut self, name: &str, hint: &str) -> Result<PathBuf> {
        let p = self.workdir.join(name);
        if !p.is_file() {
            return Err(Error::MissingArtifact {
                path: p,
                hint: hint.into(),
            });
        }
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn input(&mut self, p: &Path) -> Result<PathBuf> {
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
        self.inputs.push(p.to_path_buf());
        Ok(p.to_path_buf())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.workdir.join(name);
        write_atomic(&p, bytes)?;
        self.outputs.push(p.clone());
        Ok(p)
    }
}

fn open(p: &Path) -> Result<BufReader<File>> {
    File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e))
}

fn load_graph(p: &Path) -> Result<KnowledgeGraph> {
    ingest_triples(open(p)?)
}

fn load_context(p: &Path, g: &KnowledgeGraph) -> Result<ContextIndex> {
    ingest_sentences(open(p)?, g)
}

fn load_writer(p: &Path) -> Result<WriterModel> {
    WriterModel::load(&mut open(p)?)
}

fn graph_bytes(g: &KnowledgeGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    write_graph(g, &mut buf).expect("write to memory");
    buf
}

fn read_lines(p: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Resolves the config from `--config`, then the environment, then defaults.
pub fn resolve_config(flag: Option<&Path>) -> Result<Config> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    match flag.map(Path::to_path_buf).or(env) {
        Some(p) => Config::load(&p),
        None => Ok(Config::default()),
    }
}

/// Runs one command and writes its manifest. Returns the manifest.
pub fn execute(command: &Command, config: &Config, workdir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let mut run = Run {
        workdir,
        config,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    for (k, v) in overrides(config) {
        log::info!("config override: {k} = {v}");
    }
    match command {
        Command::Ingest { triples, sentences } => ingest(&mut run, triples, sentences.as_deref())?,
        Command::TrainLink => train_link(&mut run)?,
        Command::Enrich { threshold } => enrich(&mut run, *threshold)?,
        Command::TrainWriter { task, corpus } => train_writer_cmd(&mut run, *task, corpus)?,
        Command::Generate {
            titles,
            no_second_abstract,
        } => generate(&mut run, titles, !no_second_abstract)?,
        Command::Eval {
            input,
            output,
            max_n,
            corpus,
            task,
        } => eval_cmd(&mut run, input, output, *max_n, corpus.as_deref(), *task)?,
    }
    let digest = |ps: &[PathBuf]| -> Result<BTreeMap<String, String>> {
        ps.iter()
            .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
            .collect()
    };
    let manifest = RunManifest {
        command: command.name(),
        config_hash: config.hash(),
        config: config.clone(),
        inputs: digest(&run.inputs)?,
        seed: config.seed,
        outputs: digest(&run.outputs)?,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = manifest_path(workdir, &manifest.command);
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Config keys whose values differ from the defaults.
pub fn overrides(config: &Config) -> Vec<(String, String)> {
    let a = serde_json::to_value(config).expect("config serializes");
    let b = serde_json::to_value(Config::default()).expect("config serializes");
    let (Some(a), Some(b)) = (a.as_object(), b.as_object()) else {
        return Vec::new();
    };
    a.iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, v)| (k.clone(), v.to_string()))
        .collect()
}

fn ingest(run: &mut Run<'_>, triples: &Path, sentences: Option<&Path>) -> Result<()> {
    let tp = run.input(triples)?;
    let g = load_graph(&tp)?;
    let ctx = match sentences {
        Some(s) => {
            let sp = run.input(s)?;
            load_context(&sp, &g)?
        }
        None => ContextIndex::default(),
    };
    let mut ctx_bytes = Vec::new();
    write_sentences(&ctx, &g, &mut ctx_bytes)?;
    run.write(GRAPH, &graph_bytes(&g))?;
    run.write(CONTEXT, &ctx_bytes)?;
    println!(
        "ingested {} entities, {} relations, {} triples, {} sentences",
        g.num_entities(),
        g.num_relations(),
        g.triples().len(),
        ctx.num_sentences()
    );
    Ok(())
}

const INGEST_HINT: &str = "run `kgwriter ingest --triples FILE` first";

fn train_link(run: &mut Run<'_>) -> Result<()> {
    let gp = run.require(GRAPH, INGEST_HINT)?;
    let cp = run.require(CONTEXT, INGEST_HINT)?;
    let g = load_graph(&gp)?;
    let ctx = load_context(&cp, &g)?;
    let mut rng = seeded_rng(run.config.seed);
    let mut model = LinkModel::new(run.config.link_config(), &g, &ctx, &mut rng);
    let report = model.train_margin(&g, &ctx, &run.config.margin_options())?;
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    run.write(LINK_MODEL, &buf)?;
    println!(
        "trained link predictor: {} epochs, final loss {:.4}",
        report.epoch_losses.len(),
        report.epoch_losses.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn enrich(run: &mut Run<'_>, threshold: Option<f64>) -> Result<()> {
    let gp = run.require(GRAPH, INGEST_HINT)?;
    let cp = run.require(CONTEXT, INGEST_HINT)?;
    let mp = run.require(LINK_MODEL, "run `kgwriter train-link` first")?;
    let g = load_graph(&gp)?;
    let ctx = load_context(&cp, &g)?;
    let model = LinkModel::load(&mut open(&mp)?)?;
    let reps = model.represent_all(&g, &ctx)?;
    let theta = threshold.unwrap_or(run.config.similarity_threshold);
    let enriched = propagate_links(&g, &reps, theta)?;
    run.write(ENRICHED, &graph_bytes(&enriched))?;
    println!(
        "enriched graph: {} triples ({} predicted) at threshold {theta}",
        enriched.triples().len(),
        enriched.triples().len() - g.triples().len()
    );
    Ok(())
}

fn train_writer_cmd(run: &mut Run<'_>, task: Task, corpus: &Path) -> Result<()> {
    let cp = run.input(corpus)?;
    let pairs = read_corpus(open(&cp)?)?;
    let opts = run.config.writer_options()?;
    let (model, report) = train_writer(&pairs, &opts)?;
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    run.write(&writer_model_name(task), &buf)?;
    println!(
        "trained {task} writer: {} epochs, vocabulary {}, perplexity {:.4}",
        report.epochs_run,
        model.vocab.len(),
        report.final_perplexity
    );
    Ok(())
}

fn writer_hint(task: Task) -> String {
    format!("run `kgwriter train-writer --task {task} --corpus FILE` first")
}

fn generate(run: &mut Run<'_>, titles: &Path, second_abstract: bool) -> Result<()> {
    let tp = run.input(titles)?;
    let kp = run.require(ENRICHED, "run `kgwriter enrich` first")?;
    let mut models = Vec::new();
    for task in Task::ALL {
        let p = run.require(&writer_model_name(task), &writer_hint(task))?;
        models.push(load_writer(&p)?);
    }
    let kg = load_graph(&kp)?;
    let options = run.config.beam_options();
    let w: Vec<BeamWriter<'_>> = models.iter().map(|model| BeamWriter { model, options }).collect();
    let writers = ChainWriters {
        title_to_abstract: &w[0],
        abstract_to_conclusion: &w[1],
        conclusion_to_title: &w[2],
    };
    let chain = ChainOptions {
        second_abstract,
        ..ChainOptions::default()
    };
    let mut out = Vec::new();
    for title in read_lines(&tp)?.iter().filter(|l| !l.trim().is_empty()) {
        let record = generate_chain(title, &kg, &writers, &chain)?;
        if let Some(err) = &record.error {
            log::warn!("chain for `{title}` halted: {err}");
        }
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    let p = run.write(GENERATIONS, &out)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn eval_cmd(
    run: &mut Run<'_>,
    input: &Path,
    output: &Path,
    max_n: usize,
    corpus: Option<&Path>,
    task: Option<Task>,
) -> Result<()> {
    let ip = run.input(input)?;
    let op = run.input(output)?;
    let human: Vec<Vec<String>> = read_lines(&ip)?.iter().map(|l| tokenize(l)).collect();
    let system: Vec<Vec<String>> = read_lines(&op)?.iter().map(|l| tokenize(l)).collect();
    if human.len() != system.len() {
        return Err(Error::InvalidArgument(format!(
            "{} input lines but {} output lines",
            human.len(),
            system.len()
        )));
    }
    let names = [ip.display().to_string(), op.display().to_string()];
    let corpus_ids: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut reports = Vec::new();
    for n in 1..=max_n.max(1) {
        let scored: Vec<f64> = human
            .iter()
            .zip(&system)
            .map(|(h, s)| ngram_overlap(h, s, n))
            .filter(|o| !o.input_too_short)
            .map(|o| o.percent)
            .collect();
        let mean = if scored.is_empty() {
            0.0
        } else {
            scored.iter().sum::<f64>() / scored.len() as f64
        };
        reports.push(
            MetricReport::new("ngram_overlap", &corpus_ids)
                .value(&format!("{n}-gram %"), mean)
                .param("n", n)
                .param("counting", "distinct n-grams"),
        );
    }
    let mut bleu = vec![0.0; max_n.max(1)];
    let mut rouge = 0.0;
    for (h, s) in human.iter().zip(&system) {
        let r = bleu_rouge(s, h, max_n);
        for (a, b) in bleu.iter_mut().zip(&r.bleu) {
            *a += b;
        }
        rouge += r.rouge_l;
    }
    let docs = human.len().max(1) as f64;
    let mut report = MetricReport::new("bleu_rouge", &corpus_ids)
        .param("smoothing", "add-one for zero counts, n >= 2")
        .value("ROUGE-L", rouge / docs);
    for (i, b) in bleu.iter().enumerate() {
        report = report.value(&format!("BLEU-{}", i + 1), b / docs);
    }
    reports.push(report);

    let graph = run.workdir.join(GRAPH);
    if graph.is_file() {
        run.inputs.push(graph.clone());
        let g = load_graph(&graph)?;
        let stop = run.config.stopword_set()?;
        let names: Vec<String> = g
            .entities()
            .iter()
            .map(|e| e.surface_name.to_lowercase())
            .filter(|n| !stop.contains(n))
            .collect();
        let lexicon: Vec<&str> = names.iter().map(String::as_str).collect();
        let sentences = |docs: &[Vec<String>]| -> Vec<Vec<String>> {
            docs.iter()
                .flat_map(|d| crate::eval::split_sentences(&d.join(" ")))
                .map(|s| crate::eval::words(&s))
                .collect()
        };
        reports.push(
            MetricReport::new("repetition_rate", &corpus_ids)
                .value("human", repetition_rate_sentences(&sentences(&human), &lexicon))
                .value("system", repetition_rate_sentences(&sentences(&system), &lexicon))
                .param("lexicon", GRAPH),
        );
    }
    if let (Some(c), Some(task)) = (corpus, task) {
        let cp = run.input(c)?;
        let mp = run.require(&writer_model_name(task), &writer_hint(task))?;
        let model = load_writer(&mp)?;
        let pairs = read_corpus(open(&cp)?)?;
        reports.push(
            MetricReport::new("perplexity", &[cp.display().to_string().as_str()])
                .value("perplexity", perplexity(&model, &pairs)?)
                .param("task", task),
        );
    }
    print!("{}", format_table(&reports));
    run.write(EVAL_REPORT, serde_json::to_string_pretty(&reports)?.as_bytes())?;
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 usage, 2 data error, 3 missing artifact.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve_config(cli.config.as_deref())
        .and_then(|config| execute(&cli.command, &config, &cli.workdir));
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let _ = std::io::stderr().flush();
            e.exit_code()
        }
    }
}
