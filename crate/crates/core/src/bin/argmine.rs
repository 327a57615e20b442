use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use argmine::cluster::AssignmentFile;
use argmine::corpus::{load_corpus, save_corpus, split_sentences, Corpus, Document, Sentence};
use argmine::metrics::{evaluate_clustering, krippendorff_alpha_nominal, tagging_eval, EvalReport, NoiseMode};
use argmine::pipeline::{run_pipeline, PipelineConfig, Stage};
use argmine::rng::derive_seed;
use argmine::vectorize::{hash_embed, save_embeddings};
use argmine::{Error, Result};

#[derive(Parser)]
#[command(name = "argmine", version, about = "Topic clustering, argument segmentation and aspect clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster documents into topics.
    Topics(RunArgs),
    /// Train and score the BIO sentence tagger, then segment the corpus.
    Segment(RunArgs),
    /// Run the aspect clustering grid.
    Argclust(RunArgs),
    /// Run the configured stages in order.
    Pipeline(RunArgs),
    /// Score predictions against gold annotations.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Write seeded feature-hashing sentence embeddings for a corpus.
    EmbedHash {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Split raw-text JSONL (`doc_id`, `title`, `topic`, `text`) into a corpus.
    Sentencize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliNoiseMode {
    WithNoise,
    ExcludeNoise,
    NoiseSingletons,
}

impl From<CliNoiseMode> for NoiseMode {
    fn from(m: CliNoiseMode) -> Self {
        match m {
            CliNoiseMode::WithNoise => NoiseMode::WithNoiseSingleCluster,
            CliNoiseMode::ExcludeNoise => NoiseMode::ExcludeNoise,
            CliNoiseMode::NoiseSingletons => NoiseMode::NoiseSingletons,
        }
    }
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Clustering scores of an assignment file against corpus topics.
    Assignment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value = "with-noise")]
        noise_mode: CliNoiseMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tagging scores of a predicted BIO corpus against a gold one.
    Tags {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Krippendorff's alpha over a ratings CSV: header row, one unit per row,
    /// first column the unit id, one column per annotator, empty = missing.
    Alpha {
        #[arg(long)]
        ratings: PathBuf,
    },
}

fn run_stages(args: RunArgs, stages: Option<&[Stage]>) -> Result<()> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    let stages = stages.map(<[Stage]>::to_vec).unwrap_or_else(|| cfg.stages.clone());
    run_pipeline(&cfg, &stages)?;
    log::info!("outputs written to {}", cfg.output_dir.display());
    Ok(())
}

fn emit(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    let text = report.to_json();
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn eval_assignment(corpus: &Path, pred: &Path, mode: NoiseMode, out: Option<&Path>) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let ids: Vec<String> = corpus.documents.iter().map(|d| d.doc_id.clone()).collect();
    let assignment = AssignmentFile::load(pred)?.assignment_for(&ids)?;
    let truth: Vec<&str> = corpus.documents.iter().map(|d| d.topic.as_str()).collect();
    let mut report = EvalReport::default();
    report.add_clustering("", &evaluate_clustering(&truth, &assignment, mode)?);
    emit(&report, out)
}

fn eval_tags(gold: &Path, pred: &Path, out: Option<&Path>) -> Result<()> {
    let gold = load_corpus(gold)?;
    let pred = load_corpus(pred)?;
    let mut truth = Vec::new();
    let mut guess = Vec::new();
    for g in &gold.documents {
        let p = pred
            .documents
            .iter()
            .find(|p| p.doc_id == g.doc_id)
            .ok_or_else(|| Error::InvalidInput(format!("prediction lacks document `{}`", g.doc_id)))?;
        let tags = |d: &Document| d.tags().ok_or_else(|| Error::InvalidInput(format!("document `{}` has no BIO tags", d.doc_id)));
        truth.push(tags(g)?);
        guess.push(tags(p)?);
    }
    emit(&EvalReport::from_tagging(&tagging_eval(&truth, &guess)?), out)
}

fn eval_alpha(path: &Path) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut ratings = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let unit: Vec<Option<String>> = line
            .split(',')
            .skip(1)
            .map(|c| c.trim())
            .map(|c| (!c.is_empty()).then(|| c.to_string()))
            .collect();
        ratings.push(unit);
    }
    println!("{{\"krippendorff_alpha\": {}}}", krippendorff_alpha_nominal(&ratings)?);
    Ok(())
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    #[serde(default)]
    title: String,
    topic: String,
    text: String,
}

fn sentencize(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(|e| Error::Io {
        path: input.to_path_buf(),
        source: e,
    })?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: input.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(Document {
            doc_id: raw.doc_id,
            title: raw.title,
            topic: raw.topic,
            sentences: split_sentences(&raw.text).into_iter().map(Sentence::new).collect(),
        });
    }
    let name = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    save_corpus(&Corpus::new(name, docs)?, out)
}

fn embed(corpus: &Path, out: &Path, dim: usize, seed: u64) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    for d in &corpus.documents {
        for (i, s) in d.sentences.iter().enumerate() {
            ids.push(d.sentence_id(i));
            texts.push(s.text.as_str());
        }
    }
    save_embeddings(&hash_embed(ids, &texts, dim, derive_seed(seed, "embed/hash_test"))?, out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Topics(a) => run_stages(a, Some(&[Stage::Topics])),
        Command::Segment(a) => run_stages(a, Some(&[Stage::Segment])),
        Command::Argclust(a) => run_stages(a, Some(&[Stage::Argclust])),
        Command::Pipeline(a) => run_stages(a, None),
        Command::Eval { what } => match what {
            EvalCommand::Assignment {
                corpus,
                pred,
                noise_mode,
                out,
            } => eval_assignment(&corpus, &pred, noise_mode.into(), out.as_deref()),
            EvalCommand::Tags { gold, pred, out } => eval_tags(&gold, &pred, out.as_deref()),
            EvalCommand::Alpha { ratings } => eval_alpha(&ratings),
        },
        Command::EmbedHash { corpus, out, dim, seed } => embed(&corpus, &out, dim, seed),
        Command::Sentencize { input, out } => sentencize(&input, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
