use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pigrammar::corpus::Corpus;
use pigrammar::decoder::{
    load_matrix, matrix_to_bytes, matrix_to_csv, refine_batch, GepConfig, ParseResult, ProbMatrix,
};
use pigrammar::grammar::{log_likelihood, to_dot, Pcfg};
use pigrammar::induction::{estimate_probs, induce_with_stats, sentences_for, AdiosParams};
use pigrammar::metrics::{confusion, evaluate, labels_to_text, load_labels};
use pigrammar::synth::{
    calibrate_epsilon, class_names, make_episode, reference_grammar, run_benchmark, DurationModel,
    NoiseModel,
};
use pigrammar::Error;

/// Exit status when no grammatical sentence fits a matrix and fallback is off.
const EXIT_NO_PARSE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pigrammar",
    version,
    about = "Grammar induction and grammar-constrained decoding of activity labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a grammar from a corpus file (one sentence per line).
    Induce(InduceArgs),
    /// Parse probability matrices against a grammar.
    Parse(ParseArgs),
    /// Score predicted frame labels against ground truth.
    Eval(EvalArgs),
    /// Write synthetic episodes: matrices, ground-truth labels and a corpus.
    Synth(SynthArgs),
    /// Compare argmax and grammar-refined accuracy on synthetic episodes.
    Bench(BenchArgs),
    /// Export a grammar as Graphviz DOT.
    Dot(DotArgs),
}

#[derive(Args)]
struct InduceArgs {
    corpus: PathBuf,
    /// Output grammar file.
    #[arg(short, long)]
    out: PathBuf,
    /// File of `key = value` induction parameters, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    bootstrap: Option<f64>,
    /// 0 memorizes the corpus as a root Or-node over its sentences.
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Exponent on the grammar probability; 0 ignores the grammar prior.
    #[arg(long, default_value_t = 1.0)]
    prior_weight: f64,
    /// Fail with exit status 2 instead of falling back to argmax labels.
    #[arg(long)]
    no_fallback: bool,
    #[arg(long, default_value_t = GepConfig::default().max_queue)]
    max_queue: usize,
    /// Worker threads; 0 uses one per logical CPU.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl DecodeArgs {
    fn config(&self) -> GepConfig {
        GepConfig {
            use_grammar_prior: self.prior_weight > 0.0,
            prior_weight: self.prior_weight,
            max_queue: self.max_queue,
            fallback_on_failure: !self.no_fallback,
        }
    }
}

#[derive(Args)]
struct ParseArgs {
    /// Matrix file (`.csv`, otherwise binary), or with --batch a directory
    /// whose `.pmat` and `.csv` files are parsed.
    matrix: PathBuf,
    #[arg(short, long)]
    grammar: PathBuf,
    /// Output JSON file, or output directory with --batch. Defaults to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Comma-separated class names of the matrix columns (default PI0,PI1,...).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Parse every file in the matrix directory.
    #[arg(long)]
    batch: bool,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels, whitespace-separated integers.
    pred: PathBuf,
    /// Ground-truth labels in the same format.
    gt: PathBuf,
    /// Number of classes (default: largest label + 1).
    #[arg(long)]
    classes: Option<usize>,
    /// Comma-separated class names for the table.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EpisodeArgs {
    /// Grammar to sample from (default: the built-in reference grammar).
    #[arg(short, long)]
    grammar: Option<PathBuf>,
    /// Number of episodes.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    /// Mean segment length of the longest class; others scale by frame share.
    #[arg(long, default_value_t = 40.0)]
    max_mean: f64,
    /// Comma-separated mean segment lengths per class, overriding --max-mean.
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EpisodeArgs {
    fn grammar(&self) -> Result<Pcfg> {
        match &self.grammar {
            Some(p) => Ok(Pcfg::load(p)?),
            None => Ok(reference_grammar()),
        }
    }

    fn durations(&self, g: &Pcfg) -> Result<DurationModel> {
        let k = class_names(g).len();
        match &self.durations {
            Some(d) => Ok(DurationModel::new(d.clone())?),
            None if k == 6 => Ok(DurationModel::from_shares(self.max_mean)?),
            None => Ok(DurationModel::new(vec![self.max_mean; k])?),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    episodes: EpisodeArgs,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Write matrices as CSV instead of binary.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    episodes: EpisodeArgs,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',', conflicts_with = "target_baseline")]
    noise: Option<Vec<f64>>,
    /// Calibrate a single noise level to this mean argmax accuracy.
    #[arg(long)]
    target_baseline: Option<f64>,
    #[command(flatten)]
    decode: DecodeArgs,
    /// Write the JSON report here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DotArgs {
    grammar: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Writes through a temporary sibling and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{}: not a file path", path.display()))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes).with_context(|| format!("{}: write failed", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("{}: rename failed", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_induce(a: &InduceArgs) -> Result<()> {
    let mut params = AdiosParams::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("{}: cannot read config", path.display()))?;
        params.apply_config(&text)?;
    }
    if let Some(v) = a.eta {
        params.eta = v;
    }
    if let Some(v) = a.alpha {
        params.alpha = v;
    }
    if let Some(v) = a.window {
        params.context_window = v;
    }
    if let Some(v) = a.bootstrap {
        params.bootstrap_threshold = v;
    }
    if let Some(v) = a.max_iterations {
        params.max_iterations = v;
    }
    params.validate()?;
    let corpus = Corpus::load(&a.corpus, None)?;
    let (g, stats) = induce_with_stats(&corpus, &params)?;
    let sentences = sentences_for(&g, &corpus)?;
    let g = estimate_probs(&g, &sentences)?;
    let ll = log_likelihood(&g, &sentences)?;
    write_atomic(&a.out, g.to_text().as_bytes())?;
    if a.json {
        let report = json!({
            "grammar": a.out,
            "sentences": corpus.len(),
            "log_likelihood": ll.total,
            "iterations": stats.iterations,
            "patterns": stats.patterns,
            "classes": stats.classes,
            "root_branches": stats.root_branches,
        });
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "induced {} rules from {} sentences ({} patterns, {} classes, {} root branches)",
            g.rules().len(),
            corpus.len(),
            stats.patterns,
            stats.classes,
            stats.root_branches
        );
        println!("log-likelihood: {}", ll.total);
    }
    Ok(())
}

fn result_json(r: &ParseResult, m: &ProbMatrix) -> serde_json::Value {
    let names: Vec<&str> = r
        .sentence
        .iter()
        .map(|&k| m.class_names()[k].as_str())
        .collect();
    json!({
        "sentence": names,
        "frame_labels": r.frame_labels,
        "data_prob": r.data_prob,
        "data_log_prob": r.data_log_prob,
        "grammar_prob": r.grammar_prob,
        "combined_score": r.combined_score,
        "fallback_used": r.fallback_used,
        "pruned": r.pruned,
    })
}

fn load_named(path: &Path, classes: &Option<Vec<String>>) -> Result<ProbMatrix> {
    let mut m = load_matrix(path)?;
    if let Some(names) = classes {
        m.set_class_names(names.clone())?;
    }
    Ok(m)
}

fn is_no_parse(e: &Error) -> bool {
    matches!(e, Error::NoGrammaticalParse)
}

fn cmd_parse(a: &ParseArgs) -> Result<ExitCode> {
    let g = Pcfg::load(&a.grammar)?;
    let cfg = a.decode.config();
    cfg.validate()?;
    if !a.batch {
        let m = load_named(&a.matrix, &a.classes)?;
        let mut results = refine_batch(std::slice::from_ref(&m), &g, &cfg, 1)?;
        return match results.remove(0) {
            Ok(r) => {
                let text = serde_json::to_string_pretty(&result_json(&r, &m))? + "\n";
                emit(a.out.as_deref(), &text)?;
                Ok(ExitCode::SUCCESS)
            }
            Err(e) if is_no_parse(&e) => {
                eprintln!("error: {}: {e}", a.matrix.display());
                Ok(ExitCode::from(EXIT_NO_PARSE))
            }
            Err(e) => Err(e.into()),
        };
    }

    let out_dir = a.out.as_ref().context("--batch needs --out <directory>")?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("{}: cannot create directory", out_dir.display()))?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(&a.matrix)
        .with_context(|| format!("{}: cannot read directory", a.matrix.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("{}: cannot list directory", a.matrix.display()))?;
    inputs.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "pmat" || e == "csv"));
    inputs.sort();
    let matrices = inputs
        .iter()
        .map(|p| load_named(p, &a.classes).with_context(|| format!("{}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let results = refine_batch(&matrices, &g, &cfg, a.decode.jobs)?;
    let mut status = ExitCode::SUCCESS;
    for ((path, m), r) in inputs.iter().zip(&matrices).zip(results) {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        match r {
            Ok(r) => {
                let text = serde_json::to_string_pretty(&result_json(&r, m))? + "\n";
                write_atomic(&out_dir.join(format!("{stem}.json")), text.as_bytes())?;
            }
            Err(e) if is_no_parse(&e) => {
                eprintln!("error: {}: {e}", path.display());
                status = ExitCode::from(EXIT_NO_PARSE);
            }
            Err(e) => bail!("{}: {e}", path.display()),
        }
    }
    println!(
        "parsed {} matrices into {}",
        inputs.len(),
        out_dir.display()
    );
    Ok(status)
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let pred = load_labels(&a.pred)?;
    let gt = load_labels(&a.gt)?;
    if pred.len() != gt.len() {
        bail!(
            "length mismatch: {} has {} labels, {} has {}",
            a.pred.display(),
            pred.len(),
            a.gt.display(),
            gt.len()
        );
    }
    let k = match a.classes {
        Some(k) => k,
        None => pred.iter().chain(&gt).max().map_or(1, |m| m + 1),
    };
    let report = evaluate(&confusion(&pred, &gt, k)?)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table(a.names.as_deref()));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let g = a.episodes.grammar()?;
    let dur = a.episodes.durations(&g)?;
    let noise = NoiseModel {
        epsilon: a.epsilon,
        concentration: a.episodes.concentration,
        seed: a.episodes.seed,
    };
    fs::create_dir_all(&a.out)
        .with_context(|| format!("{}: cannot create directory", a.out.display()))?;
    let mut corpus = String::new();
    for i in 0..a.episodes.n {
        let ep = make_episode(&g, &dur, &noise, a.episodes.seed.wrapping_add(i as u64))?;
        let (ext, bytes) = if a.csv {
            ("csv", matrix_to_csv(&ep.matrix).into_bytes())
        } else {
            ("pmat", matrix_to_bytes(&ep.matrix))
        };
        write_atomic(&a.out.join(format!("episode_{i:04}.{ext}")), &bytes)?;
        write_atomic(
            &a.out.join(format!("episode_{i:04}.gt")),
            labels_to_text(&ep.gt_frames).as_bytes(),
        )?;
        corpus.push_str(&ep.source_sentence.display_with(g.terminals()).to_string());
        corpus.push('\n');
    }
    write_atomic(&a.out.join("corpus.txt"), corpus.as_bytes())?;
    println!("wrote {} episodes to {}", a.episodes.n, a.out.display());
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let g = a.episodes.grammar()?;
    let dur = a.episodes.durations(&g)?;
    let base = NoiseModel {
        epsilon: 0.0,
        concentration: a.episodes.concentration,
        seed: a.episodes.seed,
    };
    let levels = match (&a.noise, a.target_baseline) {
        (_, Some(target)) => vec![calibrate_epsilon(
            &g,
            a.episodes.n,
            &dur,
            &base,
            target,
            a.decode.jobs,
        )?],
        (Some(levels), None) => levels.clone(),
        (None, None) => vec![0.0, 0.5, 0.8, 0.9],
    };
    let grid: Vec<NoiseModel> = levels
        .into_iter()
        .map(|epsilon| NoiseModel {
            epsilon,
            ..base.clone()
        })
        .collect();
    let report = run_benchmark(
        &g,
        a.episodes.n,
        &dur,
        &grid,
        &a.decode.config(),
        a.decode.jobs,
    )?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    if a.json {
        print!("{text}");
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn cmd_dot(a: &DotArgs) -> Result<()> {
    let g = Pcfg::load(&a.grammar)?;
    emit(a.out.as_deref(), &to_dot(&g))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Induce(a) => cmd_induce(&a).map(|_| ExitCode::SUCCESS),
        Command::Parse(a) => cmd_parse(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ExitCode::SUCCESS),
        Command::Synth(a) => cmd_synth(&a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => cmd_bench(&a).map(|_| ExitCode::SUCCESS),
        Command::Dot(a) => cmd_dot(&a).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let no_parse = e.downcast_ref::<Error>().is_some_and(is_no_parse);
            ExitCode::from(if no_parse { EXIT_NO_PARSE } else { 1 })
        }
    }
}
