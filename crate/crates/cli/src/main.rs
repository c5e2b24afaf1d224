mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blocktext::corpus::{kfold_edges, load_edge_list, load_node_documents, word_holdout, EdgeList, NodeCorpus, SplitPlan};
use blocktext::eval::{recovery_rows, run_benchmark, BenchmarkConfig, BenchmarkData, Metric, ScoreReport};
use blocktext::export::{ExportFormat, IndustryGraph};
use blocktext::par;
use blocktext::sampler::{resume, run_with, GibbsState, Model, ModelConfig, RunOptions, Snapshot, TextCoupling};
use blocktext::synthgen::{generate, GroundTruth, SynthConfig};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use error::{CliError, CliResult};
use manifest::{create_dir, read_file, sha256_bytes, write_file, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "blocktext", version, about = "Sparse block models of link data with node text")]
struct Cli {
    /// Worker threads for independent jobs (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known block structure.
    Generate(GenerateArgs),
    /// Fit a model with collapsed Gibbs sampling.
    Fit(FitArgs),
    /// Score a fitted model.
    Eval(EvalArgs),
    /// Export the estimated industry graph.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Generator settings (JSON or key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Edge list: one `sender<TAB>receiver` per line.
    #[arg(long)]
    edges: PathBuf,
    /// Node documents: `label<TAB>word word ...` per line.
    #[arg(long)]
    docs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Model settings (JSON or key=value lines); flags override it.
    #[arg(long, conflicts_with = "resume")]
    config: Option<PathBuf>,
    /// One of sb, sbt, revsbt, infsbt, lda.
    #[arg(long, conflicts_with = "resume")]
    model: Option<Model>,
    #[arg(long, conflicts_with = "resume")]
    k: Option<usize>,
    #[arg(long, conflicts_with = "resume")]
    alpha: Option<f64>,
    #[arg(long, conflicts_with = "resume")]
    beta: Option<f64>,
    #[arg(long, conflicts_with = "resume")]
    gamma: Option<f64>,
    #[arg(long, conflicts_with = "resume")]
    eta: Option<f64>,
    /// Text coupling: corrected or uncorrected.
    #[arg(long, conflicts_with = "resume", value_parser = parse_coupling)]
    coupling: Option<TextCoupling>,
    /// Total sweeps; with --resume, the new total.
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long, conflicts_with = "resume")]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "resume")]
    trace_every: Option<u64>,
    /// Average the estimate over sweeps from this one on (finite models).
    #[arg(long)]
    average_from: Option<u64>,
    /// Continue the chain stored in this snapshot.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Ground truth from `generate`, needed for vi and ae.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated: vi, ae, rank, auc, ll or full metric names.
    #[arg(long, default_value = "vi")]
    metrics: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Fraction of tokens kept for training when scoring held-out words.
    #[arg(long, default_value_t = 0.9)]
    word_train_fraction: f64,
    /// Negatives sampled per fold for AUC.
    #[arg(long, default_value_t = 500)]
    negatives: usize,
    /// Exclude self-loops from the candidate pairs.
    #[arg(long)]
    no_self_loops: bool,
    /// Skip the random-score baseline rows.
    #[arg(long)]
    no_null: bool,
    /// Sweeps for refits on training splits (default: the snapshot's).
    #[arg(long)]
    sweeps: Option<u64>,
    /// Seed for splits, negatives and the baseline (default: the snapshot's).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// dot, graphml or json.
    #[arg(long)]
    format: ExportFormat,
    /// Words per vertex label.
    #[arg(long, default_value_t = 5)]
    top_words: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_coupling(s: &str) -> Result<TextCoupling, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown coupling {s:?} (expected corrected or uncorrected)"))
}

/// Parses a JSON object, or `key=value` lines whose values are JSON literals
/// or bare strings.
fn parse_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", path.display()));
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).map_err(bad);
    }
    let mut map = serde_json::Map::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let value = value.trim();
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        map.insert(key.trim().to_string(), parsed);
    }
    serde_json::from_value(serde_json::Value::Object(map)).map_err(bad)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

fn to_value<T: Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| CliError::Data(e.to_string()))
}

fn data_err(path: &Path, e: blocktext::Error) -> CliError {
    match e {
        blocktext::Error::Io(source) => CliError::io(path, source),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

/// Loaded inputs plus their digests.
struct Inputs {
    edges: EdgeList,
    corpus: NodeCorpus,
    edges_sha: String,
    docs_sha: Option<String>,
}

fn load_inputs(edges_path: &Path, docs_path: Option<&Path>) -> CliResult<Inputs> {
    let bytes = read_file(edges_path)?;
    let edges = load_edge_list(&bytes[..]).map_err(|e| data_err(edges_path, e))?;
    let edges_sha = sha256_bytes(&bytes);
    let (corpus, docs_sha) = match docs_path {
        Some(p) => {
            let bytes = read_file(p)?;
            let corpus = load_node_documents(&bytes[..], &edges).map_err(|e| data_err(p, e))?;
            (corpus, Some(sha256_bytes(&bytes)))
        }
        None => (NodeCorpus::empty(edges.num_nodes()), None),
    };
    Ok(Inputs { edges, corpus, edges_sha, docs_sha })
}

/// Fails unless the data files are the ones the snapshot was fitted on.
fn check_digests(snapshot: &Snapshot, inputs: &Inputs) -> CliResult<()> {
    for (name, actual) in [("edges", Some(&inputs.edges_sha)), ("docs", inputs.docs_sha.as_ref())] {
        let recorded = snapshot.inputs.get(name);
        if recorded.map(String::as_str) != actual.map(String::as_str) {
            let show = |d: Option<&String>| d.map_or_else(|| "none".to_string(), Clone::clone);
            return Err(CliError::Data(format!(
                "{name} digest mismatch: snapshot was fitted on {} but the given input is {}",
                show(recorded),
                show(actual)
            )));
        }
    }
    Ok(())
}

fn record_inputs(manifest: &mut RunManifest, edges: &Path, docs: Option<&Path>) -> CliResult<()> {
    manifest.input("edges", edges)?;
    if let Some(d) = docs {
        manifest.input("docs", d)?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let clock = Instant::now();
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => parse_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let data = generate(&cfg)?;
    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("generate", to_value(&cfg)?, cfg.seed);
    if let Some(p) = &args.config {
        manifest.input("config", p)?;
    }
    let mut edges = Vec::new();
    data.edges.write_tsv(&mut edges)?;
    let mut docs = Vec::new();
    data.corpus.write_tsv(&data.edges, &mut docs)?;
    for (name, file, contents) in [
        ("edges", "edges.tsv", edges),
        ("docs", "docs.tsv", docs),
        ("truth", "truth.json", to_json(&data.truth)?.into_bytes()),
    ] {
        let path = args.out.join(file);
        write_file(&path, contents)?;
        manifest.output(name, &path)?;
    }
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    manifest.write(&args.out.join("manifest.json"))?;
    println!(
        "generated {} nodes, {} edges, {} tokens in {}",
        data.edges.num_nodes(),
        data.edges.len(),
        data.corpus.total_tokens(),
        args.out.display()
    );
    Ok(())
}

fn fit_config(args: &FitArgs) -> CliResult<ModelConfig> {
    let mut cfg = match (&args.config, args.model) {
        (Some(p), _) => parse_config::<ModelConfig>(p)?,
        (None, Some(m)) => ModelConfig::new(m),
        (None, None) => return Err(CliError::Usage("fit needs --model, --config or --resume".into())),
    };
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    for (slot, v) in [
        (&mut cfg.alpha, args.alpha),
        (&mut cfg.beta, args.beta),
        (&mut cfg.gamma, args.gamma),
        (&mut cfg.eta, args.eta),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(c) = args.coupling {
        cfg.coupling = c;
    }
    if let Some(s) = args.sweeps {
        cfg.sweeps = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trace_every {
        cfg.trace_every = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let clock = Instant::now();
    let inputs = load_inputs(&args.edges, args.docs.as_deref())?;
    let options = RunOptions { average_from: args.average_from, ..RunOptions::default() };
    let (cfg, out, previous) = match &args.resume {
        Some(path) => {
            let snapshot: Snapshot = read_json(path)?;
            check_digests(&snapshot, &inputs)?;
            let mut cfg = snapshot.config.clone();
            if let Some(s) = args.sweeps {
                cfg.sweeps = s;
            }
            let out = resume(&snapshot, &cfg, &inputs.edges, &inputs.corpus, &options)?;
            (cfg, out, Some(path))
        }
        None => {
            let cfg = fit_config(args)?;
            let out = run_with(&cfg, &inputs.edges, &inputs.corpus, &options)?;
            (cfg, out, None)
        }
    };
    let mut snapshot = out.snapshot;
    snapshot.inputs.insert("edges".into(), inputs.edges_sha.clone());
    if let Some(d) = &inputs.docs_sha {
        snapshot.inputs.insert("docs".into(), d.clone());
    }

    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("fit", to_value(&cfg)?, cfg.seed);
    record_inputs(&mut manifest, &args.edges, args.docs.as_deref())?;
    if let Some(p) = &args.config {
        manifest.input("config", p)?;
    }
    if let Some(p) = previous {
        manifest.input("resume", p)?;
    }
    let snap_path = args.out.join("snapshot.json");
    write_file(&snap_path, to_json(&snapshot)?)?;
    manifest.output("snapshot", &snap_path)?;
    let diag_path = args.out.join("diagnostics.tsv");
    let mut diag = Vec::new();
    snapshot.diagnostics.write_tsv(&mut diag)?;
    write_file(&diag_path, diag)?;
    manifest.output("diagnostics", &diag_path)?;
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    manifest.write(&args.out.join("manifest.json"))?;
    let last = snapshot.diagnostics.trace.last();
    println!(
        "{} finished {} sweeps, k={}, log joint {}",
        cfg.model,
        snapshot.sweeps_done,
        snapshot.k,
        last.map_or_else(|| "n/a".to_string(), |p| format!("{:.4}", p.log_joint))
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs, jobs: usize) -> CliResult<()> {
    let clock = Instant::now();
    let metrics = Metric::parse_list(&args.metrics)?;
    if args.truth.is_none() {
        if metrics.iter().any(|m| matches!(m, Metric::NetAe | Metric::TopicAe)) {
            return Err(CliError::Usage("AE requires ground truth (pass --truth)".into()));
        }
        if metrics.iter().any(|m| m.needs_truth()) {
            return Err(CliError::Usage("VI requires ground truth (pass --truth)".into()));
        }
    }
    let snapshot: Snapshot = read_json(&args.snapshot)?;
    let inputs = load_inputs(&args.edges, args.docs.as_deref())?;
    check_digests(&snapshot, &inputs)?;
    let seed = args.seed.unwrap_or(snapshot.config.seed);
    let mut cfg = snapshot.config.clone();
    if let Some(s) = args.sweeps {
        cfg.sweeps = s;
    }

    let mut report = ScoreReport::default();
    let truth: Option<GroundTruth> = args.truth.as_deref().map(read_json).transpose()?;
    if let Some(truth) = &truth {
        if truth.edge_pairs.len() != inputs.edges.len() {
            return Err(CliError::Data(format!(
                "truth covers {} edges but the edge list has {}",
                truth.edge_pairs.len(),
                inputs.edges.len()
            )));
        }
        let state = GibbsState::from_assignments(
            &snapshot.config,
            &inputs.edges,
            &inputs.corpus,
            snapshot.k,
            &snapshot.edge_assignments,
            &snapshot.word_topics,
        )?;
        let wanted: Vec<Metric> = metrics.iter().copied().filter(|m| m.needs_truth()).collect();
        report.rows.extend(recovery_rows(&snapshot.config, &state, truth, &wanted)?);
    }

    let refit: Vec<Metric> = metrics.iter().copied().filter(|m| !m.needs_truth()).collect();
    if !refit.is_empty() {
        let mut splits = if refit.iter().any(|m| m.needs_folds()) {
            kfold_edges(&inputs.edges, args.folds, seed)?
        } else {
            SplitPlan::default()
        };
        if refit.contains(&Metric::WordLl) {
            splits = splits.with_word_test(&word_holdout(&inputs.corpus, args.word_train_fraction, seed)?);
        }
        let bench = BenchmarkConfig {
            metrics: refit,
            negatives: args.negatives,
            include_self_loops: !args.no_self_loops,
            include_null: !args.no_null,
            seed,
            exec: par::with_threads(jobs),
        };
        let data = BenchmarkData { edges: &inputs.edges, corpus: &inputs.corpus, truth: None, splits: &splits };
        report.rows.extend(run_benchmark(&[cfg.clone()], &data, &bench)?.rows);
    }

    create_dir(&args.out)?;
    let config = serde_json::json!({
        "model": cfg,
        "metrics": metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "folds": args.folds,
        "word_train_fraction": args.word_train_fraction,
        "negatives": args.negatives,
        "include_self_loops": !args.no_self_loops,
        "include_null": !args.no_null,
    });
    let mut manifest = RunManifest::new("eval", config, seed);
    manifest.input("snapshot", &args.snapshot)?;
    record_inputs(&mut manifest, &args.edges, args.docs.as_deref())?;
    if let Some(t) = &args.truth {
        manifest.input("truth", t)?;
    }
    let tsv_path = args.out.join("report.tsv");
    let mut tsv = Vec::new();
    report.write_tsv(&mut tsv)?;
    write_file(&tsv_path, &tsv)?;
    manifest.output("report_tsv", &tsv_path)?;
    let json_path = args.out.join("report.json");
    write_file(&json_path, to_json(&report)?)?;
    manifest.output("report_json", &json_path)?;
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    manifest.write(&args.out.join("manifest.json"))?;
    print!("{}", String::from_utf8_lossy(&tsv));
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> CliResult<()> {
    let clock = Instant::now();
    let snapshot: Snapshot = read_json(&args.snapshot)?;
    let graph = IndustryGraph::from_snapshot(&snapshot, args.top_words)?;
    let rendered = graph.render(args.format)?;
    create_dir(&args.out)?;
    let config = serde_json::json!({ "format": args.format.extension(), "top_words": args.top_words });
    let mut manifest = RunManifest::new("export", config, snapshot.config.seed);
    manifest.input("snapshot", &args.snapshot)?;
    let path = args.out.join(format!("industries.{}", args.format.extension()));
    write_file(&path, rendered)?;
    manifest.output("graph", &path)?;
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    manifest.write(&args.out.join("manifest.json"))?;
    println!("{} industries, {} arcs -> {}", graph.vertices.len(), graph.arcs.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a, cli.jobs),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
