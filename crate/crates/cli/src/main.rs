//! `adsb`: ingest crash files, train and evaluate the experience engine,
//! query the commonsense engine, and run the strategic monitor.

mod render;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsb::cie::{chain, KnowledgeBase};
use adsb::ere::synthetic::synthetic_cases;
use adsb::ere::{train_ere, EreModel, TrainParams};
use adsb::gvk::SafetyConfig;
use adsb::ingest::{consolidate_all, parse_year, split_dataset, ConsolidatedCase, ElementCatalog, IngestReport, LevelFile};
use adsb::monitor::{advise, assess, gate, run_scenarios, DriverProfile, Engines, MonitorConfig};
use adsb::scene::encoding::ElementSpec;
use adsb::scene::{parse_event, ObservedEvent, Scenario, Scene};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser)]
#[command(name = "adsb", version, about = "Scene safety assessment from crash history, commonsense and driving rules")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Consolidate yearly crash files into one case per line (JSON lines).
    Ingest(IngestArgs),
    /// Train an experience model from a consolidated dataset.
    Train(TrainArgs),
    /// Score a model on a holdout dataset.
    Evaluate(EvaluateArgs),
    /// Assess one scene with every available engine.
    Assess(AssessArgs),
    /// Query the knowledge base from an event sentence.
    Infer(InferArgs),
    /// Judge a state transition; exit code 0 = GO, 2 = INHIBIT, 3 = CANCEL.
    Gate(GateArgs),
    /// Driver advisory for a scene and a driver profile.
    Advise(AdviseArgs),
    /// Replay scenario files through the gate.
    Simulate(SimulateArgs),
    /// Write a synthetic dataset with a planted severity rule.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// `YEAR:LEVEL=path` or `YEAR:path` (level guessed from the file name).
    #[arg(required = true)]
    inputs: Vec<String>,
    /// Element catalog; the built-in catalog by default.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Consolidated dataset, one case per line.
    #[arg(long)]
    out: PathBuf,
    /// Quarantined rows and catalog gaps, one JSON object per line.
    #[arg(long)]
    issues: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Consolidated dataset (JSON lines).
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the split, clustering and forests.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed cluster count; chosen by silhouette when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Trees per forest.
    #[arg(long)]
    trees: Option<usize>,
    /// Deepest split of any tree.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Fewest training cases in a leaf.
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Hold out this fraction before training (0 trains on everything).
    #[arg(long, default_value_t = 0.0)]
    holdout_fraction: f64,
    /// Where to write the held-out cases.
    #[arg(long)]
    holdout_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Held-out cases (JSON lines).
    #[arg(long)]
    holdout: PathBuf,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Experience model file; the engine is unavailable without it.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Knowledge base (TSV); the shipped seed base by default.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Safety configuration (JSON); the built-in defaults otherwise.
    #[arg(long)]
    safety: Option<PathBuf>,
    /// Monitor thresholds (JSON); the built-in defaults otherwise.
    #[arg(long)]
    monitor_config: Option<PathBuf>,
    /// Engines to switch off: any of ere, cie, gvk.
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    engines: EngineArgs,
    /// Scene file (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Recent events, a JSON list of `{"event": ..., "params": {...}}`.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Event sentence, e.g. "a ball is rolling at the intersection".
    event: String,
    /// Knowledge base (TSV); the shipped seed base by default.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Relation to query, e.g. HappensAfter, XWant, XNeed.
    #[arg(long, default_value = "HappensAfter")]
    relation: String,
    /// More than 1 follows chains up to this many hops.
    #[arg(long, default_value_t = 1)]
    hops: usize,
}

#[derive(Args)]
struct GateArgs {
    #[command(flatten)]
    engines: EngineArgs,
    /// Scene the vehicle is in now.
    #[arg(long)]
    current: PathBuf,
    /// Scene the transition would lead to; this is what gets judged.
    #[arg(long)]
    proposed: PathBuf,
    /// Events driving the transition, a JSON list as for `assess`.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct AdviseArgs {
    #[command(flatten)]
    engines: EngineArgs,
    /// Scene file (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Driver profile (JSON object of attributes).
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    engines: EngineArgs,
    /// Scenario files (JSON).
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of cases.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Dataset file to write.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        // A closed stdout (e.g. piped into `head`) is not a failure.
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    let kind = e
        .downcast_ref::<io::Error>()
        .map(io::Error::kind)
        .or_else(|| e.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind));
    kind == Some(io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let fmt = cli.format;
    match cli.command {
        Command::Ingest(a) => ingest(a, fmt),
        Command::Train(a) => train(a, fmt),
        Command::Evaluate(a) => {
            let model = load_model(&a.model)?;
            let holdout = read_cases(&a.holdout)?;
            let eval = model.evaluate(&holdout)?;
            emit(fmt, &eval, || render::evaluation(&eval))
        }
        Command::Assess(a) => {
            let (engines, cfg) = a.engines.load()?;
            let scene: Scene = read_json(&a.scene)?;
            let events = read_events(a.events.as_deref())?;
            let out = assess(&engines, &scene, &events, &cfg);
            emit(fmt, &out, || render::assessment(&out))
        }
        Command::Infer(a) => infer(a, fmt),
        Command::Gate(a) => {
            let (engines, cfg) = a.engines.load()?;
            let current: Scene = read_json(&a.current)?;
            let proposed: Scene = read_json(&a.proposed)?;
            let issues = proposed.validate();
            if !issues.is_empty() {
                bail!("proposed scene is invalid: {}", issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "));
            }
            let events = read_events(a.events.as_deref())?;
            let d = gate(&engines, &current, &proposed, &events, &cfg);
            emit(fmt, &d, || render::decision(&d))?;
            Ok(ExitCode::from(d.verdict.exit_code() as u8))
        }
        Command::Advise(a) => {
            let (engines, cfg) = a.engines.load()?;
            let scene: Scene = read_json(&a.scene)?;
            let profile: DriverProfile = match &a.profile {
                Some(p) => read_json(p)?,
                None => DriverProfile::default(),
            };
            let out = advise(&engines, &scene, &profile, &cfg);
            emit(fmt, &out, || render::advisory(&out))
        }
        Command::Simulate(a) => {
            let (engines, cfg) = a.engines.load()?;
            let scenarios: Vec<Scenario> = a.scenarios.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
            let mut reports = Vec::new();
            for (path, r) in a.scenarios.iter().zip(run_scenarios(&engines, &scenarios, &cfg)) {
                match r {
                    Ok(r) => reports.push((path.display().to_string(), r)),
                    Err(issues) => {
                        let msgs: Vec<String> = issues.iter().map(|i| format!("scene {}: {}", i.scene_index, i.message)).collect();
                        bail!("{} is not a valid scenario:\n  {}", path.display(), msgs.join("\n  "));
                    }
                }
            }
            let json: Vec<_> = reports.iter().map(|(p, r)| serde_json::json!({ "scenario": p, "report": r })).collect();
            emit(fmt, &json, || reports.iter().map(|(p, r)| render::scenario(p, r)).collect::<String>())
        }
        Command::Synth(a) => {
            let cases = synthetic_cases(a.n, a.seed);
            write_cases(&a.out, &cases)?;
            let summary = serde_json::json!({ "cases": cases.len(), "seed": a.seed, "out": a.out });
            emit(fmt, &summary, || format!("wrote {} synthetic cases to {}\n", cases.len(), a.out.display()))
        }
    }
}

impl EngineArgs {
    fn load(&self) -> Result<(Engines, MonitorConfig)> {
        for d in &self.disable {
            if !matches!(d.as_str(), "ere" | "cie" | "gvk") {
                bail!("unknown engine `{d}` in --disable (expected ere, cie or gvk)");
            }
        }
        let off = |name: &str| self.disable.iter().any(|d| d == name);
        let ere = match (&self.model, off("ere")) {
            (Some(p), false) => Some(load_model(p)?),
            _ => None,
        };
        let kb = match (&self.kb, off("cie")) {
            (_, true) => None,
            (Some(p), false) => Some(KnowledgeBase::load(p).with_context(|| format!("loading {}", p.display()))?),
            (None, false) => Some(KnowledgeBase::seed()),
        };
        let safety = match (&self.safety, off("gvk")) {
            (_, true) => None,
            (Some(p), false) => {
                let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Some(SafetyConfig::from_json(&src).map_err(|e| anyhow::anyhow!("loading {}: {e}", p.display()))?)
            }
            (None, false) => Some(SafetyConfig::default()),
        };
        let cfg = match &self.monitor_config {
            Some(p) => read_json(p)?,
            None => MonitorConfig::default(),
        };
        Ok((Engines::new(ere, kb, safety), cfg))
    }
}

fn ingest(a: IngestArgs, fmt: Format) -> Result<ExitCode> {
    let catalog = match &a.catalog {
        Some(p) => ElementCatalog::load(p)?,
        None => ElementCatalog::builtin(),
    };
    let mut by_year: std::collections::BTreeMap<u16, Vec<LevelFile>> = Default::default();
    for input in &a.inputs {
        let (year, file) = input.split_once(':').with_context(|| format!("`{input}`: expected YEAR:path"))?;
        let year: u16 = year.parse().with_context(|| format!("`{input}`: bad year"))?;
        by_year.entry(year).or_default().push(LevelFile::parse_arg(file).map_err(anyhow::Error::msg)?);
    }
    let mut report = IngestReport::default();
    let mut cases = Vec::new();
    let mut rows_read = 0;
    for (year, files) in &by_year {
        let parsed = parse_year(files, *year, &catalog)?;
        rows_read += parsed.rows_read;
        report.extend(parsed.report);
        let (consolidated, issues) = consolidate_all(&parsed.cases, &catalog);
        report.issues.extend(issues);
        cases.extend(consolidated);
    }
    write_cases(&a.out, &cases)?;
    if let Some(p) = &a.issues {
        report.write_jsonl(BufWriter::new(File::create(p)?))?;
    }
    let summary = serde_json::json!({
        "years": by_year.keys().collect::<Vec<_>>(),
        "rows_read": rows_read,
        "cases": cases.len(),
        "malformed_rows": report.malformed_rows(),
        "catalog_gaps": report.catalog_gaps(),
    });
    emit(fmt, &summary, || {
        format!(
            "{} cases from {} rows; {} malformed rows quarantined, {} catalog gaps\n",
            cases.len(),
            rows_read,
            report.malformed_rows(),
            report.catalog_gaps()
        )
    })
}

fn train(a: TrainArgs, fmt: Format) -> Result<ExitCode> {
    let cases = read_cases(&a.data)?;
    let mut params = TrainParams { seed: a.seed, ..Default::default() };
    params.cluster.k = a.k;
    if let Some(t) = a.trees {
        params.forest.n_trees = t;
    }
    if let Some(d) = a.max_depth {
        params.forest.max_depth = d;
    }
    if let Some(m) = a.min_samples_leaf {
        params.forest.min_samples_leaf = m;
    }
    let (train, holdout) = if a.holdout_fraction > 0.0 {
        let s = split_dataset(cases, a.holdout_fraction, a.seed)?;
        (s.train, s.holdout)
    } else {
        (cases, Vec::new())
    };
    if let Some(p) = &a.holdout_out {
        write_cases(p, &holdout)?;
    }
    // Catalog elements that occur in the data; absent ones would only add
    // constant columns.
    let specs: Vec<ElementSpec> = ElementSpec::from_catalog(&ElementCatalog::builtin())
        .into_iter()
        .filter(|s| train.iter().any(|c| c.causal.contains_key(&s.id)))
        .collect();
    let model = train_ere(&train, &specs, &params)?;
    model.save(BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?))?;
    let summary = serde_json::json!({
        "train_size": train.len(),
        "holdout_size": holdout.len(),
        "dimension": model.schema.dimension(),
        "clusters": model.cluster_model.centroids.len(),
        "similarity_threshold": model.similarity_threshold,
        "out": a.out,
    });
    emit(fmt, &summary, || {
        format!(
            "trained on {} cases ({} held out): dimension {}, {} clusters, threshold {:.4}\nmodel written to {}\n",
            train.len(),
            holdout.len(),
            model.schema.dimension(),
            model.cluster_model.centroids.len(),
            model.similarity_threshold,
            a.out.display()
        )
    })
}

fn infer(a: InferArgs, fmt: Format) -> Result<ExitCode> {
    let kb = match &a.kb {
        Some(p) => KnowledgeBase::load(p)?,
        None => KnowledgeBase::seed(),
    };
    let query = parse_event(&a.event);
    if a.hops <= 1 {
        let out = kb.infer(&query, &a.relation)?;
        emit(fmt, &out, || render::inferences(&kb, &query, &a.relation, &out))
    } else {
        let out = chain(&kb, &query, &a.relation, a.hops)?;
        emit(fmt, &out, || render::chains(&out))
    }
}

fn emit<T: Serialize>(fmt: Format, value: &T, text: impl FnOnce() -> String) -> Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match fmt {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
        }
        Format::Text => out.write_all(text().as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn read_events(path: Option<&Path>) -> Result<Vec<ObservedEvent>> {
    path.map_or(Ok(Vec::new()), read_json)
}

fn load_model(path: &Path) -> Result<EreModel> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    EreModel::load(BufReader::new(f)).with_context(|| format!("loading {}", path.display()))
}

fn read_cases(path: &Path) -> Result<Vec<ConsolidatedCase>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut cases = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        cases.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(cases)
}

fn write_cases(path: &Path, cases: &[ConsolidatedCase]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for c in cases {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
