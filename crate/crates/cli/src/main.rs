//! `act-forge`: augment, baseline, evaluate and validate dialogue corpora.
//!
//! Exit codes: 0 success, 1 data errors (bad files, invariant violations,
//! failed turns), 2 usage errors (bad flags, missing input files).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use actforge::actgen::{AugConfig, DomainSwitchMode};
use actforge::augment::{augment_corpus, from_jsonl, to_jsonl, value_substitution_corpus, AugDeps, AugRecord};
use actforge::corpus::{self, load_corpus, read_corpus, validate_corpus, CorefList, SlotValueDict};
use actforge::filter::{RemoteFilter, RuleFilter, StateFilter};
use actforge::genbridge::{ExternalGenerator, Generator, PhraseLexicon, TemplateGenerator};
use actforge::metrics::{
    joint_goal_accuracy, profiles_from_corpus, profiles_from_records, render_distribution_table, render_f1_table,
    slot_class_f1, slot_distribution, CountUnit, PredictionSet,
};
use actforge::wire::{Endpoint, DEFAULT_TIMEOUT};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "act-forge", version, about = "Controllable user act augmentation for dialogue state tracking corpora")]
struct Cli {
    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate augmented user turns for every turn of a corpus.
    Augment(AugmentArgs),
    /// Value-substitution baseline.
    Vs(VsArgs),
    /// Slot distribution report for a corpus or augmentation output.
    Stats(StatsArgs),
    /// Joint goal accuracy and per-class slot F1 of tracker predictions.
    Eval(EvalArgs),
    /// Check a corpus against the schema and turn invariants.
    Validate(ValidateArgs),
    /// Convert raw MultiWOZ 2.x data.json into the corpus schema.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    coref: PathBuf,
    /// Slot phrases and templates; the bundled lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// JSON configuration; defaults for every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `template`, or `external ADDR` (host:port, tcp://host:port or exec:COMMAND).
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "ADDR"], default_values_t = ["template".to_string()])]
    generator: Vec<String>,
    /// `rule`, or `neural ADDR`.
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "ADDR"], default_values_t = ["rule".to_string()])]
    filter: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the run statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the configuration's domain switch mode.
    #[arg(long, value_enum)]
    domain_switch_mode: Option<SwitchMode>,
    /// Seconds to wait for an external server's reply.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs())]
    timeout_secs: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SwitchMode {
    Stay,
    Switch,
}

#[derive(Args)]
struct VsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Turn,
    Slot,
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus to profile, or the source corpus of `--records`.
    #[arg(long, required_unless_present = "records")]
    corpus: Option<PathBuf>,
    /// Augmentation output (JSONL) to profile instead of the corpus.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, value_enum, default_value_t = Unit::Turn)]
    unit: Unit,
    /// Write the report as JSON here; the table always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Predictions, one `{"dialogue_id","turn_id","state"}` object per line.
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    coref: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// Raw MultiWOZ data.json.
    #[arg(long)]
    input: PathBuf,
    /// Coreference list used to keep annotated refer pairs.
    #[arg(long)]
    coref: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Run = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn require_files(paths: &[&Path]) -> Run {
    for p in paths {
        if !p.is_file() {
            return Err(usage(format!("input file `{}` does not exist", p.display())));
        }
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

fn file_digest(path: &Path) -> anyhow::Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading `{}`", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    output: FileDigest,
    timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<&'a serde_json::Value>,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Write `<out>.manifest.json` next to `out`.
fn write_manifest(
    command: &'static str,
    config: &impl Serialize,
    seed: Option<u64>,
    inputs: &[&Path],
    out: &Path,
    stats: Option<&serde_json::Value>,
) -> anyhow::Result<()> {
    let config_json = serde_json::to_string(config)?;
    let manifest = Manifest {
        tool: "act-forge",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: sha256_hex(config_json.as_bytes()),
        seed,
        inputs: inputs.iter().map(|p| file_digest(p)).collect::<anyhow::Result<_>>()?,
        output: file_digest(out)?,
        timestamp: chrono::Utc::now().to_rfc3339(),
        stats,
    };
    write_file(&manifest_path(out), &serde_json::to_string_pretty(&manifest)?)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing `{}`", path.display()))
}

fn parse_endpoint(kind: &[String], local: &str, remote: &str, flag: &str) -> Result<Option<Endpoint>, Failure> {
    match kind {
        [k] if k == local => Ok(None),
        [k, addr] if k == remote => addr
            .parse()
            .map(Some)
            .map_err(|e| usage(format!("--{flag}: {e}"))),
        _ => Err(usage(format!("--{flag} expects `{local}` or `{remote} ADDR`, got `{}`", kind.join(" ")))),
    }
}

fn augment(a: AugmentArgs) -> Run {
    let mut inputs: Vec<&Path> = vec![&a.corpus, &a.dict, &a.coref];
    inputs.extend(a.lexicon.as_deref());
    inputs.extend(a.config.as_deref());
    require_files(&inputs)?;
    let gen_endpoint = parse_endpoint(&a.generator, "template", "external", "generator")?;
    let filter_endpoint = parse_endpoint(&a.filter, "rule", "neural", "filter")?;
    if a.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }

    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading `{}`", p.display()))?;
            AugConfig::from_json_str(&text).with_context(|| format!("configuration `{}`", p.display()))?
        }
        None => AugConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = a.domain_switch_mode {
        cfg.domain_switch_mode = match mode {
            SwitchMode::Stay => DomainSwitchMode::Stay,
            SwitchMode::Switch => DomainSwitchMode::Switch,
        };
    }
    cfg.validate().map_err(|e| anyhow!(e))?;

    let corpus = load_corpus(&a.corpus)?;
    let dict = SlotValueDict::load(&a.dict)?;
    let coref = CorefList::load(&a.coref)?;
    let lexicon = match &a.lexicon {
        Some(p) => PhraseLexicon::load(p)?,
        None => PhraseLexicon::bundled(),
    };
    lexicon.check_coverage(&dict)?;
    let timeout = Duration::from_secs(a.timeout_secs);

    let generator: Box<dyn Generator> = match gen_endpoint {
        None => Box::new(TemplateGenerator {
            lexicon: lexicon.clone(),
            dict: dict.clone(),
            coref: coref.clone(),
        }),
        Some(ep) => Box::new(ExternalGenerator::new(ep, timeout)),
    };
    let filter: Box<dyn StateFilter> = match filter_endpoint {
        None => Box::new(RuleFilter {
            dict: dict.clone(),
            coref: coref.clone(),
            lexicon: lexicon.clone(),
        }),
        Some(ep) => Box::new(RemoteFilter::new(ep, timeout, dict.clone(), coref.clone(), lexicon.clone())),
    };
    let deps = AugDeps {
        dict: &dict,
        coref: &coref,
        generator: generator.as_ref(),
        filter: filter.as_ref(),
    };
    log::info!(
        "augmenting {} dialogues ({} turns) with {} workers",
        corpus.dialogues.len(),
        corpus.turn_count(),
        a.workers
    );
    let out = augment_corpus(&corpus, &deps, &cfg, a.workers);
    for e in &out.errors {
        log::error!("{e}");
    }
    write_file(&a.out, &to_jsonl(&out.records))?;
    let stats = serde_json::to_value(&out.stats).context("serializing stats")?;
    if let Some(p) = &a.stats {
        write_file(p, &serde_json::to_string_pretty(&stats).context("serializing stats")?)?;
    }
    #[derive(Serialize)]
    struct RunConfig<'a> {
        config: &'a AugConfig,
        generator: &'a [String],
        filter: &'a [String],
    }
    let run = RunConfig {
        config: &cfg,
        generator: &a.generator,
        filter: &a.filter,
    };
    write_manifest("augment", &run, Some(cfg.seed), &inputs, &a.out, Some(&stats))?;
    log::info!(
        "{} of {} attempted turns augmented ({} skipped)",
        out.stats.turns_succeeded,
        out.stats.turns_attempted,
        out.stats.turns_skipped
    );
    if !out.errors.is_empty() {
        return Err(anyhow!("{} turns failed with errors; first: {}", out.errors.len(), out.errors[0]).into());
    }
    Ok(())
}

fn vs(a: VsArgs) -> Run {
    require_files(&[&a.corpus, &a.dict])?;
    let corpus = load_corpus(&a.corpus)?;
    let dict = SlotValueDict::load(&a.dict)?;
    let records = value_substitution_corpus(&corpus, &dict, a.seed);
    write_file(&a.out, &to_jsonl(&records))?;
    log::info!("{} of {} turns substituted", records.len(), corpus.turn_count());
    write_manifest("vs", &serde_json::json!({ "seed": a.seed }), Some(a.seed), &[&a.corpus, &a.dict], &a.out, None)?;
    Ok(())
}

fn stats(a: StatsArgs) -> Run {
    let mut inputs: Vec<&Path> = vec![&a.dict];
    inputs.extend(a.corpus.as_deref());
    inputs.extend(a.records.as_deref());
    require_files(&inputs)?;
    let dict = SlotValueDict::load(&a.dict)?;
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?;
    let profiles = match &a.records {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading `{}`", p.display()))?;
            let records: Vec<AugRecord> =
                from_jsonl(&text).map_err(|(line, e)| anyhow!("{}:{line}: {e}", p.display()))?;
            profiles_from_records(&records, corpus.as_ref(), &dict)
        }
        None => profiles_from_corpus(corpus.as_ref().expect("clap requires --corpus"), &dict),
    };
    let unit = match a.unit {
        Unit::Turn => CountUnit::Turn,
        Unit::Slot => CountUnit::Slot,
    };
    let report = slot_distribution(&profiles, unit);
    print!("{}", render_distribution_table(&report));
    if let Some(out) = &a.out {
        write_file(out, &serde_json::to_string_pretty(&report).context("serializing report")?)?;
        write_manifest("stats", &serde_json::json!({ "unit": unit }), None, &inputs, out, None)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Run {
    require_files(&[&a.corpus, &a.preds, &a.dict])?;
    let corpus = load_corpus(&a.corpus)?;
    let preds = PredictionSet::load(&a.preds)?;
    let dict = SlotValueDict::load(&a.dict)?;
    let jga = joint_goal_accuracy(&preds, &corpus);
    let f1 = slot_class_f1(&preds, &corpus, &dict);
    println!("joint goal accuracy {jga:.4} over {} turns", corpus.turn_count());
    print!("{}", render_f1_table(&f1));
    if let Some(out) = &a.out {
        let report = serde_json::json!({
            "turns": corpus.turn_count(),
            "joint_goal_accuracy": jga,
            "slot_class_f1": f1,
        });
        write_file(out, &serde_json::to_string_pretty(&report).context("serializing report")?)?;
        write_manifest("eval", &serde_json::json!({}), None, &[&a.corpus, &a.preds, &a.dict], out, None)?;
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Run {
    require_files(&[&a.corpus, &a.coref])?;
    let corpus = read_corpus(&a.corpus)?;
    let coref = CorefList::load(&a.coref)?;
    let violations = validate_corpus(&corpus, &coref);
    println!("{}", serde_json::to_string_pretty(&violations).context("serializing violations")?);
    for v in &violations {
        log::error!("{v}");
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("{} violations in `{}`", violations.len(), a.corpus.display()).into())
    }
}

fn convert(a: ConvertArgs) -> Run {
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.coref.as_deref());
    require_files(&inputs)?;
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading `{}`", a.input.display()))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing `{}`", a.input.display()))?;
    let coref = a.coref.as_deref().map(CorefList::load).transpose()?;
    let corpus = corpus::multiwoz::convert(&raw, coref.as_ref());
    let violations = corpus::check_invariants(&corpus);
    for v in &violations {
        log::warn!("{v}");
    }
    corpus::write_corpus(&corpus, &a.out)?;
    log::info!("{} dialogues, {} turns", corpus.dialogues.len(), corpus.turn_count());
    write_manifest("convert", &serde_json::json!({ "coref": a.coref.is_some() }), None, &inputs, &a.out, None)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    let result = match cli.command {
        Command::Augment(a) => augment(a),
        Command::Vs(a) => vs(a),
        Command::Stats(a) => stats(a),
        Command::Eval(a) => eval(a),
        Command::Validate(a) => validate(a),
        Command::Convert(a) => convert(a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
