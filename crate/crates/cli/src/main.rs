//! `augsel` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 corpus
//! error, 4 scoring failure beyond tolerance.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use augsel::corpus::{dump_segments, load_corpus, load_manifest, write_manifest, AlignmentEntry};
use augsel::fixture::SyntheticCorpus;
use augsel::oracle::write_oracle_csv;
use augsel::report::{to_canonical_json, to_canonical_line, to_value};
use augsel::seed::{self, domain};
use augsel::selector::with_threads;
use augsel::{
    apply_chain, parse_policy, run_oracle, score_policy, select_policy, serialize_policy, AugmentationPolicy,
    LabeledSegment, WordLabel,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use config::{Overrides, RunConfig, OUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Corpus(augsel::Error),
    #[error("{0}")]
    Scoring(augsel::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Corpus(_) => 3,
            CliError::Scoring(_) => 4,
        }
    }

    /// Classifies a failure raised while scoring.
    fn scoring(e: augsel::Error) -> Self {
        match e {
            augsel::Error::Scoring(_) => CliError::Scoring(e),
            augsel::Error::Policy { .. } => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }

    fn other(e: impl std::fmt::Display) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "augsel", version, about = "Select audio augmentation policies by conditional HSIC")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every master seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; beats the environment and the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Config override, e.g. `--set selector.num_policies=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random search; writes best_policy.json, ranking.json and run_info.json.
    Select,
    /// Scores one policy and prints its report.
    Score {
        #[arg(long)]
        policy: PathBuf,
    },
    /// Distorts every clip of the corpus once with a policy.
    Augment {
        #[arg(long)]
        policy: PathBuf,
    },
    /// Hidden-policy correlation experiment; writes oracle.json and oracle.csv.
    Oracle,
    /// Prints the labeled segment set as JSON lines.
    DumpSegments,
    /// Writes a synthetic corpus, its manifest and a starter run.toml.
    GenFixture {
        #[arg(long, value_enum, default_value_t = FixtureKind::Tiny)]
        kind: FixtureKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// 10 two-second clips, each saying 3 words.
    Tiny,
    /// 60 two-second single-word clips over 3 words.
    Isolated,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        set: cli.set.clone(),
        seed: cli.seed,
        out: cli.out.clone(),
        env_out: std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
    };
    if let Command::GenFixture { kind } = cli.command {
        let out = overrides
            .out
            .clone()
            .or(overrides.env_out.clone())
            .ok_or_else(|| CliError::Config("gen-fixture needs --out".into()))?;
        return gen_fixture(&out, kind);
    }
    let config = config::load(cli.config.as_deref(), &overrides)?;
    let threads = cli.threads;
    match &cli.command {
        Command::Select => cmd_select(&config, threads),
        Command::Score { policy } => cmd_score(&config, policy, threads),
        Command::Augment { policy } => cmd_augment(&config, policy, threads),
        Command::Oracle => cmd_oracle(&config, threads),
        Command::DumpSegments => cmd_dump_segments(&config),
        Command::GenFixture { .. } => unreachable!(),
    }
}

fn print_json(v: &Value) -> Result<(), CliError> {
    let line = to_canonical_line(v).map_err(CliError::other)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(CliError::other)?;
    out.flush().map_err(CliError::other)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}

fn prepare_out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let out = config.out_dir()?.to_path_buf();
    fs::create_dir_all(&out)
        .map_err(|e| CliError::Other(format!("cannot create output directory {}: {e}", out.display())))?;
    Ok(out)
}

fn ensure_manifest(config: &RunConfig) -> Result<&Path, CliError> {
    let manifest = config.manifest()?;
    if !manifest.is_file() {
        return Err(CliError::Config(format!(
            "`paths.manifest` = {} does not exist",
            manifest.display()
        )));
    }
    Ok(manifest)
}

fn load_segments(config: &RunConfig) -> Result<(Vec<WordLabel>, Vec<LabeledSegment>), CliError> {
    let manifest = ensure_manifest(config)?;
    let root = config.audio_root()?;
    load_corpus(manifest, &root, config.selector.num_classes, config.corpus.min_segment_s)
        .map_err(CliError::Corpus)
}

fn read_policy(path: &Path) -> Result<AugmentationPolicy, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read policy {}: {e}", path.display())))?;
    parse_policy(&text).map_err(|e| CliError::Config(format!("policy {}: {e}", path.display())))
}

fn pooled<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    with_threads(threads, f).map_err(CliError::other)
}

fn cmd_select(config: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    let (classes, segments) = load_segments(config)?;
    let out = prepare_out_dir(config)?;
    let start = Instant::now();
    let (selection, pool_threads) = pooled(threads, || {
        (select_policy(&segments, &config.selector), augsel::selector::current_num_threads())
    })?;
    let selection = selection.map_err(CliError::scoring)?;
    let elapsed = start.elapsed().as_secs_f64();

    write_file(&out.join("best_policy.json"), &serialize_policy(&selection.best))?;
    let ranking = json!({
        "config": config.echo_without_out_dir(),
        "classes": classes,
        "num_segments": segments.len(),
        "ranking": selection.ranking,
        "failures": selection.failures,
    });
    write_file(&out.join("ranking.json"), &to_canonical_json(&ranking).map_err(CliError::other)?)?;
    let info = json!({
        "config": config,
        "wall_clock_s": elapsed,
        "threads": pool_threads,
        "policies_scored": selection.ranking.len(),
        "policies_failed": selection.failures.len(),
    });
    write_file(&out.join("run_info.json"), &to_canonical_json(&info).map_err(CliError::other)?)?;

    let best = &selection.ranking[0];
    print_json(&json!({
        "best_policy_index": best.policy_index,
        "best_score": best.score,
        "best_policy": best.policy,
        "out_dir": out,
    }))
}

fn cmd_score(config: &RunConfig, policy: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let policy = read_policy(policy)?;
    let (_, segments) = load_segments(config)?;
    let report = pooled(threads, || score_policy(&segments, &policy, &config.selector))?
        .map_err(CliError::scoring)?;
    let mut v = to_value(&report).map_err(CliError::other)?;
    if let Value::Object(map) = &mut v {
        map.insert("config".into(), to_value(config).map_err(CliError::other)?);
    }
    print_json(&v)
}

/// Output location of a clip: its manifest path under `out`, or
/// `out/audio/<file name>` for absolute inputs.
fn output_rel_path(audio_path: &Path) -> PathBuf {
    if audio_path.is_relative() {
        audio_path.to_path_buf()
    } else {
        PathBuf::from("audio").join(audio_path.file_name().unwrap_or_default())
    }
}

fn cmd_augment(config: &RunConfig, policy: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let policy = read_policy(policy)?;
    let manifest = ensure_manifest(config)?;
    let root = config.audio_root()?;
    let entries = load_manifest(manifest).map_err(CliError::Corpus)?;
    let out = prepare_out_dir(config)?;

    let mut clips: Vec<PathBuf> = entries.iter().map(|e| e.audio_path.clone()).collect();
    clips.sort();
    clips.dedup();
    let master = config.selector.master_seed;

    let mut records = String::new();
    for (i, rel) in clips.iter().enumerate() {
        let source = if rel.is_absolute() { rel.clone() } else { root.join(rel) };
        let clip = augsel::audio::read_wav(&source).map_err(CliError::Corpus)?;
        let mut rng = seed::rng(master, &[domain::AUGMENT, i as u64]);
        let (distorted, record) = pooled(threads, || apply_chain(&clip, &policy, &mut rng))?
            .map_err(|e| CliError::Other(format!("{}: {e}", source.display())))?;
        let dest_rel = output_rel_path(rel);
        let dest = out.join(&dest_rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(CliError::other)?;
        }
        augsel::audio::write_wav_pcm16(&dest, &distorted).map_err(CliError::other)?;
        let line = json!({
            "clip_index": i,
            "source": rel,
            "output": dest_rel,
            "record": record,
        });
        records.push_str(&to_canonical_line(&line).map_err(CliError::other)?);
        records.push('\n');
    }
    write_file(&out.join("records.jsonl"), &records)?;

    let mirrored: Vec<AlignmentEntry> = entries
        .iter()
        .map(|e| AlignmentEntry {
            audio_path: output_rel_path(&e.audio_path),
            ..e.clone()
        })
        .collect();
    write_manifest(&out.join("manifest.csv"), &mirrored).map_err(CliError::other)?;
    let info = json!({ "config": config, "policy": policy, "clips": clips.len() });
    write_file(&out.join("augment_info.json"), &to_canonical_json(&info).map_err(CliError::other)?)?;
    print_json(&json!({ "clips": clips.len(), "out_dir": out }))
}

fn cmd_oracle(config: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    let (_, segments) = load_segments(config)?;
    let out = prepare_out_dir(config)?;
    let oracle_config = config.oracle_config();
    let report = pooled(threads, || run_oracle(&segments, &oracle_config))?.map_err(CliError::scoring)?;

    let doc = json!({ "config": config, "report": report });
    write_file(&out.join("oracle.json"), &to_canonical_json(&doc).map_err(CliError::other)?)?;
    let mut csv = Vec::new();
    write_oracle_csv(&mut csv, &report).map_err(CliError::other)?;
    fs::write(out.join("oracle.csv"), csv).map_err(CliError::other)?;

    let per_target: BTreeMap<usize, Option<f64>> =
        report.targets.iter().map(|t| (t.target_idx, t.spearman)).collect();
    print_json(&json!({
        "pooled_spearman": report.pooled_spearman,
        "spearman_per_target": per_target,
        "top_decile_mean_distance": report.top_decile_mean_distance,
        "bottom_decile_mean_distance": report.bottom_decile_mean_distance,
        "failed_targets": report.failed_targets.len(),
        "out_dir": out,
    }))
}

fn cmd_dump_segments(config: &RunConfig) -> Result<(), CliError> {
    let (_, segments) = load_segments(config)?;
    print_json(&json!({ "config": config }))?;
    let mut out = std::io::stdout().lock();
    dump_segments(&mut out, &segments).map_err(CliError::other)?;
    out.flush().map_err(CliError::other)
}

const FIXTURE_CONFIG: &str = r#"[paths]
manifest = "manifest.csv"
audio_root = "."

[selector]
num_policies = 8
views_per_sample = 4
num_classes = 3
master_seed = 2023
"#;

fn gen_fixture(out: &Path, kind: FixtureKind) -> Result<(), CliError> {
    let corpus = match kind {
        FixtureKind::Tiny => SyntheticCorpus::tiny(),
        FixtureKind::Isolated => SyntheticCorpus::isolated_words(20, 3, 2.0, 2023),
    }
    .map_err(CliError::other)?;
    fs::create_dir_all(out).map_err(CliError::other)?;
    let manifest = corpus.write(out).map_err(CliError::other)?;
    write_file(&out.join("run.toml"), FIXTURE_CONFIG)?;
    print_json(&json!({
        "clips": corpus.clips.len(),
        "manifest": manifest,
        "config": out.join("run.toml"),
    }))
}
