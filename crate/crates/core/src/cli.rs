//! Stage orchestration behind the `smartchair` binary.
//!
//! Stages communicate through files in the output directory:
//!
//! | stage      | reads                                 | writes |
//! |------------|---------------------------------------|--------|
//! | `extract`  | store + event logs + players, or a synthetic cohort | `features.csv`, `features_meta.json`, `correlations.csv` |
//! | `select`   | `features.csv`, `features_meta.json`  | `selection_report.csv`, `supports.json` |
//! | `evaluate` | features + `supports.json`            | `eval_report.json`, `eval_report.csv`, `importance.csv` |
//!
//! `pipeline` runs all three in order. Every subcommand also writes
//! `run_config.json`, the effective configuration after flag overrides.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{self, EvalConfig, EvalReport};
use crate::features::{self, FeatureMatrix, FeatureParams, FeatureVector};
use crate::gamelog::{self, PlayerMeta, SegmentParams, Session};
use crate::ingest::{self, StreamStore};
use crate::models::{self, ImportanceVector, ModelKind, ModelSpec};
use crate::selection::{self, SelectionParams, SelectionResult, Supports};
use crate::synth::{self, CohortConfig};

pub const FEATURES_CSV: &str = "features.csv";
pub const FEATURES_META: &str = "features_meta.json";
pub const CORRELATIONS_CSV: &str = "correlations.csv";
pub const SELECTION_CSV: &str = "selection_report.csv";
pub const SUPPORTS_JSON: &str = "supports.json";
pub const EVAL_JSON: &str = "eval_report.json";
pub const EVAL_CSV: &str = "eval_report.csv";
pub const IMPORTANCE_CSV: &str = "importance.csv";
pub const RUN_CONFIG: &str = "run_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    pub store: PathBuf,
    /// Directory of `<player_id>.csv` event logs.
    pub events: PathBuf,
    /// JSON array of player metadata.
    pub players: PathBuf,
}

impl Default for DataPaths {
    fn default() -> Self {
        DataPaths {
            store: PathBuf::from("data/store"),
            events: PathBuf::from("data/events"),
            players: PathBuf::from("data/players.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data: DataPaths,
    /// When set, sessions come from this generated cohort instead of the
    /// store.
    pub synthetic: Option<CohortConfig>,
    /// Label-permutation null: when set, player labels are shuffled once
    /// with this seed after extraction (so selection sees permuted labels)
    /// and shuffled afresh in every evaluation split.
    pub permute_labels: Option<u64>,
    pub segment: SegmentParams,
    pub features: FeatureParams,
    pub selection: SelectionParams,
    pub models: Vec<ModelSpec>,
    pub eval: EvalConfig,
    pub listen: String,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: DataPaths::default(),
            synthetic: Some(CohortConfig::default()),
            permute_labels: None,
            segment: SegmentParams::default(),
            features: FeatureParams::default(),
            selection: SelectionParams::default(),
            models: ModelSpec::default_set(),
            eval: EvalConfig::default(),
            listen: "127.0.0.1:8080".into(),
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.features.movement_multiplier > 0.0) {
            return Err("features.movement_multiplier must be positive".into());
        }
        if self.features.window < 2 {
            return Err("features.window must be at least 2".into());
        }
        if self.eval.n_splits == 0 {
            return Err("eval.n_splits must be at least 1".into());
        }
        if self.models.is_empty() {
            return Err("at least one model spec is required".into());
        }
        if let Some(c) = &self.synthetic {
            c.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// `--seed` replaces the evaluation master seed and the cohort seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.eval.master_seed = seed;
        if let Some(c) = &mut self.synthetic {
            c.seed = seed;
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap() + "\n"
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage_err(stage: &'static str) -> impl Fn(String) -> CliError {
    move |message| CliError::Stage { stage, message }
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let cfg = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(name = "smartchair", version, about = "Chair IMU telemetry analytics")]
pub struct Cli {
    /// JSON pipeline configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the evaluation master seed and the synthetic cohort seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the telemetry ingestion HTTP service.
    Serve {
        /// Listen address (overrides `listen` in the config).
        #[arg(long, value_name = "ADDR")]
        listen: Option<String>,
    },
    /// Import JSON-lines telemetry files into the store.
    Ingest {
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
    },
    /// Generate the synthetic cohort as files, or replay it to a server.
    Simulate {
        /// Base URL of a running ingestion service.
        #[arg(long, value_name = "URL")]
        replay: Option<String>,
    },
    /// Segment sessions and write the feature and correlation matrices.
    Extract,
    /// Fit the LASSO path and choose AIC/BIC supports.
    Select,
    /// Repeated player-level evaluation on the AIC support.
    Evaluate,
    /// extract, select and evaluate in sequence.
    Pipeline,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 2 on usage errors and 1
/// when a stage fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) => 2,
                CliError::Stage { .. } => 1,
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Serve { listen } => serve(&cfg, listen.as_deref()),
        Command::Ingest { files } => ingest_files(&cfg, files),
        Command::Simulate { replay } => simulate(&cfg, replay.as_deref()),
        Command::Extract => {
            write_run_config(&cfg, "extract")?;
            extract(&cfg).map(drop)
        }
        Command::Select => {
            write_run_config(&cfg, "select")?;
            let m = read_features(&cfg.out)?;
            select(&cfg, &m).map(drop)
        }
        Command::Evaluate => {
            write_run_config(&cfg, "evaluate")?;
            let m = read_features(&cfg.out)?;
            let supports = read_supports(&cfg.out)?;
            evaluate(&cfg, &m, &supports).map(drop)
        }
        Command::Pipeline => pipeline(&cfg).map(drop),
    })
}

fn io_err<'a>(stage: &'static str, path: &'a Path) -> impl Fn(std::io::Error) -> CliError + 'a {
    move |e| CliError::Stage {
        stage,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_file(stage: &'static str, path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(stage, path))
}

fn write_run_config(cfg: &PipelineConfig, stage: &'static str) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(io_err(stage, &cfg.out))?;
    write_file(stage, &cfg.out.join(RUN_CONFIG), &cfg.to_json())
}

fn serve(cfg: &PipelineConfig, listen: Option<&str>) -> Result<(), CliError> {
    let err = stage_err("serve");
    let addr: SocketAddr = listen
        .unwrap_or(&cfg.listen)
        .parse()
        .map_err(|e| CliError::Config(format!("listen address: {e}")))?;
    let store = StreamStore::open(&cfg.data.store).map_err(|e| err(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| err(e.to_string()))?;
    rt.block_on(ingest::serve(Arc::new(store), addr))
        .map_err(|e| err(e.to_string()))
}

fn ingest_files(cfg: &PipelineConfig, files: &[PathBuf]) -> Result<(), CliError> {
    let err = stage_err("ingest");
    let store = StreamStore::open(&cfg.data.store).map_err(|e| err(e.to_string()))?;
    for f in files {
        let acks = ingest::ingest_jsonl(&store, f).map_err(|e| err(e.to_string()))?;
        let accepted: usize = acks.iter().map(|a| a.accepted).sum();
        let duplicates = acks.iter().filter(|a| a.duplicate).count();
        println!(
            "{}: {} batches, {accepted} samples accepted, {duplicates} duplicate batches",
            f.display(),
            acks.len()
        );
    }
    Ok(())
}

fn simulate(cfg: &PipelineConfig, replay: Option<&str>) -> Result<(), CliError> {
    let err = stage_err("simulate");
    let cohort_cfg = cfg.synthetic.clone().unwrap_or_default();
    let cohort = synth::generate_cohort(&cohort_cfg).map_err(|e| err(e.to_string()))?;
    match replay {
        Some(url) => {
            let s = synth::replay_cohort(&cohort, url).map_err(|e| err(e.to_string()))?;
            println!(
                "posted {} batches: {} samples accepted, {} duplicate batches",
                s.batches, s.accepted, s.duplicates
            );
        }
        None => {
            synth::write_cohort(&cohort, &cfg.out).map_err(io_err("simulate", &cfg.out))?;
            write_file(
                "simulate",
                &cfg.out.join("cohort_config.json"),
                &(serde_json::to_string_pretty(&cohort_cfg).unwrap() + "\n"),
            )?;
            println!("wrote {} players to {}", cohort.players.len(), cfg.out.display());
        }
    }
    Ok(())
}

/// Sessions of every player in the store, players in id order.
pub fn load_store_sessions(cfg: &PipelineConfig) -> Result<Vec<Session>, CliError> {
    let err = stage_err("extract");
    let store = StreamStore::open(&cfg.data.store).map_err(|e| err(e.to_string()))?;
    let ids = store.player_ids();
    if ids.is_empty() {
        return Err(err(format!("no sessions: store {} is empty", cfg.data.store.display())));
    }
    let meta_text = fs::read_to_string(&cfg.data.players).map_err(io_err("extract", &cfg.data.players))?;
    let metas = gamelog::parse_player_meta(&meta_text).map_err(|e| err(e.to_string()))?;
    let mut sessions = Vec::new();
    for id in ids {
        let meta: &PlayerMeta = metas
            .iter()
            .find(|m| m.player_id == id)
            .ok_or_else(|| err(format!("player {id} has no metadata entry")))?;
        let stream = store.load_stream(&id).map_err(|e| err(e.to_string()))?;
        let path = cfg.data.events.join(format!("{id}.csv"));
        let events = match fs::read_to_string(&path) {
            Ok(text) => gamelog::parse_event_log(&text).map_err(|e| err(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                log::warn!("no event log for {id}; using an empty one");
                Vec::new()
            }
            Err(e) => return Err(io_err("extract", &path)(e)),
        };
        let shootouts = gamelog::shootouts_from_events(&events);
        sessions.extend(gamelog::segment_sessions(
            &stream,
            &events,
            &shootouts,
            meta,
            &cfg.segment,
        ));
    }
    Ok(sessions)
}

/// Generates each player, extracts its session features and drops the raw
/// telemetry before moving on.
pub fn synthetic_features(
    cohort: &CohortConfig,
    segment: &SegmentParams,
    params: &FeatureParams,
) -> Result<FeatureMatrix, CliError> {
    let err = stage_err("extract");
    let per_player: Vec<Vec<FeatureVector>> = (0..cohort.n_players())
        .into_par_iter()
        .map(|i| {
            let player = synth::generate_player(cohort, i).map_err(|e| err(e.to_string()))?;
            player
                .sessions(segment)
                .iter()
                .map(|s| features::extract_features(s, params).map_err(|e| err(e.to_string())))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(features::from_vectors(per_player.into_iter().flatten().collect()))
}

/// Builds the feature matrix and writes it with its correlation matrix.
pub fn extract(cfg: &PipelineConfig) -> Result<FeatureMatrix, CliError> {
    let err = stage_err("extract");
    let mut matrix = match &cfg.synthetic {
        Some(cohort) => synthetic_features(cohort, &cfg.segment, &cfg.features)?,
        None => {
            let sessions = load_store_sessions(cfg)?;
            features::build_feature_matrix(&sessions, &cfg.features).map_err(|e| err(e.to_string()))?
        }
    };
    if matrix.n_rows() == 0 {
        return Err(err("no sessions: no stream covers a full session".into()));
    }
    if let Some(seed) = cfg.permute_labels {
        matrix = eval::permute_player_labels(&matrix, seed).map_err(|e| err(e.to_string()))?;
    }
    let corr = features::correlation_matrix(&matrix, true).map_err(|e| err(e.to_string()))?;
    fs::create_dir_all(&cfg.out).map_err(io_err("extract", &cfg.out))?;
    write_file("extract", &cfg.out.join(FEATURES_CSV), &matrix.to_csv())?;
    write_file("extract", &cfg.out.join(FEATURES_META), &matrix.meta_json())?;
    write_file("extract", &cfg.out.join(CORRELATIONS_CSV), &corr.to_csv())?;
    log::info!("extracted {} sessions × {} features", matrix.n_rows(), matrix.n_cols());
    Ok(matrix)
}

pub fn read_features(dir: &Path) -> Result<FeatureMatrix, CliError> {
    FeatureMatrix::read(&dir.join(FEATURES_CSV), &dir.join(FEATURES_META)).map_err(|e| CliError::Stage {
        stage: "load features",
        message: format!("{}: {e}", dir.display()),
    })
}

pub fn read_supports(dir: &Path) -> Result<Supports, CliError> {
    let path = dir.join(SUPPORTS_JSON);
    let text = fs::read_to_string(&path).map_err(io_err("evaluate", &path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Stage {
        stage: "evaluate",
        message: format!("{}: {e}", path.display()),
    })
}

/// LASSO path with the 0/1 label as regression target.
pub fn select(cfg: &PipelineConfig, matrix: &FeatureMatrix) -> Result<SelectionResult, CliError> {
    let err = stage_err("select");
    let y: Vec<f64> = matrix.labels().iter().map(|&l| l as u8 as f64).collect();
    let result =
        selection::run_selection(&matrix.rows, &y, &matrix.names, &cfg.selection).map_err(|e| err(e.to_string()))?;
    fs::create_dir_all(&cfg.out).map_err(io_err("select", &cfg.out))?;
    write_file("select", &cfg.out.join(SELECTION_CSV), &result.report_csv())?;
    write_file("select", &cfg.out.join(SUPPORTS_JSON), &(result.supports_json() + "\n"))?;
    log::info!(
        "AIC support {:?}, BIC support {:?}",
        result.aic_support(),
        result.bic_support()
    );
    Ok(result)
}

pub struct Evaluation {
    pub report: EvalReport,
    pub importance: ImportanceVector,
}

/// Repeated evaluation on the AIC-selected columns, plus random-forest
/// importances from a fit on every session.
pub fn evaluate(cfg: &PipelineConfig, matrix: &FeatureMatrix, supports: &Supports) -> Result<Evaluation, CliError> {
    let err = stage_err("evaluate");
    let names = supports.aic.names();
    if names.is_empty() {
        return Err(err("AIC support is empty".into()));
    }
    let subset = matrix.select(&names).map_err(|e| err(e.to_string()))?;
    let mut eval_cfg = cfg.eval;
    if cfg.permute_labels.is_some() && eval_cfg.permutation_null.is_none() {
        eval_cfg.permutation_null = cfg.permute_labels;
    }
    let report = eval::repeated_eval(&subset, &cfg.models, &eval_cfg).map_err(|e| err(e.to_string()))?;

    let forest = cfg
        .models
        .iter()
        .find(|s| s.kind() == ModelKind::RandomForest)
        .cloned()
        .unwrap_or_else(ModelSpec::random_forest);
    let forest = forest.with_seed(forest.seed ^ cfg.eval.master_seed);
    let fitted = models::fit(&forest, &subset.rows, &subset.labels()).map_err(|e| err(e.to_string()))?;
    let importance = models::rf_feature_importance(&fitted).map_err(|e| err(e.to_string()))?;

    fs::create_dir_all(&cfg.out).map_err(io_err("evaluate", &cfg.out))?;
    write_file("evaluate", &cfg.out.join(EVAL_JSON), &(report.to_json() + "\n"))?;
    write_file("evaluate", &cfg.out.join(EVAL_CSV), &report.to_csv())?;
    write_file(
        "evaluate",
        &cfg.out.join(IMPORTANCE_CSV),
        &importance.to_csv(&subset.names),
    )?;
    Ok(Evaluation { report, importance })
}

pub struct PipelineOutput {
    pub matrix: FeatureMatrix,
    pub selection: SelectionResult,
    pub evaluation: Evaluation,
}

pub fn pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, CliError> {
    write_run_config(cfg, "pipeline")?;
    let matrix = extract(cfg)?;
    let selection = select(cfg, &matrix)?;
    let evaluation = evaluate(cfg, &matrix, &selection.supports)?;
    for m in &evaluation.report.models {
        println!(
            "{:<22} accuracy {:.3}  ROC AUC {:.3}  log loss {:.3}",
            m.name, m.mean_accuracy, m.mean_roc_auc, m.mean_log_loss
        );
    }
    Ok(PipelineOutput {
        matrix,
        selection,
        evaluation,
    })
}
