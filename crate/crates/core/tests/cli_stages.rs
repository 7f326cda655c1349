use std::fs;
use std::path::Path;

use smartchair::cli::{self, DataPaths, PipelineConfig};
use smartchair::synth::CohortConfig;

fn small_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        synthetic: Some(CohortConfig {
            n_high: 3,
            n_low: 3,
            duration: 540.0,
            durations: Vec::new(),
            ..CohortConfig::default()
        }),
        out: out.to_path_buf(),
        ..PipelineConfig::default()
    };
    cfg.eval.n_splits = 12;
    cfg
}

fn write_config(cfg: &PipelineConfig, path: &Path) -> String {
    fs::write(path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("smartchair").chain(args.iter().copied()))
}

const OUTPUTS: [&str; 6] = [
    cli::FEATURES_CSV,
    cli::FEATURES_META,
    cli::SELECTION_CSV,
    cli::SUPPORTS_JSON,
    cli::EVAL_JSON,
    cli::IMPORTANCE_CSV,
];

#[test]
fn stages_compose_to_pipeline_and_rerun_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let staged = tmp.path().join("staged");
    let whole = tmp.path().join("whole");
    let again = tmp.path().join("again");

    let c1 = write_config(&small_config(&staged), &tmp.path().join("a.json"));
    for stage in ["extract", "select", "evaluate"] {
        assert_eq!(run(&["--config", &c1, stage]), 0, "{stage}");
    }
    let c2 = write_config(&small_config(&whole), &tmp.path().join("b.json"));
    assert_eq!(run(&["--config", &c2, "--threads", "1", "pipeline"]), 0);
    let c3 = write_config(&small_config(&again), &tmp.path().join("c.json"));
    assert_eq!(run(&["--config", &c3, "--threads", "3", "pipeline"]), 0);

    for name in OUTPUTS {
        let a = fs::read(staged.join(name)).unwrap();
        assert_eq!(a, fs::read(whole.join(name)).unwrap(), "{name}");
        assert_eq!(a, fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn simulate_ingest_extract_matches_in_memory_cohort() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let cfg = small_config(&sim);
    let c = write_config(&cfg, &tmp.path().join("sim.json"));
    assert_eq!(run(&["--config", &c, "simulate"]), 0);

    let mut from_store = small_config(&tmp.path().join("store_out"));
    from_store.synthetic = None;
    from_store.data = DataPaths {
        store: tmp.path().join("store"),
        events: sim.join("events"),
        players: sim.join("players.json"),
    };
    let c = write_config(&from_store, &tmp.path().join("store.json"));
    let mut files: Vec<String> = fs::read_dir(sim.join("telemetry"))
        .unwrap()
        .map(|e| e.unwrap().path().to_str().unwrap().to_string())
        .collect();
    files.sort();
    let mut args = vec!["--config", c.as_str(), "ingest"];
    args.extend(files.iter().map(String::as_str));
    assert_eq!(run(&args), 0);
    assert_eq!(run(&["--config", &c, "extract"]), 0);

    let stored = cli::read_features(&from_store.out).unwrap();
    let direct = cli::synthetic_features(cfg.synthetic.as_ref().unwrap(), &cfg.segment, &cfg.features).unwrap();
    assert_eq!(stored.n_rows(), 18);
    assert_eq!(stored, direct);
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("out"));
    cfg.synthetic = None;
    cfg.data.store = tmp.path().join("empty_store");
    let c = write_config(&cfg, &tmp.path().join("empty.json"));
    assert_eq!(run(&["--config", &c, "extract"]), 1);
    assert_eq!(run(&["--config", &c, "evaluate"]), 1);

    fs::write(tmp.path().join("bad.json"), "{\"eval\": {\"n_splits\": 0}}").unwrap();
    let bad = tmp.path().join("bad.json");
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "extract"]), 2);
    assert_eq!(run(&["--config", "/nonexistent/config.json", "extract"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
}
