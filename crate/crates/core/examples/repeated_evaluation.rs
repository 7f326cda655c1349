//! Repeated player-level train/test evaluation on a reduced synthetic
//! cohort, with and without a label-permutation null.

use smartchair::cli;
use smartchair::eval::{self, EvalConfig};
use smartchair::models::ModelSpec;
use smartchair::synth::CohortConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = CohortConfig {
        n_high: 5,
        n_low: 5,
        duration: 1800.0,
        durations: Vec::new(),
        ..CohortConfig::default()
    };
    let matrix = cli::synthetic_features(&cohort, &Default::default(), &Default::default())?;
    let names: Vec<String> = ["med_gyro_x_std", "moving_gyro_x", "moving_death_gyro_x"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let matrix = matrix.select(&names)?;

    let config = EvalConfig {
        n_splits: 100,
        ..EvalConfig::default()
    };
    let report = eval::repeated_eval(&matrix, &ModelSpec::default_set(), &config)?;
    println!("{} sessions, {} splits", matrix.n_rows(), report.n_splits);
    print!("{}", report.to_csv());

    let null = EvalConfig {
        permutation_null: Some(1),
        ..config
    };
    let report = eval::repeated_eval(&matrix, &ModelSpec::default_set(), &null)?;
    println!("permuted labels:");
    print!("{}", report.to_csv());
    Ok(())
}
