//! Runs extraction, selection and evaluation on the default synthetic
//! cohort with 100 splits, writing artifacts to `out/example`.

use smartchair::cli::{self, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::default();
    cfg.eval.n_splits = 100;
    cfg.out = "out/example".into();
    let out = cli::pipeline(&cfg)?;
    println!("AIC support: {:?}", out.selection.aic_support());
    println!("BIC support: {:?}", out.selection.bic_support());
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
