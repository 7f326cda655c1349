//! LASSO path with AIC/BIC model choice on a design where only the first
//! three of twelve predictors matter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smartchair::selection::{self, SelectionParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..12).map(|_| draw()).collect()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|x| x[0] - 0.5 * x[1] + 0.25 * x[2] + 0.3 * draw())
        .collect();
    let names: Vec<String> = (0..12).map(|j| format!("x{j}")).collect();

    let params = SelectionParams {
        max_support: None,
        ..SelectionParams::default()
    };
    let result = selection::run_selection(&rows, &y, &names, &params)?;
    println!("AIC support: {:?}", result.aic_support());
    println!("BIC support: {:?}", result.bic_support());
    print!("{}", result.report_csv());
    Ok(())
}
