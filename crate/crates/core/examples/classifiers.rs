//! Fits the five classifiers on two overlapping Gaussian classes and scores
//! them on a held-out sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smartchair::eval::{self, LOG_LOSS_EPS};
use smartchair::models::{self, ModelSpec};

fn sample(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let shift = if label { 1.0 } else { 0.0 };
            let row = (0..4)
                .map(|j| Distribution::<f64>::sample(&StandardNormal, &mut rng) + if j < 2 { shift } else { 0.0 })
                .collect();
            (row, label)
        })
        .unzip()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (x, y) = sample(1, 200);
    let (tx, ty) = sample(2, 200);
    for spec in ModelSpec::default_set() {
        let model = models::fit(&spec, &x, &y)?;
        let p = models::predict_proba(&model, &tx)?;
        println!(
            "{:<22} accuracy {:.3}  ROC AUC {:.3}  log loss {:.3}",
            spec.kind().display_name(),
            eval::accuracy(&ty, &p, 0.5)?,
            eval::roc_auc(&ty, &p)?,
            eval::log_loss(&ty, &p, LOG_LOSS_EPS)?
        );
        if let Ok(imp) = models::rf_feature_importance(&model) {
            println!("{:<22} importances {:.3?}", "", imp.values());
        }
    }
    Ok(())
}
