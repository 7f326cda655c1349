mod common;

use proptest::prelude::*;
use rand::Rng;
use smartchair::selection::{self, SelectionParams};

use common::*;

fn problem(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let p = r.gen_range(1..=5);
    let n = r.gen_range(p + 3..=40);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| normal(&mut r)).collect()).collect();
    let y = rows.iter().map(|x| 0.8 * x[0] + normal(&mut r)).collect();
    (rows, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_solutions_satisfy_kkt(seed in any::<u64>()) {
        let (rows, y) = problem(seed);
        let p = rows[0].len();
        let design = selection::standardize(&rows, &y, &names(p)).unwrap();
        let oracle = zscore(&rows, &y);
        let grid = selection::default_grid(&design, 20, 1e-3);
        let path = selection::lasso_path(&design, &grid).unwrap();
        for sol in &path {
            prop_assert!(oracle.kkt_residual(&sol.w, sol.alpha) <= 1e-6);
        }
        prop_assert!(path[0].w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_start_reaches_same_minimum(seed in any::<u64>(), frac in 0.001f64..0.9) {
        let (rows, y) = problem(seed);
        let p = rows[0].len();
        let design = selection::standardize(&rows, &y, &names(p)).unwrap();
        let alpha = frac * design.alpha_max();
        let cold = selection::lasso_fit(&design, alpha).unwrap();
        let start: Vec<f64> = (0..p).map(|j| j as f64 - 1.0).collect();
        let warm = selection::lasso_fit_from(&design, alpha, &start, &Default::default()).unwrap();
        let (a, b) = (design.objective(&cold.w, alpha), design.objective(&warm.w, alpha));
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-12));
    }

    #[test]
    fn selected_support_is_capped(seed in any::<u64>(), cap in 1usize..4) {
        let (rows, y) = problem(seed);
        let p = rows[0].len();
        let params = SelectionParams { max_support: Some(cap), ..Default::default() };
        let result = selection::run_selection(&rows, &y, &names(p), &params).unwrap();
        prop_assert!(result.aic_support().len() <= cap);
        prop_assert!(result.bic_support().len() <= cap);
    }
}

#[test]
fn planted_supports_across_seeds() {
    for seed in 0..5 {
        let (rows, y) = planted_design(200, 8, 0.3, seed);
        let params = SelectionParams {
            max_support: None,
            ..Default::default()
        };
        let result = selection::run_selection(&rows, &y, &names(8), &params).unwrap();
        let aic = result.aic_support();
        let bic = result.bic_support();
        let oracle = best_subset(&zscore(&rows, &y), 200f64.ln());
        assert!(
            oracle.iter().take(3).eq([0, 1, 2].iter()),
            "seed {seed}: oracle {oracle:?}"
        );
        for name in names(3) {
            assert!(
                aic.contains(&name) && bic.contains(&name),
                "seed {seed}: {aic:?} {bic:?}"
            );
        }
        assert!(bic.iter().all(|f| aic.contains(f)), "seed {seed}: {bic:?} ⊄ {aic:?}");
    }
}
