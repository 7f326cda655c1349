//! LASSO regularization path with information-criterion model choice.
//!
//! The objective minimized for each α is
//!
//! ```text
//! (1 / 2n) ‖y − Xw‖² + α ‖w‖₁
//! ```
//!
//! on a z-scored design and centered target (so no intercept is needed).
//! Along a descending α grid each fit is scored with a Gaussian profile
//! likelihood,
//!
//! ```text
//! AIC = n ln(RSS/n) + 2k        BIC = n ln(RSS/n) + ln(n) k
//! ```
//!
//! where `k` counts non-zero coefficients. Constants common to every α are
//! dropped; they cannot move the argmin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients with magnitude at or below this count as zero.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("need at least 2 observations, got {0}")]
    TooFewRows(usize),
    #[error("design has no usable (non-constant) columns")]
    NoColumns,
    #[error("row {0} has the wrong number of columns")]
    Ragged(usize),
    #[error("target length {target} does not match {rows} rows")]
    TargetLength { rows: usize, target: usize },
    #[error("alpha must be finite and non-negative, got {0}")]
    BadAlpha(f64),
    #[error("alpha grid must be non-empty, positive and sorted descending")]
    BadGrid,
    #[error("coordinate descent did not converge at alpha={alpha} after {sweeps} sweeps (objective {objective})")]
    NoConvergence { alpha: f64, sweeps: usize, objective: f64 },
    #[error("every solution on the path interpolates the data (RSS = 0)")]
    AllDegenerate,
    #[error("no path entry has at most {0} features")]
    NoSupportWithinCap(usize),
}

/// Z-scored design (column-major) with a centered target.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    /// `columns[j][i]` is observation `i` of kept feature `j`.
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub y_mean: f64,
    /// Names of constant columns that were removed.
    pub dropped: Vec<String>,
}

impl StandardizedDesign {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// `max_j |x_jᵀ y| / n`: the smallest α giving an all-zero solution.
    pub fn alpha_max(&self) -> f64 {
        let n = self.n() as f64;
        self.columns
            .iter()
            .map(|c| dot(c, &self.y).abs() / n)
            .fold(0.0, f64::max)
    }

    /// Maps standardized coefficients back to raw feature units.
    pub fn raw_coefficients(&self, w: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = w.iter().zip(&self.stds).map(|(w, s)| w / s).collect();
        let intercept = self.y_mean - raw.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (raw, intercept)
    }

    /// `(1/2n)‖y − Xw‖² + α‖w‖₁`.
    pub fn objective(&self, w: &[f64], alpha: f64) -> f64 {
        let rss = self.rss(w);
        rss / (2.0 * self.n() as f64) + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn residual(&self, w: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (c, &wj) in self.columns.iter().zip(w) {
            if wj != 0.0 {
                for (ri, xi) in r.iter_mut().zip(c) {
                    *ri -= xi * wj;
                }
            }
        }
        r
    }

    pub fn rss(&self, w: &[f64]) -> f64 {
        self.residual(w).iter().map(|v| v * v).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Z-scores each column (sample std) and centers the target. Constant
/// columns are dropped with a warning.
pub fn standardize(rows: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<StandardizedDesign, SelectionError> {
    let n = rows.len();
    if n < 2 {
        return Err(SelectionError::TooFewRows(n));
    }
    if y.len() != n {
        return Err(SelectionError::TargetLength {
            rows: n,
            target: y.len(),
        });
    }
    let p = names.len();
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(SelectionError::Ragged(i));
    }

    let nf = n as f64;
    let mut design = StandardizedDesign {
        columns: Vec::new(),
        y: Vec::new(),
        names: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        y_mean: 0.0,
        dropped: Vec::new(),
    };
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let std = var.sqrt();
        if !(std > 0.0) || std <= 1e-12 * mean.abs() {
            log::warn!("dropping constant column {name}");
            design.dropped.push(name.clone());
            continue;
        }
        design.columns.push(col.iter().map(|v| (v - mean) / std).collect());
        design.names.push(name.clone());
        design.means.push(mean);
        design.stds.push(std);
    }
    if design.columns.is_empty() {
        return Err(SelectionError::NoColumns);
    }
    design.y_mean = y.iter().sum::<f64>() / nf;
    design.y = y.iter().map(|v| v - design.y_mean).collect();
    Ok(design)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdParams {
    /// Converged when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdParams {
    fn default() -> Self {
        CdParams {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub alpha: f64,
    pub w: Vec<f64>,
    pub rss: f64,
    /// Support size.
    pub k: usize,
    pub sweeps: usize,
    pub objective: f64,
}

impl LassoSolution {
    pub fn support(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&j| self.w[j].abs() > SUPPORT_EPS).collect()
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn lasso_fit(design: &StandardizedDesign, alpha: f64) -> Result<LassoSolution, SelectionError> {
    lasso_fit_from(design, alpha, &vec![0.0; design.p()], &CdParams::default())
}

/// Cyclic coordinate descent from a warm start.
pub fn lasso_fit_from(
    design: &StandardizedDesign,
    alpha: f64,
    init: &[f64],
    params: &CdParams,
) -> Result<LassoSolution, SelectionError> {
    lasso_fit_traced(design, alpha, init, params, None)
}

/// As [`lasso_fit_from`], optionally recording the objective after every sweep.
pub fn lasso_fit_traced(
    design: &StandardizedDesign,
    alpha: f64,
    init: &[f64],
    params: &CdParams,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LassoSolution, SelectionError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(SelectionError::BadAlpha(alpha));
    }
    assert_eq!(init.len(), design.p());
    let nf = design.n() as f64;
    let sq_norms: Vec<f64> = design.columns.iter().map(|c| dot(c, c) / nf).collect();
    let mut w = init.to_vec();
    let mut r = design.residual(&w);

    let mut sweeps = 0;
    loop {
        if sweeps >= params.max_sweeps {
            return Err(SelectionError::NoConvergence {
                alpha,
                sweeps,
                objective: design.objective(&w, alpha),
            });
        }
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for (j, col) in design.columns.iter().enumerate() {
            let old = w[j];
            let rho = dot(col, &r) / nf + sq_norms[j] * old;
            let new = soft_threshold(rho, alpha) / sq_norms[j];
            let delta = new - old;
            if delta != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col) {
                    *ri -= xi * delta;
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(design.objective(&w, alpha));
        }
        if max_delta < params.tol {
            break;
        }
    }

    let rss = design.rss(&w);
    let k = w.iter().filter(|v| v.abs() > SUPPORT_EPS).count();
    Ok(LassoSolution {
        alpha,
        objective: rss / (2.0 * nf) + alpha * w.iter().map(|v| v.abs()).sum::<f64>(),
        w,
        rss,
        k,
        sweeps,
    })
}

/// `n_points` α values spaced geometrically from α_max down to
/// `min_ratio · α_max`.
pub fn default_grid(design: &StandardizedDesign, n_points: usize, min_ratio: f64) -> Vec<f64> {
    geometric_grid(design.alpha_max(), n_points, min_ratio)
}

pub fn geometric_grid(alpha_max: f64, n_points: usize, min_ratio: f64) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![alpha_max],
        _ => (0..n_points)
            .map(|i| alpha_max * min_ratio.powf(i as f64 / (n_points - 1) as f64))
            .collect(),
    }
}

/// Fits every α of a descending grid, warm-starting from the previous fit.
pub fn lasso_path(design: &StandardizedDesign, grid: &[f64]) -> Result<Vec<LassoSolution>, SelectionError> {
    lasso_path_with(design, grid, &CdParams::default())
}

pub fn lasso_path_with(
    design: &StandardizedDesign,
    grid: &[f64],
    params: &CdParams,
) -> Result<Vec<LassoSolution>, SelectionError> {
    if grid.is_empty() || grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) || grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(SelectionError::BadGrid);
    }
    let mut warm = vec![0.0; design.p()];
    let mut path = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let sol = lasso_fit_from(design, alpha, &warm, params)?;
        warm.clone_from(&sol.w);
        path.push(sol);
    }
    Ok(path)
}

/// `n ln(rss/n) + 2k`; `-∞` when `rss = 0`.
pub fn aic(solution: &LassoSolution, n: usize) -> f64 {
    gaussian_fit_term(solution.rss, n) + 2.0 * solution.k as f64
}

/// `n ln(rss/n) + ln(n) k`; `-∞` when `rss = 0`.
pub fn bic(solution: &LassoSolution, n: usize) -> f64 {
    gaussian_fit_term(solution.rss, n) + (n as f64).ln() * solution.k as f64
}

fn gaussian_fit_term(rss: f64, n: usize) -> f64 {
    if rss <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = n as f64;
    n * (rss / n).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub name: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenModel {
    pub index: usize,
    pub alpha: f64,
    pub score: f64,
    pub features: Vec<SelectedFeature>,
}

impl ChosenModel {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supports {
    pub aic: ChosenModel,
    pub bic: ChosenModel,
    pub max_support: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub names: Vec<String>,
    pub n: usize,
    pub path: Vec<LassoSolution>,
    pub aic: Vec<f64>,
    pub bic: Vec<f64>,
    /// Path entries with `rss = 0`, excluded from the argmin.
    pub degenerate: Vec<bool>,
    pub supports: Supports,
}

impl SelectionResult {
    pub fn aic_support(&self) -> Vec<String> {
        self.supports.aic.names()
    }

    pub fn bic_support(&self) -> Vec<String> {
        self.supports.bic.names()
    }

    /// `alpha,aic,bic,k,<coefficient per feature>` per path entry.
    pub fn report_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["alpha", "aic", "bic", "k"].map(String::from).to_vec();
        header.extend(self.names.iter().cloned());
        w.write_record(&header).unwrap();
        for (i, sol) in self.path.iter().enumerate() {
            let mut rec = vec![
                sol.alpha.to_string(),
                self.aic[i].to_string(),
                self.bic[i].to_string(),
                sol.k.to_string(),
            ];
            rec.extend(sol.w.iter().map(|v| v.to_string()));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn supports_json(&self) -> String {
        serde_json::to_string_pretty(&self.supports).unwrap()
    }
}

fn argmin(scores: &[f64], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        // strict comparison keeps the earliest (largest α) entry on ties
        if best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks the AIC- and BIC-minimizing path entries. Ties go to the larger α.
/// With `max_support`, only entries with at most that many features compete.
pub fn select_features(
    design: &StandardizedDesign,
    path: Vec<LassoSolution>,
    max_support: Option<usize>,
) -> Result<SelectionResult, SelectionError> {
    if path.is_empty() {
        return Err(SelectionError::BadGrid);
    }
    let n = design.n();
    let aic_scores: Vec<f64> = path.iter().map(|s| aic(s, n)).collect();
    let bic_scores: Vec<f64> = path.iter().map(|s| bic(s, n)).collect();
    let degenerate: Vec<bool> = path.iter().map(|s| s.rss <= 0.0).collect();
    if degenerate.iter().all(|&d| d) {
        return Err(SelectionError::AllDegenerate);
    }
    let eligible = |i: usize| !degenerate[i] && max_support.is_none_or(|m| path[i].k <= m);

    let chosen = |scores: &[f64]| -> Result<ChosenModel, SelectionError> {
        let i = argmin(scores, eligible).ok_or(SelectionError::NoSupportWithinCap(max_support.unwrap_or(0)))?;
        let sol = &path[i];
        let mut features: Vec<SelectedFeature> = sol
            .support()
            .into_iter()
            .map(|j| SelectedFeature {
                name: design.names[j].clone(),
                coefficient: sol.w[j],
            })
            .collect();
        features.sort_by(|a, b| a.coefficient.total_cmp(&b.coefficient));
        Ok(ChosenModel {
            index: i,
            alpha: sol.alpha,
            score: scores[i],
            features,
        })
    };
    let supports = Supports {
        aic: chosen(&aic_scores)?,
        bic: chosen(&bic_scores)?,
        max_support,
    };
    Ok(SelectionResult {
        names: design.names.clone(),
        n,
        path,
        aic: aic_scores,
        bic: bic_scores,
        degenerate,
        supports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub grid_points: usize,
    pub min_ratio: f64,
    pub max_support: Option<usize>,
    pub cd: CdParams,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            grid_points: 100,
            min_ratio: 1e-3,
            max_support: Some(8),
            cd: CdParams::default(),
        }
    }
}

/// Standardize, fit the default path and choose supports in one call.
pub fn run_selection(
    rows: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    params: &SelectionParams,
) -> Result<SelectionResult, SelectionError> {
    let design = standardize(rows, y, names)?;
    let grid = default_grid(&design, params.grid_points, params.min_ratio);
    let path = lasso_path_with(&design, &grid, &params.cd)?;
    select_features(&design, path, params.max_support)
}
