//! C-SVM with an RBF kernel, trained by SMO with second-order working-set
//! selection. Probabilities come from a Platt sigmoid fitted to
//! out-of-fold decision values.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::logreg::sigmoid;
use super::{ModelError, Standardizer};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Stop when the maximal KKT violation `m(α) − M(α)` is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel width; `None` uses `1 / (p · mean feature variance)` on the
    /// standardized training features.
    pub gamma: Option<f64>,
    pub platt_folds: usize,
    pub smo: SmoParams,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            platt_folds: 5,
            smo: SmoParams::default(),
        }
    }
}

/// `P(y = 1 | f) = 1 / (1 + exp(a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattSigmoid {
    pub a: f64,
    pub b: f64,
}

impl PlattSigmoid {
    pub fn proba(&self, f: f64) -> f64 {
        sigmoid(-(self.a * f + self.b))
    }

    /// Newton fit with Platt's smoothed targets.
    pub fn fit(decisions: &[f64], labels: &[bool]) -> PlattSigmoid {
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

        let objective = |a: f64, b: f64| -> f64 {
            decisions
                .iter()
                .zip(&t)
                .map(|(&f, &ti)| {
                    let z = f * a + b;
                    if z >= 0.0 {
                        ti * z + (-z).exp().ln_1p()
                    } else {
                        (ti - 1.0) * z + z.exp().ln_1p()
                    }
                })
                .sum()
        };

        let (mut a, mut b) = (0.0, ((n_neg + 1.0) / (n_pos + 1.0)).ln());
        let mut fval = objective(a, b);
        let sigma = 1e-12;
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (&f, &ti) in decisions.iter().zip(&t) {
                let z = f * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = ti - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            let mut moved = false;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    moved = true;
                    break;
                }
                step /= 2.0;
            }
            if !moved {
                break;
            }
        }
        PlattSigmoid { a, b }
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-gamma * d2).exp()
}

/// Result of one SMO solve on already-scaled data.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoOutcome {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Final `m(α) − M(α)`.
    pub kkt_gap: f64,
    /// Dual objective `Σα − ½ αᵀQα` after each iteration, when traced.
    pub dual_trace: Vec<f64>,
}

/// Solves `min ½ αᵀQα − eᵀα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0` with
/// `Q_ij = y_i y_j K(x_i, x_j)`.
pub fn smo(
    x: &[Vec<f64>],
    y: &[bool],
    c: f64,
    gamma: f64,
    params: &SmoParams,
    trace: bool,
) -> Result<SmoOutcome, ModelError> {
    let n = x.len();
    let ys: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let tau = 1e-12;
    let mut dual_trace = Vec::new();

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let kkt_gap = loop {
        // first index: maximal violating candidate from I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                    if a <= 0.0 {
                        a = tau;
                    }
                    let score = -(b * b) / a;
                    if score < best {
                        best = score;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let gap = gmax - gmin;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= params.tol => (i, j),
            _ => break gap.max(0.0),
        };
        if iterations >= params.max_iter {
            return Err(ModelError::NoConvergence {
                model: "SMO",
                iterations,
            });
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if quad <= 0.0 {
            quad = tau;
        }
        if ys[i] != ys[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            } else if diff <= 0.0 && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            } else if sum <= c && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            } else if sum <= c && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
        if trace {
            // Σα − ½αᵀQα = −½ Σ α_t (G_t − 1)
            let dual: f64 = alpha.iter().zip(&grad).map(|(a, g)| -0.5 * a * (g - 1.0)).sum();
            dual_trace.push(dual);
        }
    };

    // offset: average over free vectors, else midpoint of the feasible range
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    Ok(SmoOutcome {
        alpha,
        rho,
        iterations,
        kkt_gap,
        dual_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub scaler: Standardizer,
    pub gamma: f64,
    pub c: f64,
    /// Scaled support vectors with their signed dual weights `α_i y_i`.
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub platt: PlattSigmoid,
    pub kkt_gap: f64,
}

struct RawSvm {
    sv: Vec<Vec<f64>>,
    coef: Vec<f64>,
    rho: f64,
    kkt_gap: f64,
}

impl RawSvm {
    fn train(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64, smo_params: &SmoParams) -> Result<Self, ModelError> {
        let out = smo(x, y, c, gamma, smo_params, false)?;
        let mut sv = Vec::new();
        let mut coef = Vec::new();
        for (i, &a) in out.alpha.iter().enumerate() {
            if a > 0.0 {
                sv.push(x[i].clone());
                coef.push(if y[i] { a } else { -a });
            }
        }
        Ok(RawSvm {
            sv,
            coef,
            rho: out.rho,
            kkt_gap: out.kkt_gap,
        })
    }

    fn decision(&self, z: &[f64], gamma: f64) -> f64 {
        self.sv
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, z, gamma))
            .sum::<f64>()
            - self.rho
    }
}

impl SvmModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &SvmParams, seed: u64) -> Result<Self, ModelError> {
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let p = scaler.n_features();
        let gamma = params.gamma.unwrap_or_else(|| {
            let n = xs.len() as f64;
            let mean_var = (0..p)
                .map(|j| {
                    let m = xs.iter().map(|r| r[j]).sum::<f64>() / n;
                    xs.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n
                })
                .sum::<f64>()
                / p as f64;
            if mean_var > 0.0 {
                1.0 / (p as f64 * mean_var)
            } else {
                1.0 / p as f64
            }
        });

        let full = RawSvm::train(&xs, y, params.c, gamma, &params.smo)?;
        let decisions = Self::out_of_fold(&xs, y, params, gamma, seed)?
            .unwrap_or_else(|| xs.iter().map(|r| full.decision(r, gamma)).collect());
        let platt = PlattSigmoid::fit(&decisions, y);

        Ok(SvmModel {
            scaler,
            gamma,
            c: params.c,
            support_vectors: full.sv,
            dual_coef: full.coef,
            rho: full.rho,
            platt,
            kkt_gap: full.kkt_gap,
        })
    }

    /// Decision values for each training row from a model that did not see
    /// it. `None` when the data cannot support the requested folds with both
    /// classes in every training part.
    fn out_of_fold(
        xs: &[Vec<f64>],
        y: &[bool],
        params: &SvmParams,
        gamma: f64,
        seed: u64,
    ) -> Result<Option<Vec<f64>>, ModelError> {
        let n = xs.len();
        let folds = params.platt_folds;
        if folds < 2 || n < 2 * folds {
            return Ok(None);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::seeded(seed));
        let mut out = vec![0.0; n];
        for f in 0..folds {
            let held: Vec<usize> = order.iter().copied().skip(f).step_by(folds).collect();
            let mut is_held = vec![false; n];
            held.iter().for_each(|&i| is_held[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
            let tx: Vec<Vec<f64>> = train_idx.iter().map(|&i| xs[i].clone()).collect();
            let ty: Vec<bool> = train_idx.iter().map(|&i| y[i]).collect();
            if ty.iter().all(|&v| v) || ty.iter().all(|&v| !v) {
                return Ok(None);
            }
            let m = RawSvm::train(&tx, &ty, params.c, gamma, &params.smo)?;
            for &i in &held {
                out[i] = m.decision(&xs[i], gamma);
            }
        }
        Ok(Some(out))
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let z = self.scaler.transform_row(row);
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(s, c)| c * rbf(s, &z, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        self.platt.proba(self.decision(row))
    }
}
