//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two-pass sample standard deviation of every length-`w` window.
pub fn naive_rolling_std(x: &[f64], w: usize) -> Vec<f64> {
    if x.len() < w {
        return Vec::new();
    }
    (0..=x.len() - w)
        .map(|i| {
            let win = &x[i..i + w];
            let mean = win.iter().sum::<f64>() / w as f64;
            let ss: f64 = win.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (w as f64 - 1.0)).sqrt()
        })
        .collect()
}

/// Column-major design with z-scored columns (sample std) and centered y,
/// computed directly from the definitions.
pub struct Design {
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn objective(&self, w: &[f64], alpha: f64) -> f64 {
        let n = self.n();
        let rss: f64 = (0..n)
            .map(|i| {
                let fit: f64 = self.cols.iter().zip(w).map(|(c, wj)| c[i] * wj).sum();
                (self.y[i] - fit).powi(2)
            })
            .sum();
        rss / (2.0 * n as f64) + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest violation of the LASSO optimality conditions.
    pub fn kkt_residual(&self, w: &[f64], alpha: f64) -> f64 {
        let n = self.n();
        let r: Vec<f64> = (0..n)
            .map(|i| self.y[i] - self.cols.iter().zip(w).map(|(c, wj)| c[i] * wj).sum::<f64>())
            .collect();
        self.cols
            .iter()
            .zip(w)
            .map(|(c, &wj)| {
                let g = c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                if wj != 0.0 {
                    (g - alpha * wj.signum()).abs()
                } else {
                    (g.abs() - alpha).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn zscore(rows: &[Vec<f64>], y: &[f64]) -> Design {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let cols = (0..p)
        .map(|j| {
            let c: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = c.iter().sum::<f64>() / n;
            let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            c.iter().map(|v| (v - m) / s).collect()
        })
        .collect();
    let ym = y.iter().sum::<f64>() / n;
    Design {
        cols,
        y: y.iter().map(|v| v - ym).collect(),
    }
}

/// Exact LASSO minimum by enumerating all 3^p sign patterns and solving the
/// stationarity equations on each active set.
pub fn lasso_exhaustive(d: &Design, alpha: f64) -> (Vec<f64>, f64) {
    let p = d.cols.len();
    let n = d.n() as f64;
    let mut best = (vec![0.0; p], d.objective(&vec![0.0; p], alpha));
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        let mut signs = vec![0i8; p];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = (c % 3) as i8 - 1;
            c /= 3;
        }
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        if active.is_empty() {
            continue;
        }
        let k = active.len();
        let gram = DMatrix::from_fn(k, k, |a, b| {
            d.cols[active[a]]
                .iter()
                .zip(&d.cols[active[b]])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / n
        });
        let rhs = DVector::from_fn(k, |a, _| {
            d.cols[active[a]].iter().zip(&d.y).map(|(x, y)| x * y).sum::<f64>() / n - alpha * signs[active[a]] as f64
        });
        let Some(sol) = gram.lu().solve(&rhs) else { continue };
        if active.iter().enumerate().any(|(a, &j)| sol[a] * signs[j] as f64 <= 0.0) {
            continue;
        }
        let mut w = vec![0.0; p];
        for (a, &j) in active.iter().enumerate() {
            w[j] = sol[a];
        }
        let obj = d.objective(&w, alpha);
        if obj < best.1 {
            best = (w, obj);
        }
    }
    best
}

/// Ordinary least squares RSS on the columns in `subset` (intercept-free;
/// the design is centered).
pub fn ols_rss(d: &Design, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return d.y.iter().map(|v| v * v).sum();
    }
    let n = d.n();
    let x = DMatrix::from_fn(n, subset.len(), |i, a| d.cols[subset[a]][i]);
    let y = DVector::from_column_slice(&d.y);
    let beta = (x.transpose() * &x)
        .lu()
        .solve(&(x.transpose() * &y))
        .expect("full rank");
    (y - x * beta).norm_squared()
}

/// Best subset by an information criterion `n ln(rss/n) + penalty·k` over
/// all 2^p subsets.
pub fn best_subset(d: &Design, penalty: f64) -> Vec<usize> {
    let p = d.cols.len();
    let n = d.n() as f64;
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << p) {
        let subset: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
        let score = n * (ols_rss(d, &subset) / n).ln() + penalty * subset.len() as f64;
        if score < best.0 {
            best = (score, subset);
        }
    }
    best.1
}

/// Concordant-pair ROC AUC, ties counted as one half.
pub fn brute_auc(y: &[bool], p: &[f64]) -> f64 {
    let mut score = 0.0;
    let mut pairs = 0u64;
    for i in 0..y.len() {
        if !y[i] {
            continue;
        }
        for j in 0..y.len() {
            if y[j] {
                continue;
            }
            pairs += 1;
            if p[i] > p[j] {
                score += 1.0;
            } else if p[i] == p[j] {
                score += 0.5;
            }
        }
    }
    score / pairs as f64
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += h;
            b[j] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// The planted regression design: x ~ N(0, I), y = x₁ − 0.5·x₂ + 0.25·x₃ + ε.
pub fn planted_design(n: usize, p: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| normal(&mut r)).collect()).collect();
    let y = rows
        .iter()
        .map(|x| x[0] - 0.5 * x[1] + 0.25 * x[2] + sigma * normal(&mut r))
        .collect();
    (rows, y)
}

/// Random scores and labels with both classes present; every other case
/// draws scores from a small grid so ties are common.
pub fn random_scored(seed: u64, max_n: usize) -> (Vec<bool>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_n);
    let coarse = seed.is_multiple_of(2);
    let mut y: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
    y[0] = true;
    y[1] = false;
    let p = (0..n)
        .map(|_| {
            if coarse {
                r.gen_range(0..5) as f64 / 4.0
            } else {
                r.gen::<f64>()
            }
        })
        .collect();
    (y, p)
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}
