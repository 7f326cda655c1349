use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ModelError, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    /// L2 penalty on the weights (the intercept is not penalized).
    pub lambda: f64,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            lambda: 1e-4,
            grad_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticRegression {
    /// Penalized mean negative log-likelihood and its gradient.
    ///
    /// `theta = [w_1..w_p, b]`; the loss is
    /// `mean(softplus(z) − y z) + λ/2 ‖w‖²` with `z = w·x + b`.
    pub fn objective_and_gradient(theta: &[f64], x: &[Vec<f64>], y: &[bool], lambda: f64) -> (f64, Vec<f64>) {
        let p = theta.len() - 1;
        let n = x.len() as f64;
        let (w, b) = (&theta[..p], theta[p]);
        let mut loss = 0.0;
        let mut grad = vec![0.0; p + 1];
        for (row, &label) in x.iter().zip(y) {
            let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            let t = label as u8 as f64;
            loss += softplus(z) - t * z;
            let r = sigmoid(z) - t;
            for j in 0..p {
                grad[j] += r * row[j];
            }
            grad[p] += r;
        }
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        for j in 0..p {
            loss += 0.5 * lambda * w[j] * w[j];
            grad[j] += lambda * w[j];
        }
        (loss, grad)
    }

    /// Damped Newton iterations with backtracking on the penalized loss.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &LogRegParams) -> Result<Self, ModelError> {
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let p = scaler.n_features();
        let n = xs.len() as f64;
        let mut theta = vec![0.0; p + 1];
        let (mut loss, mut grad) = Self::objective_and_gradient(&theta, &xs, y, params.lambda);

        for iter in 0..params.max_iter {
            if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < params.grad_tol {
                return Ok(LogisticRegression {
                    scaler,
                    intercept: theta[p],
                    weights: theta[..p].to_vec(),
                    iterations: iter,
                });
            }
            // Hessian of the penalized loss
            let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
            for row in &xs {
                let z = theta[p] + row.iter().zip(&theta[..p]).map(|(a, c)| a * c).sum::<f64>();
                let s = sigmoid(z);
                let wgt = s * (1.0 - s) / n;
                for a in 0..=p {
                    let xa = if a < p { row[a] } else { 1.0 };
                    for c in a..=p {
                        let xc = if c < p { row[c] } else { 1.0 };
                        h[(a, c)] += wgt * xa * xc;
                    }
                }
            }
            for a in 0..=p {
                for c in 0..a {
                    h[(a, c)] = h[(c, a)];
                }
            }
            for j in 0..p {
                h[(j, j)] += params.lambda;
            }
            h[(p, p)] += 1e-12;
            let g = DVector::from_column_slice(&grad);
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => g.clone(),
            };

            let mut t = 1.0;
            let slope: f64 = g.dot(&step);
            loop {
                let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
                let (l2, g2) = Self::objective_and_gradient(&cand, &xs, y, params.lambda);
                if l2 <= loss - 1e-4 * t * slope || t < 1e-10 {
                    theta = cand;
                    loss = l2;
                    grad = g2;
                    break;
                }
                t *= 0.5;
            }
        }
        Err(ModelError::NoConvergence {
            model: "logistic regression",
            iterations: params.max_iter,
        })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let z = self.scaler.transform_row(row);
        self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_half() {
        let m = LogisticRegression {
            scaler: Standardizer {
                means: vec![0.0, 0.0],
                stds: vec![1.0, 1.0],
            },
            weights: vec![0.0, 0.0],
            intercept: 0.0,
            iterations: 0,
        };
        assert_eq!(m.proba(&[3.0, -7.0]), 0.5);
        assert_eq!(m.proba(&[0.0, 0.0]), 0.5);
    }

    #[test]
    fn separable_data_converges() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..12).map(|i| i >= 6).collect();
        let m = LogisticRegression::fit(&x, &y, &LogRegParams::default()).unwrap();
        assert!(m.proba(&[11.0]) > 0.99);
        assert!(m.proba(&[0.0]) < 0.01);
        let theta: Vec<f64> = m.weights.iter().copied().chain([m.intercept]).collect();
        let xs = m.scaler.transform(&x);
        let (_, g) = LogisticRegression::objective_and_gradient(&theta, &xs, &y, 1e-4);
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
