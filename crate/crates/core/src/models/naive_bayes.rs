use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    /// Per-feature variances are floored at this multiple of the mean
    /// feature variance.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_smoothing: 1e-9 }
    }
}

/// Gaussian naive Bayes; index 0 is class 0, index 1 is class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &NbParams) -> Self {
        let p = x[0].len();
        let n = x.len() as f64;

        let overall_var = {
            let mut total = 0.0;
            for j in 0..p {
                let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
                total += x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            }
            total / p as f64
        };
        let floor = if overall_var > 0.0 {
            params.var_smoothing * overall_var
        } else {
            params.var_smoothing
        };

        let stats = |class: bool| {
            let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == class).map(|(r, _)| r).collect();
            let k = rows.len() as f64;
            let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect();
            let vars: Vec<f64> = (0..p)
                .map(|j| {
                    let v = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / k;
                    v.max(floor)
                })
                .collect();
            (k / n, means, vars)
        };
        let (p0, m0, v0) = stats(false);
        let (p1, m1, v1) = stats(true);
        GaussianNb {
            priors: [p0, p1],
            means: [m0, m1],
            vars: [v0, v1],
        }
    }

    /// Builds a model from known class parameters.
    pub fn from_params(priors: [f64; 2], means: [Vec<f64>; 2], vars: [Vec<f64>; 2]) -> Self {
        GaussianNb { priors, means, vars }
    }

    fn log_joint(&self, class: usize, row: &[f64]) -> f64 {
        let mut lp = self.priors[class].ln();
        for ((v, m), s2) in row.iter().zip(&self.means[class]).zip(&self.vars[class]) {
            lp -= 0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m).powi(2) / s2);
        }
        lp
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        let l0 = self.log_joint(0, row);
        let l1 = self.log_joint(1, row);
        // 1 / (1 + exp(l0 − l1))
        let d = l0 - l1;
        if d > 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_posterior() {
        let x = vec![vec![-1.1], vec![-0.9], vec![0.9], vec![1.1]];
        let y = vec![false, false, true, true];
        let m = GaussianNb::fit(&x, &y, &NbParams::default());
        assert!((m.proba(&[0.0]) - 0.5).abs() < 1e-12);
        assert!(m.proba(&[1.0]) > 0.99);
    }

    #[test]
    fn closed_form_midpoint() {
        let m = GaussianNb::from_params([0.5, 0.5], [vec![0.0], vec![2.0]], [vec![1.0], vec![1.0]]);
        assert!((m.proba(&[1.0]) - 0.5).abs() < 1e-15);
        // posterior odds at x are exp(2x − 2)
        let x = 1.7f64;
        let expect = 1.0 / (1.0 + (-(2.0 * x - 2.0)).exp());
        assert!((m.proba(&[x]) - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_feature_is_floored() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 5.0], vec![1.0, 6.0]];
        let y = vec![false, false, true, true];
        let m = GaussianNb::fit(&x, &y, &NbParams::default());
        assert!(m.vars[0][0] > 0.0);
        let p = m.proba(&[1.0, 3.0]);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}
