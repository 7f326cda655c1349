use serde::{Deserialize, Serialize};

use super::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 3 }
    }
}

/// Stores the standardized training set; the class-1 probability is the
/// vote fraction among the `k` nearest rows (Euclidean, ties broken by
/// training-row order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub scaler: Standardizer,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &KnnParams) -> Self {
        let scaler = Standardizer::fit(x);
        KnnModel {
            k: params.k.clamp(1, x.len()),
            x: scaler.transform(x),
            y: y.to_vec(),
            scaler,
        }
    }

    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let z = self.scaler.transform_row(row);
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        let nb = self.neighbors(row);
        nb.iter().filter(|&&i| self.y[i]).count() as f64 / nb.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_fraction() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]];
        let y = vec![true, true, false, false, false];
        let m = KnnModel::fit(&x, &y, &KnnParams::default());
        assert_eq!(m.neighbors(&[0.9]), vec![1, 0, 2]);
        assert!((m.proba(&[0.9]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ties_use_row_order() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0], vec![5.0]];
        let y = vec![false, true, true, false, false];
        let m = KnnModel::fit(&x, &y, &KnnParams { k: 2 });
        assert_eq!(m.neighbors(&[m.scaler.means[0]]), vec![0, 2]);
    }

    #[test]
    fn k_equal_n_gives_prior() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..8).map(|i| i % 4 == 0).collect();
        let m = KnnModel::fit(&x, &y, &KnnParams { k: 8 });
        assert_eq!(m.proba(&[100.0]), 0.25);
    }
}
