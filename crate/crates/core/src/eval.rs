//! Classification metrics and repeated player-level evaluation.
//!
//! Every split assigns whole players to one side: a random half of the
//! players (⌊n/2⌋) trains, the rest tests, and both sides must contain both
//! classes. Split `i` uses seed `master_seed ^ i`, so a report depends only
//! on its inputs, never on thread scheduling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::models::{self, ModelError, ModelKind, ModelSpec};
use crate::rng;

pub const LOG_LOSS_EPS: f64 = 1e-15;
pub const MAX_SPLIT_RETRIES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{0} labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("metric needs at least one sample")]
    Empty,
    #[error("ROC AUC needs both classes present")]
    SingleClass,
    #[error("need at least 2 players per class (have {positive} positive, {negative} negative)")]
    TooFewPlayers { positive: usize, negative: usize },
    #[error("player {0} has sessions with different labels")]
    InconsistentLabels(String),
    #[error("no class-balanced split found after {0} draws")]
    SplitRetriesExhausted(usize),
    #[error("split {split}: train and test share players {players:?}")]
    Leakage { split: usize, players: Vec<String> },
    #[error("split {split}, {model}: {source}")]
    Model {
        split: usize,
        model: ModelKind,
        #[source]
        source: ModelError,
    },
}

fn check_lengths(y: &[bool], p: &[f64]) -> Result<(), EvalError> {
    if y.len() != p.len() {
        return Err(EvalError::LengthMismatch(y.len(), p.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Fraction of rows where `p ≥ threshold` agrees with the label.
pub fn accuracy(y: &[bool], p: &[f64], threshold: f64) -> Result<f64, EvalError> {
    check_lengths(y, p)?;
    let hits = y.iter().zip(p).filter(|(&l, &v)| (v >= threshold) == l).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Probability that a random positive scores above a random negative,
/// counting ties as one half.
pub fn roc_auc(y: &[bool], p: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, p)?;
    let n_pos = y.iter().filter(|&&l| l).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));

    // doubled Mann-Whitney count, exact in integers
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0u64, 0u64);
        while j < order.len() && p[order[j]] == p[order[i]] {
            if y[order[j]] {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        twice_u += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    Ok((twice_u as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Binary cross-entropy with probabilities clipped to `[eps, 1 − eps]`.
pub fn log_loss(y: &[bool], p: &[f64], eps: f64) -> Result<f64, EvalError> {
    check_lengths(y, p)?;
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&l, &v)| {
            let q = v.clamp(eps, 1.0 - eps);
            if l {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_players: BTreeSet<String>,
    pub test_players: BTreeSet<String>,
}

/// Shuffles players and puts the first ⌊n/2⌋ in the training half,
/// redrawing until both halves hold both classes.
pub fn make_split(players: &[(String, bool)], seed: u64) -> Result<SplitPlan, EvalError> {
    let positive = players.iter().filter(|(_, l)| *l).count();
    let negative = players.len() - positive;
    if positive < 2 || negative < 2 {
        return Err(EvalError::TooFewPlayers { positive, negative });
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..players.len()).collect();
    let n_train = players.len() / 2;
    for _ in 0..MAX_SPLIT_RETRIES {
        order.shuffle(&mut rng);
        let (train, test) = order.split_at(n_train);
        let balanced = |side: &[usize]| side.iter().any(|&i| players[i].1) && side.iter().any(|&i| !players[i].1);
        if balanced(train) && balanced(test) {
            return Ok(SplitPlan {
                seed,
                train_players: train.iter().map(|&i| players[i].0.clone()).collect(),
                test_players: test.iter().map(|&i| players[i].0.clone()).collect(),
            });
        }
    }
    Err(EvalError::SplitRetriesExhausted(MAX_SPLIT_RETRIES))
}

/// Unique players with their labels, sorted by id.
pub fn players_of(matrix: &FeatureMatrix) -> Result<Vec<(String, bool)>, EvalError> {
    let mut out: Vec<(String, bool)> = Vec::new();
    let mut sorted: Vec<(&str, bool)> = matrix.meta.iter().map(|m| (m.player_id.as_str(), m.label)).collect();
    sorted.sort();
    for (id, label) in sorted {
        match out.last() {
            Some((prev, l)) if prev == id => {
                if *l != label {
                    return Err(EvalError::InconsistentLabels(id.to_string()));
                }
            }
            _ => out.push((id.to_string(), label)),
        }
    }
    Ok(out)
}

/// Shuffles labels across players (sessions keep their player's new label),
/// leaving the class counts unchanged.
pub fn permute_player_labels(matrix: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix, EvalError> {
    let players = shuffled_labels(&players_of(matrix)?, seed);
    let map: BTreeMap<&str, bool> = players.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    Ok(matrix.with_labels(|id| map[id]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_splits: usize,
    pub master_seed: u64,
    pub threshold: f64,
    pub log_loss_eps: f64,
    /// Permutation null: when set, every split first shuffles the labels
    /// across players with a seed derived from this value and the split
    /// index.
    pub permutation_null: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_splits: 1000,
            master_seed: 0,
            threshold: 0.5,
            log_loss_eps: LOG_LOSS_EPS,
            permutation_null: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub roc_auc: f64,
    pub log_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub index: usize,
    pub seed: u64,
    pub train_players: Vec<String>,
    pub test_players: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// One entry per model, in spec order.
    pub scores: Vec<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub name: String,
    pub spec: ModelSpec,
    pub mean_accuracy: f64,
    pub mean_roc_auc: f64,
    pub mean_log_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_splits: usize,
    pub master_seed: u64,
    pub config: EvalConfig,
    pub feature_names: Vec<String>,
    pub models: Vec<ModelSummary>,
    /// Splits whose train and test player sets intersect. Always 0 for a
    /// report that was returned at all.
    pub leakage_violations: usize,
    pub splits: Vec<SplitRecord>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// Rows are models, columns the three averaged metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,accuracy,roc_auc,log_loss\n");
        for m in &self.models {
            out.push_str(&format!(
                "{},{},{},{}\n",
                m.name, m.mean_accuracy, m.mean_roc_auc, m.mean_log_loss
            ));
        }
        out
    }

    pub fn model(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.kind == kind)
    }
}

fn rows_for(
    matrix: &FeatureMatrix,
    side: &BTreeSet<String>,
    labels: &BTreeMap<&str, bool>,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    matrix
        .rows
        .iter()
        .zip(&matrix.meta)
        .filter(|(_, m)| side.contains(&m.player_id))
        .map(|(r, m)| (r.clone(), labels[m.player_id.as_str()]))
        .unzip()
}

fn shuffled_labels(players: &[(String, bool)], seed: u64) -> Vec<(String, bool)> {
    let mut labels: Vec<bool> = players.iter().map(|(_, l)| *l).collect();
    labels.shuffle(&mut rng::seeded(seed));
    players.iter().map(|(id, _)| id.clone()).zip(labels).collect()
}

/// Runs one split: fit each model on the training players' sessions and
/// score it on the test players' sessions.
pub fn evaluate_split(
    matrix: &FeatureMatrix,
    players: &[(String, bool)],
    specs: &[ModelSpec],
    index: usize,
    config: &EvalConfig,
) -> Result<SplitRecord, EvalError> {
    let seed = config.master_seed ^ index as u64;
    let permuted;
    let players = match config.permutation_null {
        Some(null_seed) => {
            permuted = shuffled_labels(players, rng::mix(null_seed) ^ index as u64);
            &permuted[..]
        }
        None => players,
    };
    let labels: BTreeMap<&str, bool> = players.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let plan = make_split(players, seed)?;
    let shared: Vec<String> = plan.train_players.intersection(&plan.test_players).cloned().collect();
    if !shared.is_empty() {
        return Err(EvalError::Leakage {
            split: index,
            players: shared,
        });
    }
    let (train_x, train_y) = rows_for(matrix, &plan.train_players, &labels);
    let (test_x, test_y) = rows_for(matrix, &plan.test_players, &labels);

    let mut scores = Vec::with_capacity(specs.len());
    for spec in specs {
        let wrap = |source| EvalError::Model {
            split: index,
            model: spec.kind(),
            source,
        };
        let model_spec = spec.with_seed(spec.seed ^ rng::mix(seed));
        let model = models::fit(&model_spec, &train_x, &train_y).map_err(wrap)?;
        let p = models::predict_proba(&model, &test_x).map_err(wrap)?;
        scores.push(Scores {
            accuracy: accuracy(&test_y, &p, config.threshold)?,
            roc_auc: roc_auc(&test_y, &p)?,
            log_loss: log_loss(&test_y, &p, config.log_loss_eps)?,
        });
    }
    Ok(SplitRecord {
        index,
        seed,
        n_train: train_x.len(),
        n_test: test_x.len(),
        train_players: plan.train_players.into_iter().collect(),
        test_players: plan.test_players.into_iter().collect(),
        scores,
    })
}

/// Averages every metric over `config.n_splits` player-level splits.
pub fn repeated_eval(
    matrix: &FeatureMatrix,
    specs: &[ModelSpec],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let players = players_of(matrix)?;
    let splits: Vec<SplitRecord> = (0..config.n_splits)
        .into_par_iter()
        .map(|i| evaluate_split(matrix, &players, specs, i, config))
        .collect::<Result<_, _>>()?;

    let leakage_violations = splits
        .iter()
        .filter(|s| s.train_players.iter().any(|p| s.test_players.contains(p)))
        .count();
    assert_eq!(leakage_violations, 0, "player leakage between train and test");

    let n = splits.len().max(1) as f64;
    let models = specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let mean = |f: fn(&Scores) -> f64| splits.iter().map(|s| f(&s.scores[m])).sum::<f64>() / n;
            ModelSummary {
                kind: spec.kind(),
                name: spec.kind().display_name().to_string(),
                spec: spec.clone(),
                mean_accuracy: mean(|s| s.accuracy),
                mean_roc_auc: mean(|s| s.roc_auc),
                mean_log_loss: mean(|s| s.log_loss),
            }
        })
        .collect();

    Ok(EvalReport {
        n_splits: config.n_splits,
        master_seed: config.master_seed,
        config: *config,
        feature_names: matrix.names.clone(),
        models,
        leakage_violations,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[true, false], &[0.9, 0.1], 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&[true, false, true, false], &[0.5; 4], 0.5).unwrap(), 0.5);
        assert_eq!(
            accuracy(&[false, true, true, false], &[0.4, 0.9, 0.2, 0.1], 0.5).unwrap(),
            0.75
        );
        assert_eq!(
            accuracy(&[true], &[0.5, 0.2], 0.5),
            Err(EvalError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn auc_examples() {
        let y = [false, false, true, true];
        assert_eq!(roc_auc(&y, &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(roc_auc(&y, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(roc_auc(&y, &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[true, true], &[0.1, 0.2]), Err(EvalError::SingleClass));
    }

    #[test]
    fn log_loss_examples() {
        let ll = log_loss(&[true, false, true], &[0.5; 3], LOG_LOSS_EPS).unwrap();
        assert!((ll - 2f64.ln()).abs() < 1e-15);
        let ll = log_loss(&[true, false], &[1.0, 0.0], LOG_LOSS_EPS).unwrap();
        assert!((0.0..1e-14).contains(&ll));
        let ll = log_loss(&[true], &[0.0], LOG_LOSS_EPS).unwrap();
        assert!((ll - 34.538776394910684).abs() < 1e-9, "{ll}");
    }

    fn roster(n_pos: usize, n_neg: usize) -> Vec<(String, bool)> {
        (0..n_pos)
            .map(|i| (format!("pro{i:02}"), true))
            .chain((0..n_neg).map(|i| (format!("am{i:02}"), false)))
            .collect()
    }

    #[test]
    fn split_examples() {
        let players = roster(9, 10);
        let plan = make_split(&players, 7).unwrap();
        assert_eq!(plan.train_players.len(), 9);
        assert_eq!(plan.test_players.len(), 10);
        assert!(plan.train_players.is_disjoint(&plan.test_players));
        assert_eq!(make_split(&players, 7).unwrap(), plan);
        assert_ne!(make_split(&players, 8).unwrap(), plan);
        assert_eq!(
            make_split(&roster(1, 1), 0),
            Err(EvalError::TooFewPlayers {
                positive: 1,
                negative: 1
            })
        );
        assert!(make_split(&roster(1, 5), 0).is_err());
    }

    #[test]
    fn split_sides_hold_both_classes() {
        let players = roster(2, 2);
        for seed in 0..50 {
            let plan = make_split(&players, seed).unwrap();
            for side in [&plan.train_players, &plan.test_players] {
                assert_eq!(side.iter().filter(|p| p.starts_with("pro")).count(), 1);
            }
        }
    }
}
