//! Binary skill classifiers with probability outputs.
//!
//! Five model families are implemented from scratch: L2-regularized
//! logistic regression, an RBF-kernel SVM trained by SMO with Platt-scaled
//! probabilities, a Gini random forest, k-nearest neighbors and Gaussian
//! naive Bayes. Models that depend on feature scale standardize internally
//! with constants captured at fit time, so nothing from a test split leaks in.

mod forest;
mod knn;
mod logreg;
mod naive_bayes;
mod scaling;
mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ForestParams, MaxFeatures, RandomForest, Tree, TreeNode};
pub use knn::{KnnModel, KnnParams};
pub use logreg::{LogRegParams, LogisticRegression};
pub use naive_bayes::{GaussianNb, NbParams};
pub use scaling::Standardizer;
pub use svm::{smo, PlattSigmoid, SmoOutcome, SmoParams, SvmModel, SvmParams};

pub const MODEL_FORMAT: &str = "smartchair-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("need at least {min} training rows, got {got}")]
    TooFewRows { min: usize, got: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("row {row} has {got} features, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("{model} did not converge after {iterations} iterations")]
    NoConvergence { model: &'static str, iterations: usize },
    #[error("operation requires a random forest, got {0}")]
    WrongKind(ModelKind),
    #[error("invalid model document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogReg,
    SvmRbf,
    RandomForest,
    Knn,
    GaussianNb,
}

impl ModelKind {
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::LogReg => "Logistic regression",
            ModelKind::SvmRbf => "SVM",
            ModelKind::RandomForest => "Random forest",
            ModelKind::Knn => "k-nearest neighbors",
            ModelKind::GaussianNb => "Naive Bayes",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Hyperparameters per model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    LogReg(LogRegParams),
    SvmRbf(SvmParams),
    RandomForest(ForestParams),
    Knn(KnnParams),
    GaussianNb(NbParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    /// Seed for stochastic fitting (forest bootstraps, SVM calibration folds).
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        ModelSpec { params, seed }
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::LogReg(_) => ModelKind::LogReg,
            ModelParams::SvmRbf(_) => ModelKind::SvmRbf,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::GaussianNb(_) => ModelKind::GaussianNb,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelSpec {
            params: self.params.clone(),
            seed,
        }
    }

    pub fn logreg() -> Self {
        ModelSpec::new(ModelParams::LogReg(LogRegParams::default()), 0)
    }
    pub fn svm_rbf() -> Self {
        ModelSpec::new(ModelParams::SvmRbf(SvmParams::default()), 0)
    }
    pub fn random_forest() -> Self {
        ModelSpec::new(ModelParams::RandomForest(ForestParams::default()), 0)
    }
    pub fn knn() -> Self {
        ModelSpec::new(ModelParams::Knn(KnnParams::default()), 0)
    }
    pub fn gaussian_nb() -> Self {
        ModelSpec::new(ModelParams::GaussianNb(NbParams::default()), 0)
    }

    /// The five default models in reporting order.
    pub fn default_set() -> Vec<ModelSpec> {
        vec![
            ModelSpec::logreg(),
            ModelSpec::svm_rbf(),
            ModelSpec::random_forest(),
            ModelSpec::knn(),
            ModelSpec::gaussian_nb(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    LogReg(LogisticRegression),
    SvmRbf(SvmModel),
    RandomForest(RandomForest),
    Knn(KnnModel),
    GaussianNb(GaussianNb),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::LogReg(_) => ModelKind::LogReg,
            TrainedModel::SvmRbf(_) => ModelKind::SvmRbf,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::GaussianNb(_) => ModelKind::GaussianNb,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::LogReg(m) => m.scaler.n_features(),
            TrainedModel::SvmRbf(m) => m.scaler.n_features(),
            TrainedModel::RandomForest(m) => m.n_features,
            TrainedModel::Knn(m) => m.scaler.n_features(),
            TrainedModel::GaussianNb(m) => m.means[0].len(),
        }
    }

    /// Serializes as a versioned JSON document.
    pub fn to_json(&self, spec: &ModelSpec) -> String {
        let doc = ModelDocumentRef {
            format: MODEL_FORMAT,
            version: MODEL_FORMAT_VERSION,
            spec,
            model: self,
        };
        serde_json::to_string_pretty(&doc).unwrap()
    }

    pub fn from_json(text: &str) -> Result<(ModelSpec, TrainedModel), ModelError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(ModelError::Document(format!("unexpected format {:?}", doc.format)));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Document(format!(
                "unsupported version {} (expected {MODEL_FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok((doc.spec, doc.model))
    }
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format: &'a str,
    version: u32,
    spec: &'a ModelSpec,
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    spec: ModelSpec,
    model: TrainedModel,
}

pub(crate) fn check_rows(x: &[Vec<f64>], expected: Option<usize>) -> Result<usize, ModelError> {
    let p = expected.unwrap_or_else(|| x.first().map_or(0, |r| r.len()));
    for (row, r) in x.iter().enumerate() {
        if r.len() != p {
            return Err(ModelError::Dimension {
                row,
                got: r.len(),
                expected: p,
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row, col });
        }
    }
    Ok(p)
}

fn check_training(x: &[Vec<f64>], y: &[bool]) -> Result<usize, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LabelCount(y.len(), x.len()));
    }
    if x.len() < 4 {
        return Err(ModelError::TooFewRows { min: 4, got: x.len() });
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(ModelError::SingleClass);
    }
    check_rows(x, None)
}

/// Fits a model. Deterministic given `(spec, x, y)`.
pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[bool]) -> Result<TrainedModel, ModelError> {
    check_training(x, y)?;
    Ok(match &spec.params {
        ModelParams::LogReg(p) => TrainedModel::LogReg(LogisticRegression::fit(x, y, p)?),
        ModelParams::SvmRbf(p) => TrainedModel::SvmRbf(SvmModel::fit(x, y, p, spec.seed)?),
        ModelParams::RandomForest(p) => TrainedModel::RandomForest(RandomForest::fit(x, y, p, spec.seed)),
        ModelParams::Knn(p) => TrainedModel::Knn(KnnModel::fit(x, y, p)),
        ModelParams::GaussianNb(p) => TrainedModel::GaussianNb(GaussianNb::fit(x, y, p)),
    })
}

/// Probability of class 1 for each row.
pub fn predict_proba(model: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    check_rows(x, Some(model.n_features()))?;
    Ok(match model {
        TrainedModel::LogReg(m) => x.iter().map(|r| m.proba(r)).collect(),
        TrainedModel::SvmRbf(m) => x.iter().map(|r| m.proba(r)).collect(),
        TrainedModel::RandomForest(m) => x.iter().map(|r| m.proba(r)).collect(),
        TrainedModel::Knn(m) => x.iter().map(|r| m.proba(r)).collect(),
        TrainedModel::GaussianNb(m) => x.iter().map(|r| m.proba(r)).collect(),
    })
}

/// Mean-decrease-in-impurity importances, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub Vec<f64>);

impl ImportanceVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("feature,importance\n");
        for (n, v) in names.iter().zip(&self.0) {
            out.push_str(&format!("{n},{v}\n"));
        }
        out
    }
}

pub fn rf_feature_importance(model: &TrainedModel) -> Result<ImportanceVector, ModelError> {
    match model {
        TrainedModel::RandomForest(f) => Ok(ImportanceVector(f.feature_importance())),
        other => Err(ModelError::WrongKind(other.kind())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, ((i * 7) % 5) as f64]).collect();
        let y = (0..20).map(|i| i >= 10).collect();
        (x, y)
    }

    #[test]
    fn training_validation() {
        let (x, y) = toy();
        assert_eq!(fit(&ModelSpec::logreg(), &x, &[true; 20]), Err(ModelError::SingleClass));
        let mut bad = x.clone();
        bad[3][1] = f64::NAN;
        assert_eq!(
            fit(&ModelSpec::knn(), &bad, &y),
            Err(ModelError::NonFinite { row: 3, col: 1 })
        );
        assert!(matches!(
            fit(&ModelSpec::knn(), &x[..3], &y[..3]),
            Err(ModelError::TooFewRows { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let (x, y) = toy();
        for spec in ModelSpec::default_set() {
            let m = fit(&spec, &x, &y).unwrap();
            assert!(matches!(
                predict_proba(&m, &[vec![1.0, 2.0, 3.0]]),
                Err(ModelError::Dimension { .. })
            ));
            let p = predict_proba(&m, &x).unwrap();
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{spec:?}");
        }
    }

    #[test]
    fn documents_round_trip() {
        let (x, y) = toy();
        for spec in ModelSpec::default_set() {
            let m = fit(&spec, &x, &y).unwrap();
            let (spec2, m2) = TrainedModel::from_json(&m.to_json(&spec)).unwrap();
            assert_eq!(spec2, spec);
            assert_eq!(predict_proba(&m2, &x).unwrap(), predict_proba(&m, &x).unwrap());
        }
        assert!(TrainedModel::from_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn importance_requires_forest() {
        let (x, y) = toy();
        let m = fit(&ModelSpec::knn(), &x, &y).unwrap();
        assert_eq!(rf_feature_importance(&m), Err(ModelError::WrongKind(ModelKind::Knn)));
    }
}
