//! Behavioral analytics for chair-mounted IMU telemetry from competitive
//! first-person-shooter players.
//!
//! The crate covers the whole path from raw sensor batches to skill
//! classification:
//!
//! * [`ingest`]: per-second JSON batches over HTTP or from JSON-lines files,
//!   persisted in an append-only per-player store.
//! * [`gamelog`]: kill/death/shot event logs, shootout detection, 3-minute
//!   session segmentation and kill/death ratio.
//! * [`features`]: rolling standard deviation, movement masks and the 31
//!   behavioral features per session.
//! * [`selection`]: LASSO regularization path by coordinate descent with
//!   AIC/BIC model choice.
//! * [`models`]: logistic regression, RBF SVM, random forest, k-nearest
//!   neighbors and Gaussian naive Bayes, all with probability outputs.
//! * [`eval`]: accuracy, ROC AUC, log loss and repeated player-level splits.
//! * [`synth`]: a synthetic cohort generator with planted class differences.
//! * [`cli`]: the stage orchestration behind the `smartchair` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eval;
pub mod features;
pub mod gamelog;
pub mod ingest;
pub mod models;
pub mod selection;
pub mod synth;

mod rng;
