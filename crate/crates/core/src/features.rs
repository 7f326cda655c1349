//! Behavioral features per session.
//!
//! Every session becomes a 31-dimensional vector:
//!
//! | name | meaning |
//! |------|---------|
//! | `lean_back` | fraction of time the smoothed vertical acceleration sits below its median by more than θ |
//! | `med_{acc,gyro}_{x,y,z}_std` | median of the 1-second rolling standard deviation |
//! | `moving_{acc,gyro}_{x,y,z}` | fraction of time the rolling std exceeds 3× its median |
//! | `moving_{kill,death,shootout}_{acc,gyro}_{x,y,z}` | same fraction restricted to 1 s after kills/deaths, or to shootouts |
//!
//! Age, gender, KDR and the label travel alongside as [`SessionMeta`] and never
//! enter the model columns.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamelog::{EventKind, Session};
use crate::ingest::SensorSample;

/// Rolling window length in samples (1 s at 100 Hz).
pub const WINDOW: usize = 100;
pub const MOVEMENT_MULTIPLIER: f64 = 3.0;
pub const N_FEATURES: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    AccX,
    AccY,
    AccZ,
    GyroX,
    GyroY,
    GyroZ,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::GyroX,
        Channel::GyroY,
        Channel::GyroZ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::AccX => "acc_x",
            Channel::AccY => "acc_y",
            Channel::AccZ => "acc_z",
            Channel::GyroX => "gyro_x",
            Channel::GyroY => "gyro_y",
            Channel::GyroZ => "gyro_z",
        }
    }

    pub fn value(self, s: &SensorSample) -> f64 {
        match self {
            Channel::AccX => s.acc[0],
            Channel::AccY => s.acc[1],
            Channel::AccZ => s.acc[2],
            Channel::GyroX => s.gyro[0],
            Channel::GyroY => s.gyro[1],
            Channel::GyroZ => s.gyro[2],
        }
    }
}

/// The fixed, ordered feature roster.
pub fn feature_names() -> Vec<String> {
    let mut names = vec!["lean_back".to_string()];
    names.extend(Channel::ALL.iter().map(|c| format!("med_{}_std", c.name())));
    names.extend(Channel::ALL.iter().map(|c| format!("moving_{}", c.name())));
    for event in ["kill", "death", "shootout"] {
        names.extend(Channel::ALL.iter().map(|c| format!("moving_{event}_{}", c.name())));
    }
    names
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty series")]
    EmptySeries,
    #[error("session {session}: channel {channel} is missing or non-finite")]
    MissingChannel { session: String, channel: String },
    #[error("session {session}: {samples} samples is fewer than the {window}-sample window")]
    TooShort {
        session: String,
        samples: usize,
        window: usize,
    },
    #[error("correlation needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature table: {0}")]
    Table(String),
}

/// Sample standard deviation (n − 1) over each trailing window of `window`
/// samples. Element `j` covers samples `j..j + window`, i.e. it is aligned
/// to sample `j + window − 1`. Shorter input yields an empty series.
///
/// Sums are kept relative to an anchor value and recomputed from scratch
/// every `window` steps, which bounds accumulated rounding error.
pub fn rolling_std(x: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 2, "window must be at least 2");
    if x.len() < window {
        return Vec::new();
    }
    let w = window as f64;
    let n_out = x.len() - window + 1;
    let mut out = Vec::with_capacity(n_out);
    let (mut anchor, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..n_out {
        if i % window == 0 {
            anchor = x[i];
            s1 = 0.0;
            s2 = 0.0;
            for &v in &x[i..i + window] {
                let d = v - anchor;
                s1 += d;
                s2 += d * d;
            }
        } else {
            let d_in = x[i + window - 1] - anchor;
            let d_out = x[i - 1] - anchor;
            s1 += d_in - d_out;
            s2 += d_in * d_in - d_out * d_out;
        }
        let var = (s2 - s1 * s1 / w) / (w - 1.0);
        out.push(var.max(0.0).sqrt());
    }
    out
}

/// Median; the mean of the central pair for even lengths.
pub fn median(values: &[f64]) -> Result<f64, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// `median_std` feature: the median of a rolling-std series.
pub fn median_std(std_series: &[f64]) -> Result<f64, FeatureError> {
    median(std_series)
}

/// Marks entries strictly above `multiplier` × the series median.
pub fn movement_mask(std_series: &[f64], multiplier: f64) -> Result<Vec<bool>, FeatureError> {
    let threshold = multiplier * median(std_series)?;
    Ok(std_series.iter().map(|&s| s > threshold).collect())
}

pub fn activity_fraction(mask: &[bool]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

/// A reaction window in session time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventWindow {
    pub start: f64,
    pub end: f64,
    /// `[start, end]` when true, `[start, end)` otherwise.
    pub closed: bool,
}

impl EventWindow {
    pub fn half_open(start: f64, end: f64) -> Self {
        EventWindow {
            start,
            end,
            closed: false,
        }
    }

    pub fn closed(start: f64, end: f64) -> Self {
        EventWindow {
            start,
            end,
            closed: true,
        }
    }
}

/// Marks which of `times` (ascending) fall inside the union of `windows`.
pub fn window_membership(times: &[f64], windows: &[EventWindow]) -> Vec<bool> {
    let mut inside = vec![false; times.len()];
    for w in windows {
        let lo = times.partition_point(|&t| t < w.start);
        let hi = if w.closed {
            times.partition_point(|&t| t <= w.end)
        } else {
            times.partition_point(|&t| t < w.end)
        };
        for flag in inside.iter_mut().take(hi).skip(lo) {
            *flag = true;
        }
    }
    inside
}

/// Fraction of mask entries inside the union of `windows` that are set.
/// `times[i]` is the time of `mask[i]`. An empty union gives `None`.
pub fn event_activity_fraction(mask: &[bool], times: &[f64], windows: &[EventWindow]) -> Option<f64> {
    assert_eq!(mask.len(), times.len());
    let inside = window_membership(times, windows);
    masked_fraction(mask, &inside)
}

fn masked_fraction(mask: &[bool], inside: &[bool]) -> Option<f64> {
    let (mut total, mut active) = (0usize, 0usize);
    for (&m, &i) in mask.iter().zip(inside) {
        if i {
            total += 1;
            active += m as usize;
        }
    }
    (total > 0).then(|| active as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LeanBackThreshold {
    /// θ = factor × median(|acc_z|).
    RelativeToMedian(f64),
    /// θ in device units.
    Absolute(f64),
}

impl Default for LeanBackThreshold {
    fn default() -> Self {
        LeanBackThreshold::RelativeToMedian(0.05)
    }
}

/// Trailing mean over `window` samples; the first `window − 1` entries use
/// the samples available so far.
pub fn trailing_mean(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let anchor = x.first().copied().unwrap_or(0.0);
    let mut sum = 0.0;
    for i in 0..x.len() {
        sum += x[i] - anchor;
        if i >= window {
            sum -= x[i - window] - anchor;
        }
        let n = (i + 1).min(window) as f64;
        out.push(anchor + sum / n);
    }
    out
}

/// Fraction of samples whose smoothed vertical acceleration lies below
/// `median(acc_z) − θ`.
pub fn lean_back_fraction(acc_z: &[f64], window: usize, threshold: LeanBackThreshold) -> f64 {
    if acc_z.is_empty() {
        return 0.0;
    }
    let med = median(acc_z).unwrap();
    let theta = match threshold {
        LeanBackThreshold::RelativeToMedian(f) => {
            let abs: Vec<f64> = acc_z.iter().map(|v| v.abs()).collect();
            f * median(&abs).unwrap()
        }
        LeanBackThreshold::Absolute(v) => v,
    };
    let limit = med - theta;
    let smooth = trailing_mean(acc_z, window);
    smooth.iter().filter(|&&v| v < limit).count() as f64 / smooth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub window: usize,
    pub movement_multiplier: f64,
    pub lean_back: LeanBackThreshold,
    /// Seconds after a kill or death that count as a reaction.
    pub reaction_window: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            window: WINDOW,
            movement_multiplier: MOVEMENT_MULTIPLIER,
            lean_back: LeanBackThreshold::default(),
            reaction_window: 1.0,
        }
    }
}

/// Which event-conditioned feature groups had no reaction opportunity and
/// were filled with 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Imputed {
    pub kill: bool,
    pub death: bool,
    pub shootout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub player_id: String,
    pub label: bool,
    pub kdr: f64,
    pub age: f64,
    pub gender: u8,
    pub imputed: Imputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub meta: SessionMeta,
}

/// Computes the 31 features for one session.
pub fn extract_features(session: &Session, params: &FeatureParams) -> Result<FeatureVector, FeatureError> {
    let n = session.samples.len();
    if n < params.window.max(2) {
        return Err(FeatureError::TooShort {
            session: session.id(),
            samples: n,
            window: params.window,
        });
    }
    let mut channels = Vec::with_capacity(6);
    for ch in Channel::ALL {
        let series: Vec<f64> = session.samples.iter().map(|s| ch.value(s)).collect();
        if series.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::MissingChannel {
                session: session.id(),
                channel: ch.name().to_string(),
            });
        }
        channels.push(series);
    }

    let times: Vec<f64> = session.samples[params.window - 1..].iter().map(|s| s.t).collect();
    let end = session.end();
    let reaction = |kind: EventKind| -> Vec<EventWindow> {
        session
            .events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| EventWindow::half_open(e.t, (e.t + params.reaction_window).min(end)))
            .collect()
    };
    let shootout_windows: Vec<EventWindow> = session
        .shootouts
        .iter()
        .map(|s| EventWindow::closed(s.start, s.end))
        .collect();
    let event_sets = [
        window_membership(&times, &reaction(EventKind::Kill)),
        window_membership(&times, &reaction(EventKind::Death)),
        window_membership(&times, &shootout_windows),
    ];

    let mut med = Vec::with_capacity(6);
    let mut moving = Vec::with_capacity(6);
    let mut reactive: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(6)).collect();
    let mut imputed = [false; 3];
    for series in &channels {
        let std = rolling_std(series, params.window);
        med.push(median_std(&std)?);
        let mask = movement_mask(&std, params.movement_multiplier)?;
        moving.push(activity_fraction(&mask));
        for (k, inside) in event_sets.iter().enumerate() {
            match masked_fraction(&mask, inside) {
                Some(f) => reactive[k].push(f),
                None => {
                    imputed[k] = true;
                    reactive[k].push(0.0);
                }
            }
        }
    }

    let mut values = Vec::with_capacity(N_FEATURES);
    values.push(lean_back_fraction(&channels[2], params.window, params.lean_back));
    values.extend(med);
    values.extend(moving);
    for r in reactive {
        values.extend(r);
    }
    debug_assert_eq!(values.len(), N_FEATURES);

    Ok(FeatureVector {
        values,
        meta: SessionMeta {
            session_id: session.id(),
            player_id: session.player_id.clone(),
            label: session.label,
            kdr: session.kdr,
            age: session.age,
            gender: session.gender,
            imputed: Imputed {
                kill: imputed[0],
                death: imputed[1],
                shootout: imputed[2],
            },
        },
    })
}

/// Sessions × features, with a parallel metadata table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<SessionMeta>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> Vec<bool> {
        self.meta.iter().map(|m| m.label).collect()
    }

    /// Restricts to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| FeatureError::Table(format!("unknown column {n:?}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(FeatureMatrix {
            names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
            meta: self.meta.clone(),
        })
    }

    /// Copy with labels replaced player-wise by `label_of(player_id)`.
    pub fn with_labels(&self, label_of: impl Fn(&str) -> bool) -> FeatureMatrix {
        let mut m = self.clone();
        for meta in &mut m.meta {
            meta.label = label_of(&meta.player_id);
        }
        m
    }

    /// CSV with header `session_id,<feature names…>`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["session_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).unwrap();
        for (row, meta) in self.rows.iter().zip(&self.meta) {
            let mut rec = vec![meta.session_id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).unwrap()
    }

    /// Rebuilds a matrix from its CSV and metadata sidecar.
    pub fn from_csv(csv_text: &str, meta_json: &str) -> Result<FeatureMatrix, FeatureError> {
        let meta: Vec<SessionMeta> = serde_json::from_str(meta_json).map_err(|e| FeatureError::Table(e.to_string()))?;
        let mut r = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = r.headers().map_err(|e| FeatureError::Table(e.to_string()))?.clone();
        if headers.get(0) != Some("session_id") {
            return Err(FeatureError::Table("first column must be session_id".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| FeatureError::Table(e.to_string()))?;
            let expected = meta.get(i).map(|m| m.session_id.as_str());
            if expected != rec.get(0) {
                return Err(FeatureError::Table(format!(
                    "row {} session id {:?} does not match metadata {:?}",
                    i + 1,
                    rec.get(0),
                    expected
                )));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| FeatureError::Table(format!("row {}: bad number {v:?}", i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != names.len() {
                return Err(FeatureError::Table(format!("row {} has wrong width", i + 1)));
            }
            rows.push(row);
        }
        if rows.len() != meta.len() {
            return Err(FeatureError::Table("row count differs from metadata".into()));
        }
        Ok(FeatureMatrix { names, rows, meta })
    }

    pub fn write(&self, csv_path: &Path, meta_path: &Path) -> std::io::Result<()> {
        fs::write(csv_path, self.to_csv())?;
        fs::write(meta_path, self.meta_json())
    }

    pub fn read(csv_path: &Path, meta_path: &Path) -> Result<FeatureMatrix, FeatureError> {
        let io = |e: std::io::Error| FeatureError::Table(e.to_string());
        FeatureMatrix::from_csv(
            &fs::read_to_string(csv_path).map_err(io)?,
            &fs::read_to_string(meta_path).map_err(io)?,
        )
    }
}

/// One row per session, in input order.
pub fn build_feature_matrix(sessions: &[Session], params: &FeatureParams) -> Result<FeatureMatrix, FeatureError> {
    let vectors: Vec<FeatureVector> = sessions
        .par_iter()
        .map(|s| extract_features(s, params))
        .collect::<Result<_, _>>()?;
    Ok(from_vectors(vectors))
}

pub fn from_vectors(vectors: Vec<FeatureVector>) -> FeatureMatrix {
    let (rows, meta) = vectors.into_iter().map(|v| (v.values, v.meta)).unzip();
    FeatureMatrix {
        names: feature_names(),
        rows,
        meta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).unwrap();
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Pearson correlation between columns. Zero-variance columns correlate 0
/// with everything else (1 with themselves). With `include_meta` the KDR,
/// age, gender and label columns are appended for reporting.
pub fn correlation_matrix(matrix: &FeatureMatrix, include_meta: bool) -> Result<CorrelationMatrix, FeatureError> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let mut names = matrix.names.clone();
    let mut cols: Vec<Vec<f64>> = (0..matrix.n_cols()).map(|j| matrix.column(j)).collect();
    if include_meta {
        names.extend(["kdr", "age", "gender", "exp_gt_1000h"].map(String::from));
        cols.push(matrix.meta.iter().map(|m| m.kdr).collect());
        cols.push(matrix.meta.iter().map(|m| m.age).collect());
        cols.push(matrix.meta.iter().map(|m| m.gender as f64).collect());
        cols.push(matrix.meta.iter().map(|m| m.label as u8 as f64).collect());
    }

    let centered: Vec<(Vec<f64>, f64)> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let d: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            (d, norm)
        })
        .collect();
    for (name, (_, norm)) in names.iter().zip(&centered) {
        if *norm == 0.0 {
            log::warn!("column {name} has zero variance; its correlations are reported as 0");
        }
    }

    let p = cols.len();
    let mut values = vec![vec![0.0; p]; p];
    for i in 0..p {
        values[i][i] = 1.0;
        for j in i + 1..p {
            let (a, na) = &centered[i];
            let (b, nb) = &centered[j];
            let r = if *na == 0.0 || *nb == 0.0 {
                0.0
            } else {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot / (na * nb)).clamp(-1.0, 1.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}
