//! Telemetry ingestion: the JSON wire format, an append-only per-player
//! stream store, JSON-lines file import and the HTTP service.

mod server;
mod store;
mod wire;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use server::{router, serve, spawn_server, ServerHandle};
pub use store::{Ack, StreamStore};
pub use wire::{parse_telemetry_batch, to_json};

/// Nominal sampling rate of the chair sensor unit, in samples per second.
pub const NOMINAL_RATE: f64 = 100.0;

/// One 9-channel IMU reading.
///
/// Axis convention: `z` is vertical, `y` runs from the player to the monitor
/// and `x` is parallel to the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// Seconds since stream start, device clock.
    pub t: f64,
    pub acc: [f64; 3],
    pub gyro: [f64; 3],
    pub mag: [f64; 3],
}

impl SensorSample {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .acc
                .iter()
                .chain(&self.gyro)
                .chain(&self.mag)
                .all(|v| v.is_finite())
    }
}

/// A batch as posted by the sensor unit, nominally one second of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryBatch {
    pub player_id: String,
    pub device_id: String,
    pub seq: u64,
    pub samples: Vec<SensorSample>,
}

impl TelemetryBatch {
    /// Time between the first and last sample.
    pub fn span(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// A player's full ordered telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryStream {
    pub player_id: String,
    pub samples: Vec<SensorSample>,
    pub nominal_rate: f64,
}

impl TelemetryStream {
    pub fn new(player_id: impl Into<String>, samples: Vec<SensorSample>) -> Self {
        TelemetryStream {
            player_id: player_id.into(),
            samples,
            nominal_rate: NOMINAL_RATE,
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Splits the stream into consecutive batches of `per_batch` samples,
    /// numbered from `seq` 0.
    pub fn to_batches(&self, device_id: &str, per_batch: usize) -> Vec<TelemetryBatch> {
        assert!(per_batch > 0);
        self.samples
            .chunks(per_batch)
            .enumerate()
            .map(|(i, chunk)| TelemetryBatch {
                player_id: self.player_id.clone(),
                device_id: device_id.to_string(),
                seq: i as u64,
                samples: chunk.to_vec(),
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("invalid batch{}: {reason}", index.map(|i| format!(" at sample {i}")).unwrap_or_default())]
    Validation { index: Option<usize>, reason: String },
    #[error("ordering violation for player {player_id}: batch starts at t={first_t} but stream ends at t={last_t}")]
    Ordering {
        player_id: String,
        first_t: f64,
        last_t: f64,
    },
    #[error("unknown player {0:?}")]
    NotFound(String),
    #[error("corrupted record in {file} at byte offset {offset}: {reason}")]
    Integrity { file: String, offset: u64, reason: String },
    #[error("{path}:{line}: {source}")]
    File {
        path: String,
        line: usize,
        #[source]
        source: Box<IngestError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Imports a JSON-lines file (one batch per line) into the store.
/// Blank lines are skipped. Returns the acknowledgments in file order.
pub fn ingest_jsonl(store: &StreamStore, path: &Path) -> Result<Vec<Ack>, IngestError> {
    let reader = BufReader::new(File::open(path)?);
    let mut acks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |e: IngestError| IngestError::File {
            path: path.display().to_string(),
            line: i + 1,
            source: Box::new(e),
        };
        let batch = parse_telemetry_batch(line.as_bytes()).map_err(wrap)?;
        acks.push(store.append(&batch).map_err(wrap)?);
    }
    Ok(acks)
}
