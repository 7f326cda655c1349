//! JSON wire format for per-second telemetry batches.
//!
//! ```json
//! {"player_id":"p1","device_id":"d1","seq":0,
//!  "samples":[{"t":0.00,"acc":[0,0,9.8],"gyro":[0,0,0],"mag":[1,0,0]}]}
//! ```

use serde::{Deserialize, Serialize};

use super::{IngestError, SensorSample, TelemetryBatch};

#[derive(Debug, Deserialize)]
struct RawBatch {
    player_id: Option<String>,
    device_id: Option<String>,
    seq: Option<u64>,
    samples: Option<Vec<RawSample>>,
}

#[derive(Debug, Deserialize)]
struct RawSample {
    t: Option<f64>,
    acc: Option<Vec<Option<f64>>>,
    gyro: Option<Vec<Option<f64>>>,
    mag: Option<Vec<Option<f64>>>,
}

#[derive(Serialize)]
struct WireBatch<'a> {
    player_id: &'a str,
    device_id: &'a str,
    seq: u64,
    samples: Vec<WireSample>,
}

#[derive(Serialize)]
struct WireSample {
    t: f64,
    acc: [f64; 3],
    gyro: [f64; 3],
    mag: [f64; 3],
}

fn triple(raw: Option<Vec<Option<f64>>>, name: &str, index: usize) -> Result<[f64; 3], IngestError> {
    let values = raw.ok_or_else(|| IngestError::Validation {
        index: Some(index),
        reason: format!("missing field `{name}`"),
    })?;
    if values.len() != 3 {
        return Err(IngestError::Validation {
            index: Some(index),
            reason: format!("`{name}` must have 3 components, got {}", values.len()),
        });
    }
    let mut out = [0.0; 3];
    for (axis, v) in values.into_iter().enumerate() {
        match v {
            Some(x) if x.is_finite() => out[axis] = x,
            _ => {
                return Err(IngestError::Validation {
                    index: Some(index),
                    reason: format!("non-finite value in `{name}`[{axis}]"),
                })
            }
        }
    }
    Ok(out)
}

fn missing(field: &str) -> IngestError {
    IngestError::Validation {
        index: None,
        reason: format!("missing field `{field}`"),
    }
}

/// Parses and validates one JSON telemetry batch.
pub fn parse_telemetry_batch(payload: &[u8]) -> Result<TelemetryBatch, IngestError> {
    let raw: RawBatch = serde_json::from_slice(payload).map_err(|e| IngestError::Parse(e.to_string()))?;
    let player_id = raw.player_id.ok_or_else(|| missing("player_id"))?;
    let device_id = raw.device_id.ok_or_else(|| missing("device_id"))?;
    let seq = raw.seq.ok_or_else(|| missing("seq"))?;
    let raw_samples = raw.samples.ok_or_else(|| missing("samples"))?;
    if raw_samples.is_empty() {
        return Err(IngestError::Validation {
            index: None,
            reason: "batch contains no samples".into(),
        });
    }

    let mut samples = Vec::with_capacity(raw_samples.len());
    for (index, s) in raw_samples.into_iter().enumerate() {
        let t = match s.t {
            Some(t) if t.is_finite() && t >= 0.0 => t,
            Some(_) => {
                return Err(IngestError::Validation {
                    index: Some(index),
                    reason: "timestamp must be finite and non-negative".into(),
                })
            }
            None => {
                return Err(IngestError::Validation {
                    index: Some(index),
                    reason: "missing field `t`".into(),
                })
            }
        };
        let sample = SensorSample {
            t,
            acc: triple(s.acc, "acc", index)?,
            gyro: triple(s.gyro, "gyro", index)?,
            mag: triple(s.mag, "mag", index)?,
        };
        if let Some(prev) = samples.last() {
            let prev: &SensorSample = prev;
            if sample.t <= prev.t {
                return Err(IngestError::Validation {
                    index: Some(index),
                    reason: if sample.t == prev.t {
                        format!("duplicate timestamp {}", sample.t)
                    } else {
                        format!("timestamp {} precedes {}", sample.t, prev.t)
                    },
                });
            }
        }
        samples.push(sample);
    }

    Ok(TelemetryBatch {
        player_id,
        device_id,
        seq,
        samples,
    })
}

/// Serializes a batch to the wire schema (compact JSON, no trailing newline).
pub fn to_json(batch: &TelemetryBatch) -> String {
    let wire = WireBatch {
        player_id: &batch.player_id,
        device_id: &batch.device_id,
        seq: batch.seq,
        samples: batch
            .samples
            .iter()
            .map(|s| WireSample {
                t: s.t,
                acc: s.acc,
                gyro: s.gyro,
                mag: s.mag,
            })
            .collect(),
    };
    serde_json::to_string(&wire).expect("batch serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"player_id":"p1","device_id":"d1","seq":0,"samples":[{"t":0.00,"acc":[0,0,9.8],"gyro":[0,0,0],"mag":[1,0,0]},{"t":0.01,"acc":[0,0,9.8],"gyro":[0,0,0],"mag":[1,0,0]}]}"#;

    #[test]
    fn minimal_payload() {
        let b = parse_telemetry_batch(MINIMAL.as_bytes()).unwrap();
        assert_eq!(b.samples.len(), 2);
        assert_eq!(b.player_id, "p1");
        assert!((b.span() - 0.01).abs() < 1e-12);
        assert_eq!(b.samples[0].acc, [0.0, 0.0, 9.8]);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let p = MINIMAL.replace("\"t\":0.00", "\"t\":0.01");
        match parse_telemetry_batch(p.as_bytes()) {
            Err(IngestError::Validation { index, reason }) => {
                assert_eq!(index, Some(1));
                assert!(reason.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_channel_rejected() {
        let p = MINIMAL.replacen("[0,0,9.8]", "[0,null,9.8]", 1);
        match parse_telemetry_batch(p.as_bytes()) {
            Err(IngestError::Validation { index, reason }) => {
                assert_eq!(index, Some(0));
                assert!(reason.contains("non-finite"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            parse_telemetry_batch(b"{\"player_id\":"),
            Err(IngestError::Parse(_))
        ));
    }

    #[test]
    fn missing_sample_field_names_index() {
        let p = r#"{"player_id":"p","device_id":"d","seq":3,"samples":[{"t":0,"acc":[0,0,0],"gyro":[0,0,0],"mag":[0,0,0]},{"t":1,"acc":[0,0,0],"gyro":[0,0,0]}]}"#;
        match parse_telemetry_batch(p.as_bytes()) {
            Err(IngestError::Validation { index, reason }) => {
                assert_eq!(index, Some(1));
                assert!(reason.contains("mag"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_time_rejected() {
        let p = MINIMAL.replace("\"t\":0.00", "\"t\":-0.5");
        assert!(matches!(
            parse_telemetry_batch(p.as_bytes()),
            Err(IngestError::Validation { index: Some(0), .. })
        ));
    }
}
