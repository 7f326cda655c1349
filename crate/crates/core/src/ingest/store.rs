//! Append-only per-player record log.
//!
//! Layout under the store root:
//!
//! * `index.json`: the list of known players and their log file names.
//! * `<hex(player_id)>.log`: one record per accepted batch.
//!
//! Record framing (all integers little-endian):
//!
//! ```text
//! magic "SCR1" | payload_len: u32 | crc32(payload): u32 | payload
//! payload = seq: u64 | device_len: u16 | device_id | n: u32 | n × 10 × f64
//! ```
//!
//! Each sample is stored as `t, acc[3], gyro[3], mag[3]` in raw IEEE-754 form,
//! so loading returns bit-identical values.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{IngestError, SensorSample, TelemetryBatch, TelemetryStream};

const MAGIC: &[u8; 4] = b"SCR1";
const HEADER_LEN: usize = 12;
const SAMPLE_BYTES: usize = 80;
const INDEX_FILE: &str = "index.json";

/// Result of appending one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: usize,
    pub duplicate: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    players: BTreeMap<String, String>,
}

#[derive(Debug)]
struct PlayerLog {
    path: PathBuf,
    /// Accepted sequence numbers per device.
    seen: HashMap<String, HashSet<u64>>,
    last_t: Option<f64>,
}

struct Record {
    seq: u64,
    device_id: String,
    samples: Vec<SensorSample>,
}

/// Thread-safe handle to an on-disk stream store.
///
/// Appends to one player are serialized behind a per-player lock; different
/// players proceed concurrently. Loads take the same lock, so a reader never
/// observes a partially written record.
pub struct StreamStore {
    root: PathBuf,
    players: Mutex<HashMap<String, Arc<Mutex<PlayerLog>>>>,
    index: Mutex<Index>,
}

fn file_name_for(player_id: &str) -> String {
    let hex: String = player_id.bytes().map(|b| format!("{b:02x}")).collect();
    format!("{hex}.log")
}

fn encode_record(batch: &TelemetryBatch) -> Vec<u8> {
    let dev = batch.device_id.as_bytes();
    let dev_len = u16::try_from(dev.len()).expect("device id longer than 65535 bytes");
    let mut payload = Vec::with_capacity(14 + dev.len() + batch.samples.len() * SAMPLE_BYTES);
    payload.extend_from_slice(&batch.seq.to_le_bytes());
    payload.extend_from_slice(&dev_len.to_le_bytes());
    payload.extend_from_slice(dev);
    payload.extend_from_slice(&(batch.samples.len() as u32).to_le_bytes());
    for s in &batch.samples {
        for v in std::iter::once(&s.t).chain(&s.acc).chain(&s.gyro).chain(&s.mag) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes(b.try_into().unwrap())
}
fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}
fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().unwrap())
}
fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().unwrap())
}

fn decode_records(path: &Path) -> Result<Vec<Record>, IngestError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let file = path.display().to_string();
    let corrupt = |offset: usize, reason: &str| IngestError::Integrity {
        file: file.clone(),
        offset: offset as u64,
        reason: reason.to_string(),
    };

    let mut records = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let start = pos;
        if bytes.len() - pos < HEADER_LEN {
            return Err(corrupt(start, "truncated record header"));
        }
        if &bytes[pos..pos + 4] != MAGIC {
            return Err(corrupt(start, "bad record magic"));
        }
        let len = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let crc = le_u32(&bytes[pos + 8..pos + 12]);
        pos += HEADER_LEN;
        if bytes.len() - pos < len {
            return Err(corrupt(start, "truncated record payload"));
        }
        let payload = &bytes[pos..pos + len];
        if crc32fast::hash(payload) != crc {
            return Err(corrupt(start, "checksum mismatch"));
        }
        pos += len;

        if payload.len() < 14 {
            return Err(corrupt(start, "payload too short"));
        }
        let seq = le_u64(&payload[0..8]);
        let dev_len = le_u16(&payload[8..10]) as usize;
        let body = &payload[10..];
        if body.len() < dev_len + 4 {
            return Err(corrupt(start, "payload too short"));
        }
        let device_id =
            String::from_utf8(body[..dev_len].to_vec()).map_err(|_| corrupt(start, "device id is not UTF-8"))?;
        let n = le_u32(&body[dev_len..dev_len + 4]) as usize;
        let data = &body[dev_len + 4..];
        if data.len() != n * SAMPLE_BYTES {
            return Err(corrupt(start, "sample count does not match payload length"));
        }
        let samples = data
            .chunks_exact(SAMPLE_BYTES)
            .map(|c| {
                let f = |i: usize| le_f64(&c[i * 8..i * 8 + 8]);
                SensorSample {
                    t: f(0),
                    acc: [f(1), f(2), f(3)],
                    gyro: [f(4), f(5), f(6)],
                    mag: [f(7), f(8), f(9)],
                }
            })
            .collect();
        records.push(Record {
            seq,
            device_id,
            samples,
        });
    }
    Ok(records)
}

impl StreamStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, IngestError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let index_path = root.join(INDEX_FILE);
        let index = if index_path.exists() {
            let text = fs::read_to_string(&index_path)?;
            serde_json::from_str(&text).map_err(|e| IngestError::Integrity {
                file: index_path.display().to_string(),
                offset: 0,
                reason: e.to_string(),
            })?
        } else {
            Index::default()
        };
        Ok(StreamStore {
            root,
            players: Mutex::new(HashMap::new()),
            index: Mutex::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Known player ids, sorted.
    pub fn player_ids(&self) -> Vec<String> {
        self.index.lock().unwrap().players.keys().cloned().collect()
    }

    fn player_log(&self, player_id: &str, create: bool) -> Result<Arc<Mutex<PlayerLog>>, IngestError> {
        let mut players = self.players.lock().unwrap();
        if let Some(log) = players.get(player_id) {
            return Ok(Arc::clone(log));
        }
        let known = self.index.lock().unwrap().players.get(player_id).cloned();
        let file = match known {
            Some(f) => f,
            None if create => file_name_for(player_id),
            None => return Err(IngestError::NotFound(player_id.to_string())),
        };
        let path = self.root.join(&file);
        let mut log = PlayerLog {
            path: path.clone(),
            seen: HashMap::new(),
            last_t: None,
        };
        if path.exists() {
            for rec in decode_records(&path)? {
                log.seen.entry(rec.device_id).or_default().insert(rec.seq);
                if let Some(s) = rec.samples.last() {
                    log.last_t = Some(s.t);
                }
            }
        }
        let log = Arc::new(Mutex::new(log));
        players.insert(player_id.to_string(), Arc::clone(&log));
        Ok(log)
    }

    fn register(&self, player_id: &str) -> Result<(), IngestError> {
        let mut index = self.index.lock().unwrap();
        if index.players.contains_key(player_id) {
            return Ok(());
        }
        index.players.insert(player_id.to_string(), file_name_for(player_id));
        let tmp = self.root.join(format!("{INDEX_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&*index).unwrap())?;
        fs::rename(&tmp, self.root.join(INDEX_FILE))?;
        Ok(())
    }

    /// Appends a validated batch. Replays of an already accepted
    /// `(player_id, device_id, seq)` are acknowledged as duplicates and
    /// leave the stream untouched.
    pub fn append(&self, batch: &TelemetryBatch) -> Result<Ack, IngestError> {
        let log = self.player_log(&batch.player_id, true)?;
        let mut log = log.lock().unwrap();

        if log.seen.get(&batch.device_id).is_some_and(|s| s.contains(&batch.seq)) {
            return Ok(Ack {
                accepted: 0,
                duplicate: true,
            });
        }
        let first_t = match batch.samples.first() {
            Some(s) => s.t,
            None => {
                return Err(IngestError::Validation {
                    index: None,
                    reason: "batch contains no samples".into(),
                })
            }
        };
        if let Some(last_t) = log.last_t {
            if first_t <= last_t {
                return Err(IngestError::Ordering {
                    player_id: batch.player_id.clone(),
                    first_t,
                    last_t,
                });
            }
        }

        let bytes = encode_record(batch);
        let mut file = OpenOptions::new().create(true).append(true).open(&log.path)?;
        file.write_all(&bytes)?;
        file.flush()?;
        drop(file);
        self.register(&batch.player_id)?;

        log.seen.entry(batch.device_id.clone()).or_default().insert(batch.seq);
        log.last_t = batch.samples.last().map(|s| s.t);
        Ok(Ack {
            accepted: batch.samples.len(),
            duplicate: false,
        })
    }

    /// Reads a player's full stream, re-checking framing and ordering.
    pub fn load_stream(&self, player_id: &str) -> Result<TelemetryStream, IngestError> {
        let log = self.player_log(player_id, false)?;
        let log = log.lock().unwrap();
        if !log.path.exists() {
            return Err(IngestError::NotFound(player_id.to_string()));
        }
        let mut samples: Vec<SensorSample> = Vec::new();
        for rec in decode_records(&log.path)? {
            for s in rec.samples {
                if !s.is_finite() {
                    return Err(IngestError::Integrity {
                        file: log.path.display().to_string(),
                        offset: 0,
                        reason: format!("non-finite sample at t={}", s.t),
                    });
                }
                if samples.last().is_some_and(|p| s.t <= p.t) {
                    return Err(IngestError::Integrity {
                        file: log.path.display().to_string(),
                        offset: 0,
                        reason: format!("timestamps not increasing at t={}", s.t),
                    });
                }
                samples.push(s);
            }
        }
        Ok(TelemetryStream::new(player_id, samples))
    }
}
