//! Game-event logs, shootout detection, session segmentation and KDR.
//!
//! Event logs use a small line format, one event per line:
//!
//! ```text
//! # comment
//! 12.40,shot
//! 12.95,kill
//! 40.10,death
//! ```
//!
//! Event times share the telemetry device clock.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{SensorSample, TelemetryStream};

pub const SESSION_LEN: f64 = 180.0;
pub const MAX_SESSIONS: usize = 10;
pub const SHOOTOUT_MIN_SHOTS: usize = 3;
pub const SHOOTOUT_MAX_GAP: f64 = 3.0;
pub const KDR_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Kill,
    Death,
    Shot,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Kill => "kill",
            EventKind::Death => "death",
            EventKind::Shot => "shot",
        })
    }
}

impl FromStr for EventKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "kill" => Ok(EventKind::Kill),
            "death" => Ok(EventKind::Death),
            "shot" => Ok(EventKind::Shot),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// A run of closely spaced shots, spanning first to last shot.
///
/// Intervals clipped at a session boundary keep only the shots inside the
/// session, so their `shot_count` may drop below the detection minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootoutInterval {
    pub start: f64,
    pub end: f64,
    pub shot_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerMeta {
    pub player_id: String,
    pub exp_gt_1000h: bool,
    pub age: f64,
    /// 0 woman, 1 man.
    pub gender: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub player_id: String,
    /// Index of the session within the player's stream.
    pub index: usize,
    pub start: f64,
    pub duration: f64,
    pub samples: Vec<SensorSample>,
    pub events: Vec<GameEvent>,
    pub shootouts: Vec<ShootoutInterval>,
    pub kdr: f64,
    pub label: bool,
    pub age: f64,
    pub gender: u8,
}

impl Session {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn id(&self) -> String {
        format!("{}#{}", self.player_id, self.index)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GameLogError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid player metadata: {0}")]
    Meta(String),
}

/// Parses the `t,kind` event format. Blank lines and `#` comments are
/// ignored; the result is sorted by time, stable for ties.
pub fn parse_event_log(text: &str) -> Result<Vec<GameEvent>, GameLogError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| GameLogError::Parse { line: i + 1, reason };
        let (t, kind) = line
            .split_once(',')
            .ok_or_else(|| err(format!("expected `t,kind`, got {line:?}")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| err(format!("non-numeric time {:?}", t.trim())))?;
        if !t.is_finite() || t < 0.0 {
            return Err(err(format!("time must be finite and non-negative, got {t}")));
        }
        let kind: EventKind = kind
            .trim()
            .parse()
            .map_err(|_| err(format!("unknown event kind {:?}", kind.trim())))?;
        events.push(GameEvent { t, kind });
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(events)
}

/// Renders events in the `t,kind` format.
pub fn write_event_log(events: &[GameEvent]) -> String {
    let mut out = String::from("# t,kind\n");
    for e in events {
        out.push_str(&format!("{},{}\n", e.t, e.kind));
    }
    out
}

/// Parses a JSON array of player metadata records.
pub fn parse_player_meta(json: &str) -> Result<Vec<PlayerMeta>, GameLogError> {
    let metas: Vec<PlayerMeta> = serde_json::from_str(json).map_err(|e| GameLogError::Meta(e.to_string()))?;
    for m in &metas {
        if !(m.age > 0.0) {
            return Err(GameLogError::Meta(format!(
                "player {}: age must be positive",
                m.player_id
            )));
        }
        if m.gender > 1 {
            return Err(GameLogError::Meta(format!(
                "player {}: gender must be 0 or 1",
                m.player_id
            )));
        }
    }
    Ok(metas)
}

/// Finds maximal runs of shots whose consecutive gaps are strictly below
/// `max_gap` and which contain at least `min_shots` shots.
pub fn detect_shootouts(shots: &[f64], min_shots: usize, max_gap: f64) -> Vec<ShootoutInterval> {
    let mut out = Vec::new();
    let mut run_start = 0;
    for i in 1..=shots.len() {
        let breaks = i == shots.len() || shots[i] - shots[i - 1] >= max_gap;
        if breaks {
            let len = i - run_start;
            if len >= min_shots.max(1) && len > 0 {
                out.push(ShootoutInterval {
                    start: shots[run_start],
                    end: shots[i - 1],
                    shot_count: len,
                });
            }
            run_start = i;
        }
    }
    out
}

/// Shootouts from an event list using the default rule (3 shots, gaps < 3 s).
pub fn shootouts_from_events(events: &[GameEvent]) -> Vec<ShootoutInterval> {
    let shots: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == EventKind::Shot)
        .map(|e| e.t)
        .collect();
    detect_shootouts(&shots, SHOOTOUT_MIN_SHOTS, SHOOTOUT_MAX_GAP)
}

/// How KDR is resolved when the player never died.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdrPolicy {
    /// Value when deaths = 0 and kills > 0; also the upper clip.
    pub bound: f64,
    /// Value when kills = deaths = 0.
    pub idle_value: f64,
}

impl Default for KdrPolicy {
    fn default() -> Self {
        KdrPolicy {
            bound: KDR_BOUND,
            idle_value: 0.0,
        }
    }
}

pub fn session_kdr(events: &[GameEvent]) -> f64 {
    session_kdr_with(events, KdrPolicy::default())
}

pub fn session_kdr_with(events: &[GameEvent], policy: KdrPolicy) -> f64 {
    let kills = events.iter().filter(|e| e.kind == EventKind::Kill).count();
    let deaths = events.iter().filter(|e| e.kind == EventKind::Death).count();
    match (kills, deaths) {
        (0, 0) => policy.idle_value,
        (_, 0) => policy.bound,
        (k, d) => (k as f64 / d as f64).min(policy.bound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub session_len: f64,
    pub max_sessions: usize,
    pub kdr: KdrPolicy,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            session_len: SESSION_LEN,
            max_sessions: MAX_SESSIONS,
            kdr: KdrPolicy::default(),
        }
    }
}

/// Cuts a stream into consecutive, non-overlapping windows of
/// `session_len` seconds starting at the first sample. Only fully covered
/// windows are emitted; a window counts as covered when the last sample is
/// within one nominal sample period of its end.
pub fn segment_sessions(
    stream: &TelemetryStream,
    events: &[GameEvent],
    shootouts: &[ShootoutInterval],
    meta: &PlayerMeta,
    params: &SegmentParams,
) -> Vec<Session> {
    let (first, last) = match (stream.samples.first(), stream.samples.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Vec::new(),
    };
    let period = 1.0 / stream.nominal_rate;
    let len = params.session_len;
    let shots: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == EventKind::Shot)
        .map(|e| e.t)
        .collect();

    let mut sessions = Vec::new();
    let mut lo = 0usize;
    for index in 0..params.max_sessions {
        let start = first + index as f64 * len;
        let end = start + len;
        if end > last + period + 1e-9 {
            break;
        }
        while lo < stream.samples.len() && stream.samples[lo].t < start {
            lo += 1;
        }
        let mut hi = lo;
        while hi < stream.samples.len() && stream.samples[hi].t < end {
            hi += 1;
        }
        let in_window = |t: f64| t >= start && t < end;
        let events_in: Vec<GameEvent> = events.iter().copied().filter(|e| in_window(e.t)).collect();
        let shootouts_in = shootouts
            .iter()
            .filter(|s| s.end >= start && s.start < end)
            .filter_map(|s| {
                // clipped interval spans the shots that fall inside the window
                let inside: Vec<f64> = shots
                    .iter()
                    .copied()
                    .filter(|&t| t >= s.start && t <= s.end && in_window(t))
                    .collect();
                Some(ShootoutInterval {
                    start: *inside.first()?,
                    end: *inside.last()?,
                    shot_count: inside.len(),
                })
            })
            .collect();
        sessions.push(Session {
            player_id: meta.player_id.clone(),
            index,
            start,
            duration: len,
            samples: stream.samples[lo..hi].to_vec(),
            kdr: session_kdr_with(&events_in, params.kdr),
            events: events_in,
            shootouts: shootouts_in,
            label: meta.exp_gt_1000h,
            age: meta.age,
            gender: meta.gender,
        });
        lo = hi;
    }
    sessions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(seconds: f64) -> TelemetryStream {
        let n = (seconds * 100.0).round() as usize;
        let samples = (0..n)
            .map(|i| SensorSample {
                t: i as f64 / 100.0,
                acc: [0.0, 0.0, 9.8],
                gyro: [0.0; 3],
                mag: [1.0, 0.0, 0.0],
            })
            .collect();
        TelemetryStream::new("p", samples)
    }

    fn meta() -> PlayerMeta {
        PlayerMeta {
            player_id: "p".into(),
            exp_gt_1000h: true,
            age: 22.0,
            gender: 1,
        }
    }

    #[test]
    fn parse_examples() {
        let ev = parse_event_log("1.5,shot\n2.0,kill").unwrap();
        assert_eq!(
            ev,
            vec![
                GameEvent {
                    t: 1.5,
                    kind: EventKind::Shot
                },
                GameEvent {
                    t: 2.0,
                    kind: EventKind::Kill
                }
            ]
        );
        assert!(parse_event_log("").unwrap().is_empty());
        assert!(matches!(
            parse_event_log("3.0,frag"),
            Err(GameLogError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_sorts_stably_and_skips_comments() {
        let ev = parse_event_log("# header\n5,death\n\n1,shot\n1,kill\n").unwrap();
        let kinds: Vec<_> = ev.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::Shot, EventKind::Kill, EventKind::Death]);
        assert!(matches!(
            parse_event_log("1,shot\nabc,kill"),
            Err(GameLogError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn event_log_round_trip() {
        let ev = parse_event_log("0.1,shot\n0.25,death\n7,kill").unwrap();
        assert_eq!(parse_event_log(&write_event_log(&ev)).unwrap(), ev);
    }

    #[test]
    fn shootout_examples() {
        let s = detect_shootouts(&[0.0, 1.0, 2.0], 3, 3.0);
        assert_eq!(
            s,
            vec![ShootoutInterval {
                start: 0.0,
                end: 2.0,
                shot_count: 3
            }]
        );
        let s = detect_shootouts(&[0.0, 1.0, 5.0, 6.0, 7.5], 3, 3.0);
        assert_eq!(
            s,
            vec![ShootoutInterval {
                start: 5.0,
                end: 7.5,
                shot_count: 3
            }]
        );
        assert!(detect_shootouts(&[0.0, 4.0, 8.0], 3, 3.0).is_empty());
        assert!(detect_shootouts(&[], 3, 3.0).is_empty());
    }

    #[test]
    fn gap_of_exactly_three_breaks_run() {
        assert!(detect_shootouts(&[0.0, 3.0, 6.0], 3, 3.0).is_empty());
    }

    #[test]
    fn kdr_examples() {
        let ev = |k: usize, d: usize| {
            let mut v = vec![
                GameEvent {
                    t: 0.0,
                    kind: EventKind::Kill
                };
                k
            ];
            v.extend(vec![
                GameEvent {
                    t: 1.0,
                    kind: EventKind::Death
                };
                d
            ]);
            v
        };
        assert_eq!(session_kdr(&ev(5, 0)), 10.0);
        assert_eq!(session_kdr(&ev(3, 2)), 1.5);
        assert_eq!(session_kdr(&ev(0, 0)), 0.0);
        assert_eq!(session_kdr(&ev(30, 1)), 10.0);
        let lenient = KdrPolicy {
            bound: 10.0,
            idle_value: 1.0,
        };
        assert_eq!(session_kdr_with(&ev(0, 0), lenient), 1.0);
    }

    #[test]
    fn session_counts() {
        let p = SegmentParams::default();
        assert_eq!(
            segment_sessions(&stream_of(35.0 * 60.0), &[], &[], &meta(), &p).len(),
            10
        );
        assert_eq!(segment_sessions(&stream_of(200.0), &[], &[], &meta(), &p).len(), 1);
        assert_eq!(segment_sessions(&stream_of(100.0), &[], &[], &meta(), &p).len(), 0);
        assert_eq!(segment_sessions(&stream_of(360.0), &[], &[], &meta(), &p).len(), 2);
        assert_eq!(segment_sessions(&stream_of(359.5), &[], &[], &meta(), &p).len(), 1);
    }

    #[test]
    fn sessions_are_disjoint_exact_windows() {
        let s = segment_sessions(&stream_of(600.0), &[], &[], &meta(), &SegmentParams::default());
        assert_eq!(s.len(), 3);
        for (i, w) in s.iter().enumerate() {
            assert_eq!(w.samples.len(), 18000);
            assert_eq!(w.start, i as f64 * 180.0);
            assert!(w.samples.iter().all(|x| x.t >= w.start && x.t < w.end()));
        }
    }

    #[test]
    fn events_and_shootouts_are_clipped() {
        let events = parse_event_log("10,kill\n100,death\n178,shot\n179,shot\n180.5,shot\n181,shot\n200,kill").unwrap();
        let shootouts = shootouts_from_events(&events);
        assert_eq!(shootouts.len(), 1);
        let s = segment_sessions(
            &stream_of(400.0),
            &events,
            &shootouts,
            &meta(),
            &SegmentParams::default(),
        );
        assert_eq!(
            s[0].shootouts,
            vec![ShootoutInterval {
                start: 178.0,
                end: 179.0,
                shot_count: 2
            }]
        );
        assert_eq!(
            s[1].shootouts,
            vec![ShootoutInterval {
                start: 180.5,
                end: 181.0,
                shot_count: 2
            }]
        );
        assert_eq!(s[0].kdr, 1.0);
        assert_eq!(s[1].kdr, 10.0);
        assert!(s[1].events.iter().all(|e| e.t >= 180.0 && e.t < 360.0));
    }

    #[test]
    fn player_meta_validation() {
        let ok = r#"[{"player_id":"a","exp_gt_1000h":true,"age":25,"gender":1}]"#;
        assert_eq!(parse_player_meta(ok).unwrap().len(), 1);
        let bad = r#"[{"player_id":"a","exp_gt_1000h":true,"age":0,"gender":1}]"#;
        assert!(parse_player_meta(bad).is_err());
    }
}
