//! Synthetic player cohorts: telemetry, event logs and metadata with
//! planted class differences.
//!
//! Each player plays back-to-back games of ~40 s rounds. Rounds contain
//! engagements (a run of shots ending in a kill, a death or nothing; at most
//! one death per round). Telemetry is a Gaussian noise floor plus movement
//! bursts, damped sinusoids `A·exp(−t/τ)·sin(2πft + φ)` on all six acc/gyro
//! channels, that start within a short delay after events or at spontaneous
//! instants. Lean-back episodes lower `acc_z` by a fixed step and the
//! magnetometer is a random-walk drift plus noise.
//!
//! The default profiles make low-skill players burst more after deaths and
//! during shootouts, while high-skill players have a larger gyro noise floor
//! and move spontaneously more often. Amplitudes are tuned so the 3×median
//! movement mask fires on bursts; they are synthetic, not measured.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamelog::{self, EventKind, GameEvent, PlayerMeta, SegmentParams, Session};
use crate::ingest::{self, Ack, SensorSample, TelemetryStream};
use crate::rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort config: {0}")]
    Config(String),
    #[error("player index {index} out of range (cohort has {n} players)")]
    PlayerIndex { index: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundModel {
    pub round_len: f64,
    /// Round lengths are uniform in `round_len ± round_jitter`.
    pub round_jitter: f64,
    pub rounds_per_game: usize,
    /// Idle time between games.
    pub game_break: f64,
}

impl Default for RoundModel {
    fn default() -> Self {
        RoundModel {
            round_len: 40.0,
            round_jitter: 5.0,
            rounds_per_game: 12,
            game_break: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstShape {
    /// Envelope decay constant, seconds.
    pub tau: f64,
    pub freq_hz: f64,
    /// Event-triggered bursts start uniformly in `[0, max_onset_delay]`
    /// seconds after the event.
    pub max_onset_delay: f64,
    /// Log-normal sigma applied to each burst's amplitude.
    pub amplitude_jitter: f64,
}

impl Default for BurstShape {
    fn default() -> Self {
        BurstShape {
            tau: 0.3,
            freq_hz: 3.0,
            max_onset_delay: 0.5,
            amplitude_jitter: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagModel {
    pub field: [f64; 3],
    /// Random-walk step sigma per sample.
    pub drift: f64,
    pub noise: f64,
}

impl Default for MagModel {
    fn default() -> Self {
        MagModel {
            field: [20.0, 5.0, -40.0],
            drift: 0.005,
            noise: 0.3,
        }
    }
}

/// Behavior parameters for one skill class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Poisson mean of engagements per round.
    pub engagements_per_round: f64,
    /// Each engagement fires `1 + Poisson(extra_shots)` shots.
    pub extra_shots: f64,
    /// Mean of the exponential gap between consecutive shots, seconds.
    pub shot_gap: f64,
    pub kill_prob: f64,
    pub death_prob: f64,
    pub burst_prob_kill: f64,
    pub burst_prob_death: f64,
    /// Per-shot burst probability.
    pub burst_prob_shot: f64,
    /// Spontaneous bursts per second.
    pub spontaneous_rate: f64,
    pub acc_noise: [f64; 3],
    pub gyro_noise: [f64; 3],
    pub acc_burst: [f64; 3],
    pub gyro_burst: [f64; 3],
    /// Lean-back episodes per minute.
    pub lean_rate: f64,
    /// Episode length range, seconds.
    pub lean_duration: [f64; 2],
    /// Drop of `acc_z` while leaning back.
    pub lean_step: f64,
}

impl ClassProfile {
    pub fn high_skill() -> Self {
        ClassProfile {
            engagements_per_round: 1.5,
            extra_shots: 3.0,
            shot_gap: 0.8,
            kill_prob: 0.45,
            death_prob: 0.25,
            burst_prob_kill: 0.2,
            burst_prob_death: 0.15,
            burst_prob_shot: 0.02,
            spontaneous_rate: 0.06,
            acc_noise: [0.05, 0.05, 0.05],
            gyro_noise: [0.78, 0.55, 0.5],
            acc_burst: [1.5, 1.5, 0.8],
            gyro_burst: [15.0, 15.0, 15.0],
            lean_rate: 0.5,
            lean_duration: [5.0, 30.0],
            lean_step: 1.0,
        }
    }

    pub fn low_skill() -> Self {
        ClassProfile {
            kill_prob: 0.3,
            death_prob: 0.4,
            burst_prob_kill: 0.2,
            burst_prob_death: 0.8,
            burst_prob_shot: 0.15,
            spontaneous_rate: 0.025,
            gyro_noise: [0.5, 0.5, 0.5],
            ..ClassProfile::high_skill()
        }
    }

    /// A profile with no events, no bursts and no lean-back: only the noise
    /// floor remains.
    pub fn silent() -> Self {
        ClassProfile {
            engagements_per_round: 0.0,
            burst_prob_kill: 0.0,
            burst_prob_death: 0.0,
            burst_prob_shot: 0.0,
            spontaneous_rate: 0.0,
            lean_rate: 0.0,
            ..ClassProfile::high_skill()
        }
    }

    fn validate(&self, which: &str) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(format!("{which}: {m}")));
        let rates = [
            ("engagements_per_round", self.engagements_per_round),
            ("extra_shots", self.extra_shots),
            ("spontaneous_rate", self.spontaneous_rate),
            ("lean_rate", self.lean_rate),
            ("lean_step", self.lean_step),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{name} must be a finite rate ≥ 0, got {v}"));
            }
        }
        let probs = [
            ("kill_prob", self.kill_prob),
            ("death_prob", self.death_prob),
            ("burst_prob_kill", self.burst_prob_kill),
            ("burst_prob_death", self.burst_prob_death),
            ("burst_prob_shot", self.burst_prob_shot),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.kill_prob + self.death_prob > 1.0 {
            return err("kill_prob + death_prob exceeds 1".into());
        }
        if !(self.shot_gap > 0.0) {
            return err(format!("shot_gap must be positive, got {}", self.shot_gap));
        }
        let [lo, hi] = self.lean_duration;
        if !(lo > 0.0 && lo <= hi) {
            return err(format!("lean_duration must satisfy 0 < min ≤ max, got [{lo}, {hi}]"));
        }
        for v in self
            .acc_noise
            .iter()
            .chain(&self.gyro_noise)
            .chain(&self.acc_burst)
            .chain(&self.gyro_burst)
        {
            if !(*v >= 0.0 && v.is_finite()) {
                return err(format!("noise and burst amplitudes must be finite and ≥ 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub seed: u64,
    pub sample_rate: f64,
    /// Players `0..n_high` are high-skill, the rest low-skill.
    pub n_high: usize,
    pub n_low: usize,
    /// Stream length in seconds for players without an explicit entry.
    pub duration: f64,
    /// Per-player stream lengths, indexed by player; entries beyond the
    /// list fall back to `duration`.
    pub durations: Vec<f64>,
    pub rounds: RoundModel,
    pub burst: BurstShape,
    pub mag: MagModel,
    pub gravity: f64,
    /// Log-normal sigma of per-player multipliers on noise levels, rates and
    /// probabilities.
    pub player_jitter: f64,
    pub high: ClassProfile,
    pub low: ClassProfile,
}

impl Default for CohortConfig {
    /// 19 players: nine high-skill players with 35-minute streams (10
    /// sessions each) and ten low-skill players whose shorter streams yield
    /// 9 + 9×8 sessions, 171 in total.
    fn default() -> Self {
        let mut durations = vec![2100.0; 9];
        durations.push(1650.0);
        durations.extend([1500.0; 9]);
        CohortConfig {
            seed: 2024,
            sample_rate: ingest::NOMINAL_RATE,
            n_high: 9,
            n_low: 10,
            duration: 2100.0,
            durations,
            rounds: RoundModel::default(),
            burst: BurstShape::default(),
            mag: MagModel::default(),
            gravity: 9.81,
            player_jitter: 0.2,
            high: ClassProfile::high_skill(),
            low: ClassProfile::low_skill(),
        }
    }
}

impl CohortConfig {
    /// Same cohort shape with both classes sharing the high-skill profile.
    pub fn null(&self) -> Self {
        CohortConfig {
            low: self.high,
            ..self.clone()
        }
    }

    pub fn n_players(&self) -> usize {
        self.n_high + self.n_low
    }

    pub fn player_duration(&self, index: usize) -> f64 {
        self.durations.get(index).copied().unwrap_or(self.duration)
    }

    pub fn player_id(&self, index: usize) -> String {
        format!("p{:02}", index + 1)
    }

    pub fn is_high_skill(&self, index: usize) -> bool {
        index < self.n_high
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(m));
        if self.n_players() == 0 {
            return err("cohort needs at least one player".into());
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return err(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if self.durations.len() > self.n_players() {
            return err(format!(
                "{} durations given for {} players",
                self.durations.len(),
                self.n_players()
            ));
        }
        for i in 0..self.n_players() {
            let d = self.player_duration(i);
            if !(d >= gamelog::SESSION_LEN && d.is_finite()) {
                return err(format!(
                    "player {i}: duration must be ≥ {} s, got {d}",
                    gamelog::SESSION_LEN
                ));
            }
        }
        let r = &self.rounds;
        if !(r.round_len > 0.0 && r.round_jitter >= 0.0 && r.round_jitter < r.round_len) {
            return err("round_len must be positive and exceed round_jitter".into());
        }
        if r.rounds_per_game == 0 || !(r.game_break >= 0.0) {
            return err("rounds_per_game must be ≥ 1 and game_break ≥ 0".into());
        }
        let b = &self.burst;
        if !(b.tau > 0.0 && b.freq_hz >= 0.0 && b.max_onset_delay >= 0.0 && b.amplitude_jitter >= 0.0) {
            return err("burst shape parameters must be non-negative with tau > 0".into());
        }
        if !(self.player_jitter >= 0.0) || !(self.mag.drift >= 0.0) || !(self.mag.noise >= 0.0) {
            return err("player_jitter and magnetometer noise must be ≥ 0".into());
        }
        self.high.validate("high")?;
        self.low.validate("low")
    }
}

/// Per-player parameters actually used for generation, after jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTruth {
    pub player_id: String,
    pub label: bool,
    pub profile: ClassProfile,
    pub n_spontaneous_bursts: usize,
    pub n_event_bursts: usize,
    pub n_lean_episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPlayer {
    pub meta: PlayerMeta,
    pub stream: TelemetryStream,
    pub events: Vec<GameEvent>,
    pub truth: PlayerTruth,
}

impl SyntheticPlayer {
    pub fn sessions(&self, params: &SegmentParams) -> Vec<Session> {
        let shootouts = gamelog::shootouts_from_events(&self.events);
        gamelog::segment_sessions(&self.stream, &self.events, &shootouts, &self.meta, params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub config: CohortConfig,
    pub players: Vec<SyntheticPlayer>,
}

impl SyntheticCohort {
    pub fn metas(&self) -> Vec<PlayerMeta> {
        self.players.iter().map(|p| p.meta.clone()).collect()
    }

    pub fn sessions(&self, params: &SegmentParams) -> Vec<Session> {
        self.players.iter().flat_map(|p| p.sessions(params)).collect()
    }
}

/// Coarse groups of the 31 features; four of them carry planted class
/// differences under the default profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    LeanBack,
    MedianStd,
    Moving,
    MovingKill,
    MovingDeath,
    MovingShootout,
}

impl FeatureFamily {
    pub fn of(name: &str) -> Option<FeatureFamily> {
        if name == "lean_back" {
            Some(FeatureFamily::LeanBack)
        } else if name.starts_with("med_") {
            Some(FeatureFamily::MedianStd)
        } else if name.starts_with("moving_kill_") {
            Some(FeatureFamily::MovingKill)
        } else if name.starts_with("moving_death_") {
            Some(FeatureFamily::MovingDeath)
        } else if name.starts_with("moving_shootout_") {
            Some(FeatureFamily::MovingShootout)
        } else if name.starts_with("moving_") {
            Some(FeatureFamily::Moving)
        } else {
            None
        }
    }
}

pub const PLANTED_FAMILIES: [FeatureFamily; 4] = [
    FeatureFamily::MedianStd,
    FeatureFamily::Moving,
    FeatureFamily::MovingDeath,
    FeatureFamily::MovingShootout,
];

fn jittered_profile(p: &ClassProfile, sigma: f64, rng: &mut ChaCha8Rng) -> ClassProfile {
    let ln = LogNormal::new(0.0, sigma).unwrap();
    let mut m = |v: f64| v * ln.sample(rng);
    let mut out = *p;
    out.engagements_per_round = m(p.engagements_per_round);
    out.spontaneous_rate = m(p.spontaneous_rate);
    out.lean_rate = m(p.lean_rate);
    out.burst_prob_kill = m(p.burst_prob_kill).min(1.0);
    out.burst_prob_death = m(p.burst_prob_death).min(1.0);
    out.burst_prob_shot = m(p.burst_prob_shot).min(1.0);
    for j in 0..3 {
        out.acc_noise[j] = m(p.acc_noise[j]);
        out.gyro_noise[j] = m(p.gyro_noise[j]);
    }
    out
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as usize
    }
}

/// Event times of a Poisson process with `rate` per second on `[0, end)`.
fn poisson_times(rate: f64, end: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate).unwrap();
    let mut t = gap.sample(rng);
    while t < end {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

fn generate_events(config: &CohortConfig, p: &ClassProfile, duration: f64, rng: &mut ChaCha8Rng) -> Vec<GameEvent> {
    let r = &config.rounds;
    let shot_gap = Exp::new(1.0 / p.shot_gap).unwrap();
    let mut events = Vec::new();
    let mut t0 = 0.0;
    let mut round = 0usize;
    while t0 < duration {
        let len = r.round_len + rng.gen_range(-r.round_jitter..=r.round_jitter);
        let round_end = (t0 + len).min(duration);
        let mut starts: Vec<f64> = (0..poisson(p.engagements_per_round, rng))
            .map(|_| t0 + rng.gen::<f64>() * len)
            .collect();
        starts.sort_by(f64::total_cmp);
        let mut last = t0;
        for start in starts {
            let mut t = start.max(last);
            let n_shots = 1 + poisson(p.extra_shots, rng);
            let mut ended = false;
            for k in 0..n_shots {
                if k > 0 {
                    t += shot_gap.sample(rng);
                }
                if t >= round_end {
                    ended = true;
                    break;
                }
                events.push(GameEvent {
                    t,
                    kind: EventKind::Shot,
                });
            }
            if ended {
                break;
            }
            last = t;
            let outcome_t = t + rng.gen_range(0.05..0.3);
            let u: f64 = rng.gen();
            if outcome_t >= round_end {
                break;
            }
            if u < p.kill_prob {
                events.push(GameEvent {
                    t: outcome_t,
                    kind: EventKind::Kill,
                });
                last = outcome_t;
            } else if u < p.kill_prob + p.death_prob {
                events.push(GameEvent {
                    t: outcome_t,
                    kind: EventKind::Death,
                });
                break;
            }
        }
        round += 1;
        t0 += len;
        if round.is_multiple_of(r.rounds_per_game) {
            t0 += r.game_break;
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}

struct Burst {
    onset: f64,
    amp: [f64; 6],
    phase: [f64; 6],
}

/// Generates player `index` of the cohort. Players are independent, each
/// drawing from its own stream seeded by the cohort seed and the index.
pub fn generate_player(config: &CohortConfig, index: usize) -> Result<SyntheticPlayer, SynthError> {
    config.validate()?;
    if index >= config.n_players() {
        return Err(SynthError::PlayerIndex {
            index,
            n: config.n_players(),
        });
    }
    let base = rng::mix(config.seed ^ rng::mix(index as u64));
    let mut param_rng = rng::seeded(base);
    let mut event_rng = rng::seeded(base ^ 1);
    let mut burst_rng = rng::seeded(base ^ 2);
    let mut noise_rng = rng::seeded(base ^ 3);

    let label = config.is_high_skill(index);
    let player_id = config.player_id(index);
    let class = if label { &config.high } else { &config.low };
    let profile = jittered_profile(class, config.player_jitter, &mut param_rng);
    let meta = PlayerMeta {
        player_id: player_id.clone(),
        exp_gt_1000h: label,
        age: param_rng.gen_range(18..=32) as f64,
        gender: param_rng.gen_bool(0.8) as u8,
    };
    let duration = config.player_duration(index);
    let events = generate_events(config, &profile, duration, &mut event_rng);

    let shape = &config.burst;
    let amp_ln = LogNormal::new(0.0, shape.amplitude_jitter).unwrap();
    let make_burst = |onset: f64, rng: &mut ChaCha8Rng| {
        let scale = amp_ln.sample(rng);
        let mut amp = [0.0; 6];
        let mut phase = [0.0; 6];
        for c in 0..6 {
            let base = if c < 3 {
                profile.acc_burst[c]
            } else {
                profile.gyro_burst[c - 3]
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            amp[c] = sign * base * scale;
            phase[c] = rng.gen::<f64>() * std::f64::consts::TAU;
        }
        Burst { onset, amp, phase }
    };
    let mut bursts = Vec::new();
    let mut n_event_bursts = 0;
    for e in &events {
        let p = match e.kind {
            EventKind::Kill => profile.burst_prob_kill,
            EventKind::Death => profile.burst_prob_death,
            EventKind::Shot => profile.burst_prob_shot,
        };
        if burst_rng.gen_bool(p) {
            let onset = e.t + burst_rng.gen::<f64>() * shape.max_onset_delay;
            bursts.push(make_burst(onset, &mut burst_rng));
            n_event_bursts += 1;
        }
    }
    let spontaneous = poisson_times(profile.spontaneous_rate, duration, &mut burst_rng);
    let n_spontaneous_bursts = spontaneous.len();
    for t in spontaneous {
        bursts.push(make_burst(t, &mut burst_rng));
    }
    bursts.sort_by(|a, b| a.onset.total_cmp(&b.onset));

    let lean: Vec<(f64, f64)> = poisson_times(profile.lean_rate / 60.0, duration, &mut burst_rng)
        .into_iter()
        .map(|s| {
            let [lo, hi] = profile.lean_duration;
            (s, s + burst_rng.gen_range(lo..=hi))
        })
        .collect();

    let n = (duration * config.sample_rate).round() as usize;
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let burst_len = 5.0 * shape.tau;
    let omega = std::f64::consts::TAU * shape.freq_hz;
    let mut samples = Vec::with_capacity(n);
    let mut mag_offset = [0.0; 3];
    let mut first_active = 0;
    let mut lean_at = 0;
    for i in 0..n {
        let t = i as f64 / config.sample_rate;
        let mut v = [0.0; 6];
        for c in 0..3 {
            v[c] = profile.acc_noise[c] * std_normal.sample(&mut noise_rng);
            v[c + 3] = profile.gyro_noise[c] * std_normal.sample(&mut noise_rng);
        }
        v[2] += config.gravity;

        while lean_at < lean.len() && lean[lean_at].1 <= t {
            lean_at += 1;
        }
        if lean[lean_at..].iter().take_while(|(s, _)| *s <= t).any(|(_, e)| t < *e) {
            v[2] -= profile.lean_step;
        }

        while first_active < bursts.len() && bursts[first_active].onset + burst_len <= t {
            first_active += 1;
        }
        for b in bursts[first_active..].iter().take_while(|b| b.onset <= t) {
            let dt = t - b.onset;
            if dt >= burst_len {
                continue;
            }
            let env = (-dt / shape.tau).exp();
            for (c, vc) in v.iter_mut().enumerate() {
                *vc += b.amp[c] * env * (omega * dt + b.phase[c]).sin();
            }
        }

        let mut mag = [0.0; 3];
        for c in 0..3 {
            mag_offset[c] += config.mag.drift * std_normal.sample(&mut noise_rng);
            mag[c] = config.mag.field[c] + mag_offset[c] + config.mag.noise * std_normal.sample(&mut noise_rng);
        }
        samples.push(SensorSample {
            t,
            acc: [v[0], v[1], v[2]],
            gyro: [v[3], v[4], v[5]],
            mag,
        });
    }

    Ok(SyntheticPlayer {
        truth: PlayerTruth {
            player_id: player_id.clone(),
            label,
            profile,
            n_spontaneous_bursts,
            n_event_bursts,
            n_lean_episodes: lean.len(),
        },
        stream: TelemetryStream {
            player_id,
            samples,
            nominal_rate: config.sample_rate,
        },
        meta,
        events,
    })
}

/// Generates every player. Deterministic per config, including the seed.
pub fn generate_cohort(config: &CohortConfig) -> Result<SyntheticCohort, SynthError> {
    use rayon::prelude::*;
    config.validate()?;
    let players = (0..config.n_players())
        .into_par_iter()
        .map(|i| generate_player(config, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SyntheticCohort {
        config: config.clone(),
        players,
    })
}

/// Writes one JSON batch per line, `per_batch` samples each.
pub fn write_telemetry_jsonl(
    stream: &TelemetryStream,
    device_id: &str,
    per_batch: usize,
    out: &mut impl Write,
) -> io::Result<()> {
    for batch in stream.to_batches(device_id, per_batch) {
        writeln!(out, "{}", ingest::to_json(&batch))?;
    }
    Ok(())
}

pub fn device_id_for(player_id: &str) -> String {
    format!("chair-{player_id}")
}

/// Samples per one-second batch.
pub fn batch_size(sample_rate: f64) -> usize {
    (sample_rate.round() as usize).max(1)
}

/// Writes `telemetry/<id>.jsonl`, `events/<id>.csv` and `players.json`
/// under `dir`.
pub fn write_cohort(cohort: &SyntheticCohort, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir.join("telemetry"))?;
    fs::create_dir_all(dir.join("events"))?;
    let per_batch = batch_size(cohort.config.sample_rate);
    for p in &cohort.players {
        let id = &p.meta.player_id;
        let mut w = BufWriter::new(fs::File::create(dir.join("telemetry").join(format!("{id}.jsonl")))?);
        write_telemetry_jsonl(&p.stream, &device_id_for(id), per_batch, &mut w)?;
        w.flush()?;
        fs::write(
            dir.join("events").join(format!("{id}.csv")),
            gamelog::write_event_log(&p.events),
        )?;
    }
    let metas = serde_json::to_string_pretty(&cohort.metas()).unwrap();
    fs::write(dir.join("players.json"), metas + "\n")
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transport failure for {player_id} at batch {resume_seq}: {reason}")]
    Transport {
        player_id: String,
        /// First batch that was not acknowledged; replay from here.
        resume_seq: u64,
        accepted: usize,
        reason: String,
    },
    #[error("server rejected {player_id} batch {seq} with status {status}: {body}")]
    Rejected {
        player_id: String,
        seq: u64,
        status: u16,
        body: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub batches: usize,
    pub accepted: usize,
    pub duplicates: usize,
}

impl ReplaySummary {
    fn add(&mut self, other: ReplaySummary) {
        self.batches += other.batches;
        self.accepted += other.accepted;
        self.duplicates += other.duplicates;
    }
}

/// Posts a stream as consecutive 1-second batches starting at `from_seq`.
pub fn replay_stream(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    stream: &TelemetryStream,
    from_seq: u64,
) -> Result<ReplaySummary, ReplayError> {
    let url = format!("{}/v1/telemetry", endpoint.trim_end_matches('/'));
    let device = device_id_for(&stream.player_id);
    let mut summary = ReplaySummary::default();
    for batch in stream
        .to_batches(&device, batch_size(stream.nominal_rate))
        .into_iter()
        .skip(from_seq as usize)
    {
        let transport = |reason: String| ReplayError::Transport {
            player_id: stream.player_id.clone(),
            resume_seq: batch.seq,
            accepted: summary.accepted,
            reason,
        };
        let resp = client
            .post(&url)
            .header("content-type", "application/json")
            .body(ingest::to_json(&batch))
            .send()
            .map_err(|e| transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ReplayError::Rejected {
                player_id: stream.player_id.clone(),
                seq: batch.seq,
                status: status.as_u16(),
                body,
            });
        }
        let ack: Ack = serde_json::from_str(&body).map_err(|e| transport(format!("bad acknowledgment: {e}")))?;
        summary.batches += 1;
        summary.accepted += ack.accepted;
        summary.duplicates += ack.duplicate as usize;
    }
    Ok(summary)
}

/// Replays every player concurrently, one connection per player.
pub fn replay_cohort(cohort: &SyntheticCohort, endpoint: &str) -> Result<ReplaySummary, ReplayError> {
    let client = reqwest::blocking::Client::new();
    let results: Vec<Result<ReplaySummary, ReplayError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cohort
            .players
            .iter()
            .map(|p| {
                let client = client.clone();
                s.spawn(move || replay_stream(&client, endpoint, &p.stream, 0))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replay thread panicked"))
            .collect()
    });
    let mut total = ReplaySummary::default();
    for r in results {
        total.add(r?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CohortConfig {
        CohortConfig {
            seed,
            n_high: 1,
            n_low: 1,
            duration: 200.0,
            durations: Vec::new(),
            ..CohortConfig::default()
        }
    }

    #[test]
    fn default_cohort_shape() {
        let c = CohortConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_players(), 19);
        let sessions: usize = (0..19)
            .map(|i| ((c.player_duration(i) / 180.0).floor() as usize).min(10))
            .sum();
        assert_eq!(sessions, 171);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_player(&small(5), 0).unwrap();
        let b = generate_player(&small(5), 0).unwrap();
        assert_eq!(a, b);
        let c = generate_player(&small(6), 0).unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn stream_and_events_share_clock() {
        let p = generate_player(&small(1), 1).unwrap();
        assert_eq!(p.stream.samples.len(), 20000);
        assert!((p.stream.duration() - 199.99).abs() < 1e-9);
        assert!(!p.events.is_empty());
        assert!(p.events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(p.events.iter().all(|e| e.t >= 0.0 && e.t < 200.0));
        assert!(p.stream.samples.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(p.sessions(&SegmentParams::default()).len(), 1);
    }

    #[test]
    fn at_most_one_death_per_round() {
        let cfg = CohortConfig {
            rounds: RoundModel {
                round_jitter: 0.0,
                game_break: 0.0,
                ..RoundModel::default()
            },
            ..small(3)
        };
        let p = generate_player(&cfg, 1).unwrap();
        let mut per_round = std::collections::BTreeMap::new();
        for e in p.events.iter().filter(|e| e.kind == EventKind::Death) {
            *per_round.entry((e.t / 40.0) as usize).or_insert(0) += 1;
        }
        assert!(per_round.values().all(|&n| n == 1));
    }

    #[test]
    fn silent_profile_has_no_events() {
        let cfg = CohortConfig {
            high: ClassProfile::silent(),
            low: ClassProfile::silent(),
            ..small(2)
        };
        let p = generate_player(&cfg, 0).unwrap();
        assert!(p.events.is_empty());
        assert_eq!(
            p.truth.n_spontaneous_bursts + p.truth.n_event_bursts + p.truth.n_lean_episodes,
            0
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small(0);
        c.low.burst_prob_death = 1.5;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        let c = CohortConfig {
            duration: 100.0,
            ..small(0)
        };
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.high.spontaneous_rate = -1.0;
        assert!(c.validate().is_err());
        assert!(matches!(
            generate_player(&small(0), 5),
            Err(SynthError::PlayerIndex { .. })
        ));
    }

    #[test]
    fn families() {
        assert_eq!(
            FeatureFamily::of("moving_death_gyro_x"),
            Some(FeatureFamily::MovingDeath)
        );
        assert_eq!(FeatureFamily::of("moving_acc_y"), Some(FeatureFamily::Moving));
        assert_eq!(FeatureFamily::of("med_gyro_x_std"), Some(FeatureFamily::MedianStd));
        assert_eq!(FeatureFamily::of("lean_back"), Some(FeatureFamily::LeanBack));
        assert_eq!(FeatureFamily::of("kdr"), None);
    }

    #[test]
    fn config_json_round_trip() {
        let c = CohortConfig::default();
        let back: CohortConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: CohortConfig = serde_json::from_str(r#"{"seed": 9}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.n_players(), 19);
    }
}
