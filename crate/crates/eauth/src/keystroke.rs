//! Keystroke dynamics: dwell/flight feature extraction, statistical typing
//! models, and scaled-distance verification.
//!
//! Flight time is press-to-press (`down[i+1] - down[i]`), which stays
//! positive under rollover typing where a key is released after the next
//! one is pressed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Instrument, VerificationOutcome};

/// Minimum probe length the scorer accepts.
pub const MIN_PROBE_KEYSTROKES: usize = 50;

/// Floor on per-feature standard deviations, milliseconds.
pub const STD_FLOOR_MS: f64 = 5.0;

/// Model entries observed fewer than this many times fall back to the
/// global statistics at scoring time.
const MIN_ENTRY_COUNT: u64 = 3;

#[derive(Debug, Error)]
pub enum KeystrokeError {
    #[error("event stream not sorted by key-down time at index {index}")]
    UnsortedStream { index: usize },
    #[error("negative dwell at index {index}: up precedes down")]
    NegativeDwell { index: usize },
    #[error("too few keystrokes: {got}, policy requires {needed}")]
    TooFewKeystrokes { got: usize, needed: usize },
    #[error("probe too short: {got} keystrokes, scoring floor is {needed}")]
    ProbeTooShort { got: usize, needed: usize },
    #[error("no typing model available")]
    NoModel,
    #[error("malformed event stream: {0}")]
    MalformedStream(String),
}

/// One key press/release pair. Timestamps are milliseconds on a shared
/// monotonic clock; key codes are case-insensitive symbolic names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub key: String,
    pub down_ms: f64,
    pub up_ms: f64,
}

/// Extracted dwell and flight times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeFeatures {
    /// (key, milliseconds held).
    pub dwell: Vec<(String, f64)>,
    /// (key pair, press-to-press milliseconds).
    pub flight: Vec<(String, f64)>,
}

impl KeystrokeFeatures {
    pub fn keystrokes(&self) -> usize {
        self.dwell.len()
    }
}

fn pair_key(a: &str, b: &str) -> String {
    format!("{a}|{b}")
}

fn normalize_key(k: &str) -> String {
    k.to_lowercase()
}

/// Dwell `up - down` per event and press-to-press flight between
/// consecutive events.
pub fn extract_features(stream: &[KeyEvent]) -> Result<KeystrokeFeatures, KeystrokeError> {
    let mut dwell = Vec::with_capacity(stream.len());
    let mut flight = Vec::with_capacity(stream.len().saturating_sub(1));
    for (i, ev) in stream.iter().enumerate() {
        if ev.up_ms < ev.down_ms {
            return Err(KeystrokeError::NegativeDwell { index: i });
        }
        if i > 0 {
            let prev = &stream[i - 1];
            if ev.down_ms < prev.down_ms {
                return Err(KeystrokeError::UnsortedStream { index: i });
            }
            flight.push((
                pair_key(&normalize_key(&prev.key), &normalize_key(&ev.key)),
                ev.down_ms - prev.down_ms,
            ));
        }
        dwell.push((normalize_key(&ev.key), ev.up_ms - ev.down_ms));
    }
    Ok(KeystrokeFeatures { dwell, flight })
}

/// Mean, floored standard deviation, and observation count of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
    pub count: u64,
}

fn stats_of(values: &[f64]) -> FeatureStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    FeatureStats {
        mean,
        std: std.max(STD_FLOOR_MS),
        count: values.len() as u64,
    }
}

/// Statistical model of one person's typing pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingModel {
    pub per_key_dwell: BTreeMap<String, FeatureStats>,
    pub per_pair_flight: BTreeMap<String, FeatureStats>,
    pub global_dwell: FeatureStats,
    pub global_flight: FeatureStats,
    pub total_keystrokes: u64,
}

/// Builds per-key/per-pair statistics from an enrollment stream.
pub fn build_typing_model(
    stream: &[KeyEvent],
    policy_min: usize,
) -> Result<TypingModel, KeystrokeError> {
    if stream.len() < policy_min {
        return Err(KeystrokeError::TooFewKeystrokes {
            got: stream.len(),
            needed: policy_min,
        });
    }
    let features = extract_features(stream)?;

    let mut dwell_groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (k, v) in &features.dwell {
        dwell_groups.entry(k.clone()).or_default().push(*v);
    }
    let mut flight_groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (k, v) in &features.flight {
        flight_groups.entry(k.clone()).or_default().push(*v);
    }

    let all_dwell: Vec<f64> = features.dwell.iter().map(|(_, v)| *v).collect();
    let all_flight: Vec<f64> = features.flight.iter().map(|(_, v)| *v).collect();
    let global_flight = if all_flight.is_empty() {
        FeatureStats {
            mean: 0.0,
            std: STD_FLOOR_MS,
            count: 0,
        }
    } else {
        stats_of(&all_flight)
    };

    Ok(TypingModel {
        per_key_dwell: dwell_groups
            .into_iter()
            .map(|(k, v)| (k, stats_of(&v)))
            .collect(),
        per_pair_flight: flight_groups
            .into_iter()
            .map(|(k, v)| (k, stats_of(&v)))
            .collect(),
        global_dwell: stats_of(&all_dwell),
        global_flight,
        total_keystrokes: stream.len() as u64,
    })
}

fn lookup<'a>(
    map: &'a BTreeMap<String, FeatureStats>,
    key: &str,
    global: &'a FeatureStats,
) -> &'a FeatureStats {
    match map.get(key) {
        Some(s) if s.count >= MIN_ENTRY_COUNT => s,
        _ => global,
    }
}

/// Scaled Manhattan distance of a probe from a typing model: the mean of
/// `|x - mu| / sigma` over all probe features, using each feature's model
/// entry or the global fallback. Lower means a closer match.
pub fn typing_distance(model: &TypingModel, probe: &KeystrokeFeatures) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (key, value) in &probe.dwell {
        let s = lookup(&model.per_key_dwell, key, &model.global_dwell);
        total += (value - s.mean).abs() / s.std;
        n += 1;
    }
    for (pair, value) in &probe.flight {
        let s = lookup(&model.per_pair_flight, pair, &model.global_flight);
        total += (value - s.mean).abs() / s.std;
        n += 1;
    }
    if n == 0 {
        return f64::INFINITY;
    }
    total / n as f64
}

/// Distance-thresholded verification; accepts when the scaled distance is
/// strictly below the threshold.
pub fn score_typing(
    model: &TypingModel,
    probe: &KeystrokeFeatures,
    threshold: f64,
) -> Result<VerificationOutcome, KeystrokeError> {
    if model.total_keystrokes == 0 {
        return Err(KeystrokeError::NoModel);
    }
    if probe.keystrokes() < MIN_PROBE_KEYSTROKES {
        return Err(KeystrokeError::ProbeTooShort {
            got: probe.keystrokes(),
            needed: MIN_PROBE_KEYSTROKES,
        });
    }
    let distance = typing_distance(model, probe);
    Ok(VerificationOutcome {
        instrument: Instrument::Kd,
        score: distance,
        threshold,
        accepted: distance < threshold,
        per_scores: Vec::new(),
    })
}

/// JSON-lines codec for event streams (`{"key":..,"down_ms":..,"up_ms":..}`
/// per line).
pub fn parse_jsonl_events(text: &str) -> Result<Vec<KeyEvent>, KeystrokeError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: KeyEvent = serde_json::from_str(line)
            .map_err(|e| KeystrokeError::MalformedStream(format!("line {}: {e}", i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

pub fn events_to_jsonl(events: &[KeyEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serialization"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// CSV codec with the same columns (`key,down_ms,up_ms`, header required).
pub fn parse_csv_events(text: &str) -> Result<Vec<KeyEvent>, KeystrokeError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut events = Vec::new();
    for (i, row) in reader.deserialize::<KeyEvent>().enumerate() {
        let ev =
            row.map_err(|e| KeystrokeError::MalformedStream(format!("row {}: {e}", i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

pub fn events_to_csv(events: &[KeyEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in events {
        w.serialize(e).expect("event serialization");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
}
