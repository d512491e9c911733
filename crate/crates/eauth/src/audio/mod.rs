//! Audio front-end shared by the voice verification and voice PAD
//! instruments: pre-emphasis, framing, power spectrum, mel filterbank,
//! MFCC with optional delta features, and an energy-based voice activity
//! mask.
//!
//! Every stage is a pure function of its inputs; identical input and
//! configuration produce bit-identical output, including the config digest
//! embedded in [`MfccMatrix`].

pub mod wav;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::digest::json_digest;

/// Log floor applied to mel energies before the DCT.
pub const MEL_LOG_FLOOR: f64 = 1e-10;

/// Absolute per-frame energy floor below which audio counts as silence.
pub const SILENCE_ENERGY_FLOOR: f64 = 1e-8;

/// The VAD keep threshold is this fraction of the energy quantile, leaving
/// headroom for the natural frame-to-frame energy fluctuation of tonal
/// audio while still rejecting silence, which sits at or near zero energy.
const VAD_QUANTILE_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio too short: {samples} samples, need at least {needed} for one frame")]
    AudioTooShort { samples: usize, needed: usize },
    #[error("all frames below the silence floor")]
    AllSilent,
    #[error("sample rate mismatch: config expects {expected} Hz, buffer is {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("invalid front-end config: {0}")]
    InvalidConfig(String),
    #[error("non-finite sample value in audio buffer")]
    NonFinite,
    #[error("malformed WAV payload: {0}")]
    MalformedWav(String),
}

/// Mono audio in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting non-finite values and clamping into
    /// `[-1, 1]`.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioBuffer, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidConfig("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(AudioError::NonFinite);
        }
        let samples = samples.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// How many derivative orders to append to the static cepstra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    None,
    First,
    FirstAndSecond,
}

impl DeltaSpec {
    fn orders(self) -> usize {
        match self {
            DeltaSpec::None => 0,
            DeltaSpec::First => 1,
            DeltaSpec::FirstAndSecond => 2,
        }
    }
}

/// Front-end parameters. The digest of this struct ties every derived
/// feature matrix and trained voice model to the exact configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub preemphasis: f64,
    /// Frame length in seconds.
    pub frame_len: f64,
    /// Frame step in seconds.
    pub frame_step: f64,
    /// FFT size; `None` picks the next power of two >= frame samples.
    pub n_fft: Option<usize>,
    pub n_mels: usize,
    pub n_ceps: usize,
    pub delta_window: usize,
    pub deltas: DeltaSpec,
    pub vad_energy_quantile: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            sample_rate: 16_000,
            preemphasis: 0.97,
            frame_len: 0.025,
            frame_step: 0.010,
            n_fft: None,
            n_mels: 24,
            n_ceps: 19,
            delta_window: 2,
            deltas: DeltaSpec::FirstAndSecond,
            vad_energy_quantile: 0.1,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let err = |m: &str| Err(AudioError::InvalidConfig(m.into()));
        if self.sample_rate == 0 {
            return err("sample_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return err("preemphasis must be in [0, 1)");
        }
        if !(self.frame_len > 0.0 && self.frame_step > 0.0 && self.frame_len >= self.frame_step) {
            return err("need frame_len >= frame_step > 0");
        }
        if self.n_mels < 2 {
            return err("n_mels must be >= 2");
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_mels {
            return err("need 1 <= n_ceps <= n_mels");
        }
        if self.delta_window == 0 {
            return err("delta_window must be >= 1");
        }
        if !(0.0..1.0).contains(&self.vad_energy_quantile) {
            return err("vad_energy_quantile must be in [0, 1)");
        }
        if let Some(n) = self.n_fft {
            if !n.is_power_of_two() || n < self.frame_samples() {
                return err("n_fft must be a power of two >= frame samples");
            }
        }
        Ok(())
    }

    pub fn frame_samples(&self) -> usize {
        (self.frame_len * self.sample_rate as f64).round() as usize
    }

    pub fn step_samples(&self) -> usize {
        (self.frame_step * self.sample_rate as f64).round() as usize
    }

    pub fn fft_size(&self) -> usize {
        self.n_fft
            .unwrap_or_else(|| self.frame_samples().next_power_of_two())
    }

    /// Feature dimension of the matrices this config produces.
    pub fn feature_dim(&self) -> usize {
        self.n_ceps * (1 + self.deltas.orders())
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    fn check_rate(&self, buf: &AudioBuffer) -> Result<(), AudioError> {
        if buf.sample_rate() != self.sample_rate {
            return Err(AudioError::SampleRateMismatch {
                expected: self.sample_rate,
                got: buf.sample_rate(),
            });
        }
        Ok(())
    }
}

/// T x D feature matrix plus the digest of the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MfccMatrixWire", try_from = "MfccMatrixWire")]
pub struct MfccMatrix {
    frames: Vec<Vec<f64>>,
    frame_step: f64,
    config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct MfccMatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    frame_step: f64,
    config_digest: String,
}

impl From<MfccMatrix> for MfccMatrixWire {
    fn from(m: MfccMatrix) -> MfccMatrixWire {
        let rows = m.frames.len();
        let cols = m.frames.first().map_or(0, |r| r.len());
        MfccMatrixWire {
            rows,
            cols,
            data: m.frames.into_iter().flatten().collect(),
            frame_step: m.frame_step,
            config_digest: m.config_digest,
        }
    }
}

impl TryFrom<MfccMatrixWire> for MfccMatrix {
    type Error = String;

    fn try_from(w: MfccMatrixWire) -> Result<MfccMatrix, String> {
        if w.data.len() != w.rows * w.cols {
            return Err(format!(
                "mfcc matrix data length {} does not match {}x{}",
                w.data.len(),
                w.rows,
                w.cols
            ));
        }
        let frames = w.data.chunks(w.cols.max(1)).map(|c| c.to_vec()).collect();
        Ok(MfccMatrix {
            frames,
            frame_step: w.frame_step,
            config_digest: w.config_digest,
        })
    }
}

impl MfccMatrix {
    pub fn new(frames: Vec<Vec<f64>>, frame_step: f64, config_digest: String) -> MfccMatrix {
        MfccMatrix {
            frames,
            frame_step,
            config_digest,
        }
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, |r| r.len())
    }

    pub fn frame_step(&self) -> f64 {
        self.frame_step
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    /// Keeps only the rows whose mask entry is true.
    pub fn select_rows(&self, mask: &[bool]) -> MfccMatrix {
        let frames = self
            .frames
            .iter()
            .zip(mask)
            .filter(|(_, keep)| **keep)
            .map(|(f, _)| f.clone())
            .collect();
        MfccMatrix {
            frames,
            frame_step: self.frame_step,
            config_digest: self.config_digest.clone(),
        }
    }
}

/// First-order high-pass: `y[n] = x[n] - coeff * x[n-1]`, `y[0] = x[0]`.
pub fn preemphasize(buf: &AudioBuffer, coeff: f64) -> AudioBuffer {
    let x = buf.samples();
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first);
        for i in 1..x.len() {
            y.push(x[i] - coeff * x[i - 1]);
        }
    }
    AudioBuffer {
        samples: y,
        sample_rate: buf.sample_rate(),
    }
}

/// Hamming window of the given length.
pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

fn frame_offsets(total: usize, frame: usize, step: usize) -> Vec<usize> {
    if total < frame {
        return Vec::new();
    }
    (0..=(total - frame)).step_by(step).collect()
}

/// Splits the buffer into overlapping Hamming-windowed frames; the last
/// partial frame is dropped.
pub fn frame_and_window(
    buf: &AudioBuffer,
    frame_len_s: f64,
    frame_step_s: f64,
) -> Result<Vec<Vec<f64>>, AudioError> {
    let frame = (frame_len_s * buf.sample_rate() as f64).round() as usize;
    let step = (frame_step_s * buf.sample_rate() as f64).round() as usize;
    if frame == 0 || step == 0 || frame_len_s < frame_step_s {
        return Err(AudioError::InvalidConfig(
            "need frame_len >= frame_step > 0".into(),
        ));
    }
    let offsets = frame_offsets(buf.len(), frame, step);
    if offsets.is_empty() {
        return Err(AudioError::AudioTooShort {
            samples: buf.len(),
            needed: frame,
        });
    }
    let window = hamming_window(frame);
    let x = buf.samples();
    Ok(offsets
        .iter()
        .map(|&o| {
            x[o..o + frame]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect())
}

fn power_spectrum_with(fft: &Arc<dyn Fft<f64>>, frame: &[f64], n_fft: usize) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    fft.process(&mut buf);
    buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// `|FFT(frame zero-padded to n_fft)|^2` for the non-redundant half
/// (`n_fft/2 + 1` bins). The transform is unnormalized, so
/// `sum over the full spectrum = n_fft * sum(frame^2)` (Parseval).
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>, AudioError> {
    if frame.len() > n_fft {
        return Err(AudioError::InvalidConfig(format!(
            "frame length {} exceeds n_fft {}",
            frame.len(),
            n_fft
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    Ok(power_spectrum_with(&fft, frame, n_fft))
}

/// `mel(f) = 2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the `n_mels` triangular filters spanning
/// `[0, sample_rate/2]` with equal spacing on the mel scale.
pub fn mel_filter_centers(sample_rate: u32, n_mels: usize) -> Vec<f64> {
    let mel_max = hz_to_mel(sample_rate as f64 / 2.0);
    (1..=n_mels)
        .map(|m| mel_to_hz(mel_max * m as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Triangular filter weights, `n_mels` rows of `n_fft/2 + 1` bins each.
///
/// Filters peak at 1 and are evaluated in mel space, so at any frequency the
/// weights of overlapping filters sum to at most 1.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let mel_max = hz_to_mel(sample_rate as f64 / 2.0);
    let points: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_max * i as f64 / (n_mels + 1) as f64)
        .collect();

    let mut bank = Vec::with_capacity(n_mels);
    for m in 1..=n_mels {
        let (lo, center, hi) = (points[m - 1], points[m], points[m + 1]);
        let mut filt = vec![0.0; n_bins];
        for (k, w) in filt.iter_mut().enumerate() {
            let f_hz = k as f64 * sample_rate as f64 / n_fft as f64;
            let f_mel = hz_to_mel(f_hz);
            if f_mel > lo && f_mel < hi {
                *w = if f_mel <= center {
                    (f_mel - lo) / (center - lo)
                } else {
                    (hi - f_mel) / (hi - center)
                };
            }
        }
        bank.push(filt);
    }
    bank
}

/// Log mel-band energies of a power spectrum, floored at [`MEL_LOG_FLOOR`]
/// before the log.
pub fn mel_filterbank_energies(
    spectrum: &[f64],
    sample_rate: u32,
    n_mels: usize,
) -> Result<Vec<f64>, AudioError> {
    if n_mels < 2 {
        return Err(AudioError::InvalidConfig("n_mels must be >= 2".into()));
    }
    if spectrum.len() < 2 {
        return Err(AudioError::InvalidConfig("spectrum too short".into()));
    }
    let n_fft = 2 * (spectrum.len() - 1);
    let bank = mel_filterbank(sample_rate, n_fft, n_mels);
    Ok(apply_mel_filterbank(spectrum, &bank))
}

fn apply_mel_filterbank(spectrum: &[f64], bank: &[Vec<f64>]) -> Vec<f64> {
    bank.iter()
        .map(|filt| {
            let e: f64 = filt.iter().zip(spectrum).map(|(w, p)| w * p).sum();
            e.max(MEL_LOG_FLOOR).ln()
        })
        .collect()
}

/// Unscaled DCT-II: `X[k] = sum_n x[n] cos(pi k (n + 0.5) / N)`.
pub fn dct_ii(input: &[f64], n_keep: usize) -> Vec<f64> {
    let n = input.len();
    (0..n_keep.min(n))
        .map(|k| {
            input
                .iter()
                .enumerate()
                .map(|(i, &x)| x * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos())
                .sum()
        })
        .collect()
}

/// Regression deltas over a window of `w` frames with edge replication:
/// `d[t] = sum_{k=1..w} k (c[t+k] - c[t-k]) / (2 sum k^2)`.
pub fn delta_features(frames: &[Vec<f64>], w: usize) -> Vec<Vec<f64>> {
    let t_max = frames.len();
    if t_max == 0 {
        return Vec::new();
    }
    let dim = frames[0].len();
    let denom: f64 = 2.0 * (1..=w).map(|k| (k * k) as f64).sum::<f64>();
    (0..t_max)
        .map(|t| {
            let mut d = vec![0.0; dim];
            for k in 1..=w {
                let ahead = &frames[(t + k).min(t_max - 1)];
                let behind = &frames[t.saturating_sub(k)];
                for (i, dv) in d.iter_mut().enumerate() {
                    *dv += k as f64 * (ahead[i] - behind[i]);
                }
            }
            d.iter_mut().for_each(|dv| *dv /= denom);
            d
        })
        .collect()
}

/// Full MFCC pipeline: pre-emphasis, framing, power spectrum, log mel
/// energies, DCT-II keeping `n_ceps` coefficients, then deltas per config.
pub fn mfcc(buf: &AudioBuffer, cfg: &FrontendConfig) -> Result<MfccMatrix, AudioError> {
    cfg.validate()?;
    cfg.check_rate(buf)?;

    let emphasized = preemphasize(buf, cfg.preemphasis);
    let frames = frame_and_window(&emphasized, cfg.frame_len, cfg.frame_step)?;
    let n_fft = cfg.fft_size();
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let bank = mel_filterbank(cfg.sample_rate, n_fft, cfg.n_mels);

    let static_ceps: Vec<Vec<f64>> = frames
        .iter()
        .map(|frame| {
            let spectrum = power_spectrum_with(&fft, frame, n_fft);
            let log_mels = apply_mel_filterbank(&spectrum, &bank);
            dct_ii(&log_mels, cfg.n_ceps)
        })
        .collect();

    let rows = match cfg.deltas {
        DeltaSpec::None => static_ceps,
        DeltaSpec::First => {
            let d1 = delta_features(&static_ceps, cfg.delta_window);
            static_ceps
                .into_iter()
                .zip(d1)
                .map(|(mut c, d)| {
                    c.extend(d);
                    c
                })
                .collect()
        }
        DeltaSpec::FirstAndSecond => {
            let d1 = delta_features(&static_ceps, cfg.delta_window);
            let d2 = delta_features(&d1, cfg.delta_window);
            static_ceps
                .into_iter()
                .zip(d1)
                .zip(d2)
                .map(|((mut c, d), dd)| {
                    c.extend(d);
                    c.extend(dd);
                    c
                })
                .collect()
        }
    };

    Ok(MfccMatrix {
        frames: rows,
        frame_step: cfg.frame_step,
        config_digest: cfg.digest(),
    })
}

/// Mean-square energy of each raw (unwindowed, un-emphasized) frame.
pub fn frame_energies(buf: &AudioBuffer, cfg: &FrontendConfig) -> Result<Vec<f64>, AudioError> {
    cfg.validate()?;
    cfg.check_rate(buf)?;
    let frame = cfg.frame_samples();
    let step = cfg.step_samples();
    let offsets = frame_offsets(buf.len(), frame, step);
    if offsets.is_empty() {
        return Err(AudioError::AudioTooShort {
            samples: buf.len(),
            needed: frame,
        });
    }
    let x = buf.samples();
    Ok(offsets
        .iter()
        .map(|&o| x[o..o + frame].iter().map(|s| s * s).sum::<f64>() / frame as f64)
        .collect())
}

/// Linear-interpolation quantile of an unsorted slice, `q` in `[0, 1)`.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

/// Energy-based voice activity mask, one flag per frame (aligned with the
/// frames of [`mfcc`] for the same config).
///
/// A frame is kept when its energy reaches
/// `max(0.5 * quantile(energies, q), 1e-8)`. The absolute floor rejects
/// digital silence even when most of the buffer is silent; the halved
/// quantile keeps every frame of steady tonal audio, whose energies
/// fluctuate a little but never drop that far. The loudest frame always
/// passes, so non-silent audio keeps at least one frame.
pub fn voice_activity_mask(
    buf: &AudioBuffer,
    cfg: &FrontendConfig,
) -> Result<Vec<bool>, AudioError> {
    let energies = frame_energies(buf, cfg)?;
    let max_e = energies.iter().cloned().fold(f64::MIN, f64::max);
    if max_e < SILENCE_ENERGY_FLOOR {
        return Err(AudioError::AllSilent);
    }
    let threshold = (VAD_QUANTILE_FRACTION * quantile(&energies, cfg.vad_energy_quantile))
        .max(SILENCE_ENERGY_FLOOR);
    Ok(energies.iter().map(|&e| e >= threshold).collect())
}

/// MFCC matrix restricted to voiced frames, plus the voiced duration in
/// seconds. This is the feature path both voice instruments consume.
pub fn voiced_mfcc(
    buf: &AudioBuffer,
    cfg: &FrontendConfig,
) -> Result<(MfccMatrix, f64), AudioError> {
    let features = mfcc(buf, cfg)?;
    let mask = voice_activity_mask(buf, cfg)?;
    let voiced = features.select_rows(&mask);
    let voiced_s = voiced.num_frames() as f64 * cfg.frame_step;
    Ok((voiced, voiced_s))
}
