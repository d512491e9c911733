//! Seed-deterministic synthetic data: speaker-like audio, typing streams,
//! textured face frames, and the replay/recapture attack channels.
//!
//! Everything here is a pure function of its seeds; whole evaluation runs
//! reproduce bit for bit.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::face::FrameImage;
use crate::keystroke::KeyEvent;

fn mix_seeds(a: u64, b: u64) -> u64 {
    // splitmix64 over the combination keeps per-item streams independent.
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One formant-like spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormantPeak {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
}

/// Parameters of one synthetic speaker: formant-like peak centers, a pitch
/// fundamental, a noise floor, and a slow amplitude envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeakerProfile {
    pub seed: u64,
    pub sample_rate: u32,
    pub peaks: Vec<FormantPeak>,
    pub pitch_hz: f64,
    pub noise_level: f64,
    pub envelope_depth: f64,
    pub envelope_rate_hz: f64,
}

/// Size of the shared pseudo-phone inventory.
const PHONE_COUNT: usize = 8;

/// Shared pseudo-phone inventory: per-phone multipliers and gains applied
/// to a speaker's formant centers. Fixed across all speakers so utterances
/// share their coarse spectral structure and differ by the speaker's
/// formant placement.
fn phone_inventory(n_formants: usize) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x00f0_e7e5);
    (0..PHONE_COUNT)
        .map(|_| {
            (0..n_formants)
                .map(|_| {
                    (
                        rng.random_range(0.7..1.4),  // frequency multiplier
                        rng.random_range(0.4..1.0),  // gain
                    )
                })
                .collect()
        })
        .collect()
}

impl SyntheticSpeakerProfile {
    /// Random standalone profile with 3-5 peaks inside
    /// `[150, 0.4 * sample_rate]`.
    pub fn generate(seed: u64, sample_rate: u32) -> SyntheticSpeakerProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(seed, 0x5eed));
        let n_peaks = rng.random_range(3..=5);
        let top = 0.4 * sample_rate as f64;
        let peaks = (0..n_peaks)
            .map(|_| FormantPeak {
                center_hz: rng.random_range(150.0..top),
                bandwidth_hz: rng.random_range(20.0..80.0),
            })
            .collect();
        SyntheticSpeakerProfile {
            seed,
            sample_rate,
            peaks,
            pitch_hz: rng.random_range(80.0..250.0),
            noise_level: 0.05,
            envelope_depth: 0.2,
            envelope_rate_hz: rng.random_range(1.0..3.0),
        }
    }

    /// Population of `n` profiles sharing a common formant layout, each
    /// warped by a speaker-specific factor plus per-formant tweaks, with
    /// well-separated pitches. Peak sets are pairwise disjoint as sets and
    /// long-run spectra pairwise distinct, while every speaker still
    /// exercises the same pseudo-phone inventory.
    pub fn disjoint_population(
        n: usize,
        sample_rate: u32,
        root_seed: u64,
    ) -> Vec<SyntheticSpeakerProfile> {
        let sr = sample_rate as f64;
        // Base formants scale with the bandwidth available.
        let base = [0.055 * sr, 0.115 * sr, 0.21 * sr];
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(root_seed, i as u64));
                let warp = if n == 1 {
                    1.0
                } else {
                    0.85 + 0.3 * i as f64 / (n - 1) as f64
                };
                let peaks = base
                    .iter()
                    .map(|&f| FormantPeak {
                        center_hz: f * warp * rng.random_range(0.98..1.02),
                        bandwidth_hz: 0.01 * f + 10.0,
                    })
                    .collect();
                SyntheticSpeakerProfile {
                    seed: mix_seeds(root_seed, 1000 + i as u64),
                    sample_rate,
                    peaks,
                    pitch_hz: 80.0 + 90.0 * i as f64 / n.max(2) as f64
                        + rng.random_range(0.0..4.0),
                    noise_level: 0.05,
                    envelope_depth: 0.2,
                    envelope_rate_hz: 1.5 + 0.1 * i as f64,
                }
            })
            .collect()
    }
}

/// Deterministic utterance: a random sequence of shared pseudo-phones, each
/// realized as the speaker's warped formant tones, plus the pitch
/// fundamental and low-pass shaped noise, normalized to peak 0.7.
///
/// The phone inventory is global, so different speakers produce the same
/// coarse spectral events shifted by their own formant placement; that is
/// what lets background models learn shared structure with speaker-specific
/// offsets.
pub fn synth_voice(
    profile: &SyntheticSpeakerProfile,
    duration_s: f64,
    utterance_seed: u64,
) -> AudioBuffer {
    assert!(duration_s >= 0.1, "utterance too short to be useful");
    let sr = profile.sample_rate;
    let n = (duration_s * sr as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(profile.seed, utterance_seed));
    let inventory = phone_inventory(profile.peaks.len());
    let nyquist_guard = 0.47 * sr as f64;

    // Segment the utterance into phone realizations of 150-300 ms.
    struct Segment {
        end: usize,
        tones: Vec<(f64, f64, f64)>, // frequency, phase, gain
    }
    let mut segments: Vec<Segment> = Vec::new();
    let mut start = 0usize;
    while start < n {
        let seg_len = (rng.random_range(0.15..0.30) * sr as f64) as usize;
        let phone = &inventory[rng.random_range(0..inventory.len())];
        let tones = profile
            .peaks
            .iter()
            .zip(phone)
            .map(|(peak, &(mult, gain))| {
                let jitter: f64 = rng.random_range(-1.0..1.0);
                let freq =
                    (peak.center_hz * mult + jitter * peak.bandwidth_hz * 0.5).min(nyquist_guard);
                let phase: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                (freq, phase, gain)
            })
            .collect();
        segments.push(Segment {
            end: (start + seg_len).min(n),
            tones,
        });
        start += seg_len;
    }
    let pitch_phase: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);

    let mut samples = Vec::with_capacity(n);
    let mut noise_state = 0.0;
    let mut seg_idx = 0usize;
    for i in 0..n {
        while i >= segments[seg_idx].end {
            seg_idx += 1;
        }
        let t = i as f64 / sr as f64;
        let mut s = 0.0;
        for &(freq, phase, gain) in &segments[seg_idx].tones {
            s += gain * (2.0 * std::f64::consts::PI * freq * t + phase).sin();
        }
        s += 0.5 * (2.0 * std::f64::consts::PI * profile.pitch_hz * t + pitch_phase).sin();
        if profile.noise_level > 0.0 {
            // One-pole low-pass over white noise.
            noise_state = 0.9 * noise_state + 0.1 * rng.random_range(-1.0..1.0);
            s += profile.noise_level * 10.0 * noise_state;
        }
        let envelope = 1.0
            - profile.envelope_depth
                * (0.5 + 0.5 * (2.0 * std::f64::consts::PI * profile.envelope_rate_hz * t).sin());
        samples.push(s * envelope);
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-9);
    let scale = 0.7 / peak;
    samples.iter_mut().for_each(|s| *s *= scale);
    AudioBuffer::new(samples, sr).expect("synthesized audio is finite")
}

/// Re-recording channel model: 300-3400 Hz band-limit (Hamming-windowed
/// sinc FIR), additive white Gaussian noise at 20 dB SNR, then a gentle
/// clamp at 0.9 amplitude.
pub fn simulate_replay_voice(buf: &AudioBuffer, seed: u64) -> AudioBuffer {
    let sr = buf.sample_rate() as f64;
    let taps = 129usize;
    let half = (taps / 2) as isize;
    let (f_lo, f_hi) = (300.0 / sr, (3400.0 / sr).min(0.499));
    let sinc = |x: f64| {
        if x.abs() < 1e-12 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        }
    };
    // Band-pass = high-cutoff low-pass minus low-cutoff low-pass.
    let kernel: Vec<f64> = (-half..=half)
        .map(|i| {
            let m = i as f64;
            let w = 0.54
                - 0.46
                    * (2.0 * std::f64::consts::PI * (m + half as f64) / (taps - 1) as f64).cos();
            w * (2.0 * f_hi * sinc(2.0 * f_hi * m) - 2.0 * f_lo * sinc(2.0 * f_lo * m))
        })
        .collect();

    let x = buf.samples();
    let mut filtered = vec![0.0; x.len()];
    for (i, out) in filtered.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, k) in kernel.iter().enumerate() {
            let idx = i as isize + j as isize - half;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += k * x[idx as usize];
            }
        }
        *out = acc;
    }

    let signal_power =
        filtered.iter().map(|s| s * s).sum::<f64>() / filtered.len().max(1) as f64;
    let noise_std = (signal_power / 100.0).sqrt(); // 20 dB SNR
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(seed, 0x4e01));
    let out: Vec<f64> = filtered
        .iter()
        .map(|s| (s + noise_std * gauss(&mut rng)).clamp(-0.9, 0.9))
        .collect();
    AudioBuffer::new(out, buf.sample_rate()).expect("replay output is finite")
}

/// Parameters of one synthetic typist: per-key dwell and per-pair flight
/// distributions over a small key alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTypistProfile {
    pub seed: u64,
    pub keys: Vec<String>,
    /// key -> (mean ms, std ms)
    pub per_key_dwell: BTreeMap<String, (f64, f64)>,
    /// "a|b" -> (mean ms, std ms)
    pub per_pair_flight: BTreeMap<String, (f64, f64)>,
}

pub const TYPIST_ALPHABET: [&str; 10] = ["a", "s", "d", "f", "j", "k", "l", "e", "r", "t"];

impl SyntheticTypistProfile {
    /// Random standalone profile.
    pub fn generate(seed: u64) -> SyntheticTypistProfile {
        Self::with_base(seed, None)
    }

    fn with_base(seed: u64, base: Option<(f64, f64)>) -> SyntheticTypistProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(seed, 0x717e));
        let (dwell_base, flight_base) = base.unwrap_or((
            rng.random_range(60.0..140.0),
            rng.random_range(120.0..260.0),
        ));
        let keys: Vec<String> = TYPIST_ALPHABET.iter().map(|s| s.to_string()).collect();
        let mut per_key_dwell = BTreeMap::new();
        for k in &keys {
            per_key_dwell.insert(
                k.clone(),
                (
                    dwell_base + rng.random_range(-8.0..8.0),
                    rng.random_range(8.0..15.0),
                ),
            );
        }
        let mut per_pair_flight = BTreeMap::new();
        for a in &keys {
            for b in &keys {
                per_pair_flight.insert(
                    format!("{a}|{b}"),
                    (
                        flight_base + rng.random_range(-20.0..20.0),
                        rng.random_range(15.0..30.0),
                    ),
                );
            }
        }
        SyntheticTypistProfile {
            seed,
            keys,
            per_key_dwell,
            per_pair_flight,
        }
    }

    /// Population whose per-key dwell means are pairwise separated by at
    /// least three pooled standard deviations: stds stay below 15 ms, base
    /// means sit 70 ms apart, and per-key jitter moves a mean by at most
    /// 8 ms, leaving a worst-case gap of 54 ms > 45 ms.
    pub fn separated_population(n: usize, root_seed: u64) -> Vec<SyntheticTypistProfile> {
        (0..n)
            .map(|i| {
                let dwell_base = 60.0 + 70.0 * i as f64;
                let flight_base = 130.0 + 80.0 * i as f64;
                Self::with_base(
                    mix_seeds(root_seed, i as u64),
                    Some((dwell_base, flight_base)),
                )
            })
            .collect()
    }
}

/// Deterministic typing stream: keys drawn uniformly, dwell and flight from
/// the profile's Gaussians, clipped at 1 ms, sorted by construction.
pub fn synth_typing(profile: &SyntheticTypistProfile, n_keystrokes: usize, seed: u64) -> Vec<KeyEvent> {
    assert!(n_keystrokes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(profile.seed, seed));
    let mut events = Vec::with_capacity(n_keystrokes);
    let mut t = 0.0f64;
    let mut prev_key: Option<String> = None;
    for _ in 0..n_keystrokes {
        let key = profile.keys[rng.random_range(0..profile.keys.len())].clone();
        if let Some(prev) = &prev_key {
            let (mean, std) = profile.per_pair_flight[&format!("{prev}|{key}")];
            t += (mean + std * gauss(&mut rng)).max(1.0);
        }
        let (mean, std) = profile.per_key_dwell[&key];
        let dwell = (mean + std * gauss(&mut rng)).max(1.0);
        events.push(KeyEvent {
            key: key.clone(),
            down_ms: t,
            up_ms: t + dwell,
        });
        prev_key = Some(key);
    }
    events
}

/// Parameters of one synthetic "identity" for the face channel: a seeded
/// base image; frames are the base plus small per-frame perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFaceProfile {
    pub seed: u64,
    pub size: usize,
}

impl SyntheticFaceProfile {
    pub fn new(seed: u64, size: usize) -> SyntheticFaceProfile {
        SyntheticFaceProfile { seed, size }
    }

    fn base_pixels(&self) -> Vec<f64> {
        let s = self.size;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(self.seed, 0xface));
        let mut px = vec![0.0; s * s];
        // Smooth background gradient.
        let gx: f64 = rng.random_range(-60.0..60.0);
        let gy: f64 = rng.random_range(-60.0..60.0);
        for y in 0..s {
            for x in 0..s {
                px[y * s + x] = 120.0 + gx * (x as f64 / s as f64 - 0.5)
                    + gy * (y as f64 / s as f64 - 0.5);
            }
        }
        // Sharp rectangles and lines carry the identity-specific structure
        // and the high-frequency energy the PAD channel keys on.
        for _ in 0..10 {
            let x0 = rng.random_range(0..s - 4);
            let y0 = rng.random_range(0..s - 4);
            let w = rng.random_range(3..(s - x0).max(4));
            let h = rng.random_range(3..(s - y0).max(4));
            let val: f64 = rng.random_range(20.0..235.0);
            for y in y0..(y0 + h).min(s) {
                for x in x0..(x0 + w).min(s) {
                    px[y * s + x] = val;
                }
            }
        }
        for _ in 0..6 {
            let row = rng.random_range(0..s);
            let val: f64 = rng.random_range(0.0..255.0);
            for x in 0..s {
                px[row * s + x] = val;
            }
        }
        // Fine texture.
        for p in px.iter_mut() {
            *p = (*p + rng.random_range(-6.0..6.0)).clamp(0.0, 255.0);
        }
        px
    }

    /// One capture of this identity; frames with different seeds differ by
    /// mild noise and brightness wobble but embed near each other.
    pub fn frame(&self, frame_seed: u64) -> FrameImage {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(self.seed, mix_seeds(frame_seed, 0xf1)));
        let brightness: f64 = rng.random_range(-4.0..4.0);
        let px = self
            .base_pixels()
            .into_iter()
            .map(|p| (p + brightness + 1.5 * gauss(&mut rng)).clamp(0.0, 255.0))
            .collect();
        FrameImage::new(self.size, self.size, px).expect("synthetic frame is valid")
    }

    pub fn frames(&self, count: usize, first_seed: u64) -> Vec<FrameImage> {
        (0..count).map(|i| self.frame(first_seed + i as u64)).collect()
    }
}

/// Print/replay recapture channel model: Gaussian blur (sigma 1.5),
/// 2x downsample then bilinear upsample, 20% contrast compression toward
/// mid-gray, and additive Gaussian noise (sigma 2 gray levels).
pub fn simulate_recapture_face(img: &FrameImage, seed: u64) -> FrameImage {
    let (w, h) = (img.width(), img.height());

    // Blur via the shared separable Gaussian.
    let blurred = crate::pad::iqm::lowpass_reference(img, 1.5);

    // Downsample by 2 with 2x2 block averaging.
    let (dw, dh) = (w.div_ceil(2), h.div_ceil(2));
    let mut down = vec![0.0; dw * dh];
    for y in 0..dh {
        for x in 0..dw {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    let sx = (2 * x + dx).min(w - 1);
                    let sy = (2 * y + dy).min(h - 1);
                    acc += blurred.get(sx, sy);
                    cnt += 1.0;
                }
            }
            down[y * dw + x] = acc / cnt;
        }
    }

    // Bilinear upsample back to the original size.
    let sample = |fx: f64, fy: f64| -> f64 {
        let fx = fx.clamp(0.0, (dw - 1) as f64);
        let fy = fy.clamp(0.0, (dh - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(dw - 1);
        let y1 = (y0 + 1).min(dh - 1);
        let ax = fx - x0 as f64;
        let ay = fy - y0 as f64;
        let top = down[y0 * dw + x0] * (1.0 - ax) + down[y0 * dw + x1] * ax;
        let bot = down[y1 * dw + x0] * (1.0 - ax) + down[y1 * dw + x1] * ax;
        top * (1.0 - ay) + bot * ay
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(seed, 0x5c0e));
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let src_x = (x as f64 + 0.5) / 2.0 - 0.5;
            let src_y = (y as f64 + 0.5) / 2.0 - 0.5;
            let mut p = sample(src_x, src_y);
            p = 128.0 + 0.8 * (p - 128.0); // contrast compression
            p += 2.0 * gauss(&mut rng);
            px.push(p.clamp(0.0, 255.0));
        }
    }
    FrameImage::new(w, h, px).expect("recapture preserves dimensions")
}

/// Splits one root seed into a deterministic per-trial seed.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    mix_seeds(root, trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio;

    #[test]
    fn synth_voice_is_seed_deterministic() {
        let p = SyntheticSpeakerProfile::generate(5, 8_000);
        let a = synth_voice(&p, 1.5, 3);
        let b = synth_voice(&p, 1.5, 3);
        assert_eq!(a, b);
        let c = synth_voice(&p, 1.5, 4);
        assert_ne!(a, c);
    }

    #[test]
    fn disjoint_profiles_have_distinct_spectral_peaks() {
        let pop = SyntheticSpeakerProfile::disjoint_population(4, 8_000, 1);
        // DFT oracle: the dominant non-pitch bins of two different profiles
        // must not coincide.
        let dominant_bin = |profile: &SyntheticSpeakerProfile| -> usize {
            let buf = synth_voice(profile, 1.0, 0);
            let n = 4096usize;
            let frame: Vec<f64> = buf.samples()[..n].to_vec();
            let ps = audio::power_spectrum(&frame, n).unwrap();
            // Ignore everything below 300 Hz (pitch region).
            let lo_bin = (300.0 * n as f64 / 8_000.0) as usize;
            (lo_bin..ps.len())
                .max_by(|&a, &b| ps[a].total_cmp(&ps[b]))
                .unwrap()
        };
        let b0 = dominant_bin(&pop[0]);
        let b1 = dominant_bin(&pop[1]);
        assert_ne!(b0, b1);
    }

    #[test]
    fn zero_noise_flat_envelope_keeps_all_frames() {
        let mut p = SyntheticSpeakerProfile::generate(9, 8_000);
        p.noise_level = 0.0;
        p.envelope_depth = 0.0;
        let buf = synth_voice(&p, 1.0, 0);
        let cfg = audio::FrontendConfig {
            sample_rate: 8_000,
            ..audio::FrontendConfig::default()
        };
        let mask = audio::voice_activity_mask(&buf, &cfg).unwrap();
        let kept = mask.iter().filter(|&&k| k).count();
        assert_eq!(kept, mask.len(), "{kept}/{} kept", mask.len());
    }

    #[test]
    fn replay_attenuates_high_band_by_20db() {
        // Input rich above 4 kHz: tones at 1 kHz and 5-6 kHz at 16 kHz.
        let sr = 16_000u32;
        let n = sr as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                0.25 * (2.0 * std::f64::consts::PI * 1000.0 * t).sin()
                    + 0.35 * (2.0 * std::f64::consts::PI * 5000.0 * t).sin()
                    + 0.2 * (2.0 * std::f64::consts::PI * 6000.0 * t).sin()
            })
            .collect();
        let buf = AudioBuffer::new(samples, sr).unwrap();
        let replayed = simulate_replay_voice(&buf, 7);

        let band_energy = |b: &AudioBuffer, lo_hz: f64| -> f64 {
            let n_fft = 8192usize;
            let ps = audio::power_spectrum(&b.samples()[..n_fft], n_fft).unwrap();
            let lo_bin = (lo_hz * n_fft as f64 / sr as f64) as usize;
            ps[lo_bin..].iter().sum()
        };
        let before = band_energy(&buf, 4000.0);
        let after = band_energy(&replayed, 4000.0);
        let drop_db = 10.0 * (before / after.max(1e-12)).log10();
        assert!(drop_db >= 20.0, "high band only dropped {drop_db:.1} dB");
    }

    #[test]
    fn replay_of_silence_is_near_noise_floor() {
        let buf = AudioBuffer::new(vec![0.0; 8_000], 8_000).unwrap();
        let out = simulate_replay_voice(&buf, 3);
        let power = out.samples().iter().map(|s| s * s).sum::<f64>() / out.len() as f64;
        assert!(power < 1e-6, "residual power {power}");
    }

    #[test]
    fn replay_is_seed_deterministic() {
        let p = SyntheticSpeakerProfile::generate(2, 8_000);
        let buf = synth_voice(&p, 1.0, 1);
        assert_eq!(
            simulate_replay_voice(&buf, 11),
            simulate_replay_voice(&buf, 11)
        );
        assert_ne!(
            simulate_replay_voice(&buf, 11),
            simulate_replay_voice(&buf, 12)
        );
    }

    #[test]
    fn zero_std_typist_produces_constant_dwells() {
        let mut p = SyntheticTypistProfile::generate(4);
        for v in p.per_key_dwell.values_mut() {
            *v = (80.0, 0.0);
        }
        let events = synth_typing(&p, 50, 1);
        for e in &events {
            assert!((e.up_ms - e.down_ms - 80.0).abs() < 1e-12);
        }
    }

    #[test]
    fn typing_stream_is_sorted_and_deterministic() {
        let p = SyntheticTypistProfile::generate(8);
        let a = synth_typing(&p, 150, 3);
        let b = synth_typing(&p, 150, 3);
        assert_eq!(a, b);
        for w in a.windows(2) {
            assert!(w[1].down_ms >= w[0].down_ms);
        }
        assert_eq!(a.len(), 150);
    }

    #[test]
    fn separated_population_honors_three_sigma_gap() {
        let pop = SyntheticTypistProfile::separated_population(5, 2);
        for i in 0..pop.len() {
            for j in (i + 1)..pop.len() {
                for key in &pop[i].keys {
                    let (mi, si) = pop[i].per_key_dwell[key];
                    let (mj, sj) = pop[j].per_key_dwell[key];
                    let pooled = ((si * si + sj * sj) / 2.0).sqrt();
                    assert!(
                        (mi - mj).abs() >= 3.0 * pooled,
                        "typists {i},{j} key {key}: gap {} < 3 * {pooled}",
                        (mi - mj).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn recapture_changes_every_nonconstant_image() {
        let profile = SyntheticFaceProfile::new(3, 32);
        let img = profile.frame(0);
        let recaptured = simulate_recapture_face(&img, 5);
        assert_ne!(img, recaptured);
        let mse: f64 = img
            .pixels()
            .iter()
            .zip(recaptured.pixels())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / img.pixels().len() as f64;
        assert!(mse > 0.0);
    }

    #[test]
    fn recapture_reduces_distance_to_lowpass_reference() {
        // IQM separation: bona fide frames sit farther from their blurred
        // reference than recaptured frames do. This gap is the PAD
        // training signal.
        use crate::pad::iqm::{compute_iqms, lowpass_reference};
        let mut bona_mse = 0.0;
        let mut attack_mse = 0.0;
        let n = 50;
        for i in 0..n {
            let img = SyntheticFaceProfile::new(100 + i, 32).frame(0);
            let recaptured = simulate_recapture_face(&img, 200 + i);
            let b = compute_iqms(&img, &lowpass_reference(&img, 0.5)).unwrap();
            let a = compute_iqms(&recaptured, &lowpass_reference(&recaptured, 0.5)).unwrap();
            bona_mse += b.mse;
            attack_mse += a.mse;
        }
        assert!(
            bona_mse / n as f64 > attack_mse / n as f64,
            "bona {bona_mse} vs attack {attack_mse}"
        );
    }

    #[test]
    fn face_frames_of_same_identity_embed_close() {
        use crate::face::{EmbeddingExtractor, ToyEmbedding};
        use crate::speaker::cosine_similarity;
        let p = SyntheticFaceProfile::new(77, 32);
        let a = ToyEmbedding.embed(&p.frame(0));
        let b = ToyEmbedding.embed(&p.frame(1));
        let other = ToyEmbedding.embed(&SyntheticFaceProfile::new(78, 32).frame(0));
        let same = cosine_similarity(&a.v, &b.v).unwrap();
        let diff = cosine_similarity(&a.v, &other.v).unwrap();
        assert!(same > 0.95, "same-identity cosine {same}");
        assert!(same > diff, "{same} vs {diff}");
    }

    #[test]
    fn gaussian_kernel_is_reused_consistently() {
        // simulate_recapture_face relies on the same kernel construction as
        // the PAD reference; a radius change there would silently shift the
        // attack channel.
        assert_eq!(crate::pad::iqm::gaussian_kernel(1.5).len(), 13); // radius ceil(6) = 6
    }
}
