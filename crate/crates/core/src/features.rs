//! Fixed-length clip embeddings: per-band mean and standard deviation of a
//! 40-band log-mel spectrogram (25 ms Hann frames, 10 ms hop, 512-point FFT,
//! HTK mel scale over 0 to 8 kHz, energies floored at 1e-10 before the log).

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::dsp::fft;
use crate::error::{Error, Result};

pub const N_MELS: usize = 40;
pub const FEATURE_DIM: usize = 2 * N_MELS;
pub const FRAME_LEN: usize = 400;
pub const FRAME_HOP: usize = 160;
pub const N_FFT: usize = 512;
pub const ENERGY_FLOOR: f64 = 1e-10;
/// Shortest clip accepted, with 1 ms of slack for crop rounding.
pub const MIN_EMBED_SAMPLES: usize = 3200 - 16;

/// Names the embedding backend, as in the `feature` config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureKind {
    #[default]
    #[serde(rename = "logmel-stats")]
    LogMelStats,
}

/// 40 log-mel means followed by 40 log-mel standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn means(&self) -> &[f64] {
        &self.0[..N_MELS]
    }

    pub fn stds(&self) -> &[f64] {
        &self.0[N_MELS..]
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sq_dist(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

struct Frontend {
    window: Vec<f64>,
    // Per band: first bin and the weights from there on.
    filters: Vec<(usize, Vec<f64>)>,
}

fn frontend() -> &'static Frontend {
    static FRONTEND: OnceLock<Frontend> = OnceLock::new();
    FRONTEND.get_or_init(|| {
        let window = (0..FRAME_LEN)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (FRAME_LEN - 1) as f64).cos())
            .collect();
        let sr = SAMPLE_RATE as f64;
        let (lo, hi) = (hz_to_mel(0.0), hz_to_mel(sr / 2.0));
        let edges: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (N_MELS + 1) as f64))
            .collect();
        let bin_hz = sr / N_FFT as f64;
        let filters = (0..N_MELS)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..=N_FFT / 2)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > left && f <= center {
                            (f - left) / (center - left)
                        } else if f > center && f < right {
                            (right - f) / (right - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map(|w| w.0).unwrap_or(0);
                (first, weights.into_iter().map(|w| w.1).collect())
            })
            .collect();
        Frontend { window, filters }
    })
}

/// Log-mel spectrogram, one row of [`N_MELS`] values per frame.
pub fn log_mel_frames(samples: &[f64]) -> Vec<[f64; N_MELS]> {
    if samples.len() < FRAME_LEN {
        return Vec::new();
    }
    let fe = frontend();
    let plan = fft::forward(N_FFT);
    let n_frames = 1 + (samples.len() - FRAME_LEN) / FRAME_HOP;
    let mut buf = vec![Complex64::new(0.0, 0.0); N_FFT];
    let mut power = vec![0.0; N_FFT / 2 + 1];
    (0..n_frames)
        .map(|t| {
            let frame = &samples[t * FRAME_HOP..t * FRAME_HOP + FRAME_LEN];
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < FRAME_LEN {
                    Complex64::new(frame[i] * fe.window[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            plan.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            let mut row = [0.0; N_MELS];
            for (r, (first, w)) in row.iter_mut().zip(&fe.filters) {
                let e: f64 = w.iter().zip(&power[*first..]).map(|(a, b)| a * b).sum();
                *r = e.max(ENERGY_FLOOR).ln();
            }
            row
        })
        .collect()
}

pub fn embed(clip: &AudioClip) -> Result<FeatureVector> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "embedding expects {SAMPLE_RATE} Hz audio, got {}",
            clip.sample_rate
        )));
    }
    if clip.len() < MIN_EMBED_SAMPLES {
        return Err(Error::invalid(format!(
            "clip of {:.3} s is shorter than 0.2 s",
            clip.duration_s()
        )));
    }
    let frames = log_mel_frames(&clip.samples);
    let n = frames.len() as f64;
    let mut out = vec![0.0; FEATURE_DIM];
    for b in 0..N_MELS {
        let mean = frames.iter().map(|f| f[b]).sum::<f64>() / n;
        let var = frames.iter().map(|f| (f[b] - mean).powi(2)).sum::<f64>() / n;
        out[b] = mean;
        out[N_MELS + b] = var.max(0.0).sqrt();
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("embedding is not finite"));
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000).unwrap()
    }

    #[test]
    fn dimension_and_determinism() {
        let c = clip((0..5000).map(|i| (i as f64 * 0.013).sin() * 0.3).collect());
        let a = embed(&c).unwrap();
        assert_eq!(a.dim(), FEATURE_DIM);
        assert_eq!(a, embed(&c).unwrap());
    }

    #[test]
    fn silence_hits_the_floor() {
        let v = embed(&clip(vec![0.0; 4000])).unwrap();
        let floor = ENERGY_FLOOR.ln();
        assert!(v.means().iter().all(|m| (m - floor).abs() < 1e-12));
        assert!(v.stds().iter().all(|s| *s < 1e-6));
    }

    #[test]
    fn repetition_keeps_means() {
        // Period 80 samples divides the hop, so every frame sees the same waveform.
        let one: Vec<f64> = (0..4800)
            .map(|i| {
                let t = i as f64 / 80.0 * 2.0 * std::f64::consts::PI;
                0.3 * t.sin() + 0.1 * (3.0 * t).sin() + 0.05 * (7.0 * t).cos()
            })
            .collect();
        let mut two = one.clone();
        two.extend_from_slice(&one);
        let a = embed(&clip(one)).unwrap();
        let b = embed(&clip(two)).unwrap();
        for (x, y) in a.means().iter().zip(b.means()) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn louder_raises_every_mean() {
        let mut rng = crate::seed::rng(4, &[]);
        for _ in 0..5 {
            let s: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.05..0.05)).collect();
            let loud: Vec<f64> = s.iter().map(|v| v * 10.0).collect();
            let a = embed(&clip(s)).unwrap();
            let b = embed(&clip(loud)).unwrap();
            assert!(a.means().iter().zip(b.means()).all(|(x, y)| y > x));
        }
    }

    #[test]
    fn too_short_or_wrong_rate() {
        assert!(embed(&clip(vec![0.1; 2000])).is_err());
        let c = AudioClip::new(vec![0.1; 8000], 8000).unwrap();
        assert!(embed(&c).is_err());
    }
}
