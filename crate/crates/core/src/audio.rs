//! Mono PCM clips, WAV I/O and band-limited resampling.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Internal processing rate. Everything is resampled to this on load.
pub const SAMPLE_RATE: u32 = 16_000;

/// A mono buffer of samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
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

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Same rate, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Crops `[start_s, end_s)` using floor on both sample indices.
    pub fn crop(&self, start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s >= 0.0 && end_s > start_s) {
            return Err(Error::invalid(format!(
                "bad crop window [{start_s}, {end_s}]"
            )));
        }
        let sr = self.sample_rate as f64;
        let a = (start_s * sr + 1e-9).floor() as usize;
        let b = (end_s * sr + 1e-9).floor() as usize;
        if b > self.samples.len() {
            return Err(Error::invalid(format!(
                "crop end {end_s} s is past clip end {:.4} s",
                self.duration_s()
            )));
        }
        Ok(self.with_samples(self.samples[a..b].to_vec()))
    }

    pub fn to_rate(&self, rate: u32) -> Self {
        if rate == self.sample_rate {
            return self.clone();
        }
        Self {
            samples: resample(&self.samples, self.sample_rate, rate),
            sample_rate: rate,
        }
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub(crate) fn clip_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(-1.0, 1.0);
    }
}

/// Reads a mono WAV file (16-bit PCM or 32-bit float) and resamples it to
/// [`SAMPLE_RATE`].
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let decode = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| decode(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(decode(format!(
            "{} channels; only mono input is supported",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| decode(e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|e| decode(e.to_string()))?,
        (fmt, bits) => {
            return Err(decode(format!("unsupported sample format {fmt:?}/{bits}-bit")));
        }
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(decode("non-finite samples".into()));
    }
    let clip = AudioClip {
        samples,
        sample_rate: spec.sample_rate,
    };
    Ok(clip.to_rate(SAMPLE_RATE))
}

/// Writes 16-bit PCM, rounding to the nearest code.
pub fn write_wav_pcm16(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io = |e: hound::Error| match e {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::invalid(other.to_string()),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(io)?;
    for &s in &clip.samples {
        w.write_sample(pcm16(s)).map_err(io)?;
    }
    w.finalize().map_err(io)
}

#[inline]
pub fn pcm16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

// Zero crossings of the interpolation kernel on each side, at full bandwidth.
const SINC_HALF_WIDTH: f64 = 16.0;
// Kernel table resolution, entries per zero crossing.
const KERNEL_STEPS: usize = 4096;

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `sinc(u) * blackman(u / SINC_HALF_WIDTH)` for `u >= 0`, tabulated.
fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = SINC_HALF_WIDTH as usize * KERNEL_STEPS;
        (0..=n + 1)
            .map(|i| {
                let u = i as f64 / KERNEL_STEPS as f64;
                if u >= SINC_HALF_WIDTH {
                    0.0
                } else {
                    sinc(u) * blackman(u / SINC_HALF_WIDTH)
                }
            })
            .collect()
    })
}

#[inline]
fn kernel(table: &[f64], u: f64) -> f64 {
    let pos = u.abs() * KERNEL_STEPS as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

/// Resamples between two rates with a Blackman-windowed sinc kernel.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    let len = ((x.len() as f64) * to as f64 / from as f64).round() as usize;
    resample_with_step(x, len, from as f64 / to as f64)
}

/// Stretches or squeezes `x` to exactly `len` samples. Reading position
/// advances by `x.len() / len` input samples per output sample.
pub fn resample_to_len(x: &[f64], len: usize) -> Vec<f64> {
    if len == 0 || x.is_empty() {
        return vec![0.0; len];
    }
    resample_with_step(x, len, x.len() as f64 / len as f64)
}

fn resample_with_step(x: &[f64], len: usize, step: f64) -> Vec<f64> {
    if (step - 1.0).abs() < 1e-12 && len == x.len() {
        return x.to_vec();
    }
    // Lowpass at the output Nyquist when decimating.
    let cutoff = (1.0 / step).min(1.0);
    let half = SINC_HALF_WIDTH / cutoff;
    let n = x.len() as isize;
    let table = kernel_table();
    (0..len)
        .map(|m| {
            let t = m as f64 * step;
            let lo = ((t - half).ceil() as isize).max(0);
            let hi = ((t + half).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                acc += x[k as usize] * kernel(table, cutoff * (t - k as f64));
            }
            cutoff * acc
        })
        .collect()
}
