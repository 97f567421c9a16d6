//! Butterworth lowpass and highpass filters as cascaded biquads.
//!
//! Sections come from the bilinear transform with prewarping at the cutoff,
//! so the cascade is exactly 3 dB down at `cutoff_hz`. Filter state starts at
//! the steady-state response to the first input sample, which keeps a DC
//! offset from ringing through a highpass.

use std::f64::consts::PI;

use crate::audio::{clip_unit, AudioClip};
use crate::error::{Error, Result};

/// Overall filter order (three second-order sections).
pub const FILTER_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn design(kind: FilterKind, cutoff_hz: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let (b0, b1, b2) = match kind {
            FilterKind::Lowpass => ((1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0),
            FilterKind::Highpass => ((1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0),
        };
        let a0 = 1.0 + alpha;
        Self {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
            z1: 0.0,
            z2: 0.0,
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Puts the section in steady state for a constant input `x`.
    fn settle(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.z2 = self.b2 * x - self.a2 * y;
        self.z1 = y - self.b0 * x;
    }

    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        // Transposed direct form II.
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }
}

/// Second-order sections of a Butterworth filter of even `order`.
pub fn butterworth(kind: FilterKind, order: usize, cutoff_hz: f64, sample_rate: f64) -> Vec<Biquad> {
    debug_assert!(order >= 2 && order % 2 == 0);
    (1..=order / 2)
        .map(|k| {
            let theta = (2 * k - 1) as f64 * PI / (2 * order) as f64;
            let q = 1.0 / (2.0 * theta.cos());
            Biquad::design(kind, cutoff_hz, sample_rate, q)
        })
        .collect()
}

/// Magnitude response of a cascade at `freq_hz`.
pub fn magnitude(sections: &[Biquad], freq_hz: f64, sample_rate: f64) -> f64 {
    use rustfft::num_complex::Complex64;
    let w = 2.0 * PI * freq_hz / sample_rate;
    let z1 = Complex64::from_polar(1.0, -w);
    let z2 = z1 * z1;
    sections
        .iter()
        .map(|s| ((s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)).norm())
        .product()
}

fn run(kind: FilterKind, clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    let nyquist = clip.sample_rate as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
        )));
    }
    let mut sections = butterworth(kind, FILTER_ORDER, cutoff_hz, clip.sample_rate as f64);
    let mut out = clip.samples.clone();
    if let Some(&first) = out.first() {
        let mut x0 = first;
        for s in &mut sections {
            s.settle(x0);
            x0 *= s.dc_gain();
        }
    }
    for s in &mut sections {
        for v in out.iter_mut() {
            *v = s.process(*v);
        }
    }
    clip_unit(&mut out);
    Ok(clip.with_samples(out))
}

pub fn lowpass(clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    run(FilterKind::Lowpass, clip, cutoff_hz)
}

pub fn highpass(clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    run(FilterKind::Highpass, clip, cutoff_hz)
}
