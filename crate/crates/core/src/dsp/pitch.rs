//! Duration-preserving pitch shift: phase-vocoder time stretch by the pitch
//! ratio, then band-limited resampling back to the original length.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft;
use crate::audio::{clip_unit, resample_to_len, AudioClip};
use crate::error::{Error, Result};

pub const WINDOW: usize = 1024;
pub const HOP: usize = 256;

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Stretches `x` by `ratio` (output is `ratio` times longer) without moving
/// its frequencies.
pub fn time_stretch(x: &[f64], ratio: f64) -> Vec<f64> {
    let n = x.len();
    let out_len = (n as f64 * ratio).round() as usize;
    let analysis_hop = HOP as f64 / ratio;
    let half = WINDOW / 2;
    let frames = (n as f64 / analysis_hop).ceil() as usize + 2;

    let pad_end = ((frames - 1) as f64 * analysis_hop).ceil() as usize + WINDOW;
    let mut padded = vec![0.0; pad_end.max(n + WINDOW)];
    padded[half..half + n].copy_from_slice(x);

    let window = fft::hann(WINDOW);
    let fwd = fft::forward(WINDOW);
    let inv = fft::inverse(WINDOW);
    let bins = WINDOW / 2 + 1;

    let synth_len = (frames - 1) * HOP + WINDOW;
    let mut out = vec![0.0; synth_len];
    let mut norm = vec![0.0; synth_len];
    let mut prev_phase = vec![0.0; bins];
    let mut acc_phase = vec![0.0; bins];
    let mut prev_pos = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); WINDOW];

    for k in 0..frames {
        let pos = (k as f64 * analysis_hop).round() as usize;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(padded[pos + i] * window[i], 0.0);
        }
        fwd.process(&mut buf);

        let delta = pos.saturating_sub(prev_pos).max(1) as f64;
        for bin in 0..bins {
            let phase = buf[bin].arg();
            if k == 0 {
                acc_phase[bin] = phase;
            } else {
                let expected = 2.0 * PI * bin as f64 * delta / WINDOW as f64;
                let deviation = wrap_phase(phase - prev_phase[bin] - expected);
                let per_sample = (expected + deviation) / delta;
                acc_phase[bin] = wrap_phase(acc_phase[bin] + per_sample * HOP as f64);
            }
            prev_phase[bin] = phase;
            let mag = buf[bin].norm();
            buf[bin] = Complex64::from_polar(mag, acc_phase[bin]);
        }
        for bin in 1..WINDOW / 2 {
            buf[WINDOW - bin] = buf[bin].conj();
        }
        inv.process(&mut buf);

        let start = k * HOP;
        for i in 0..WINDOW {
            let w = window[i];
            out[start + i] += buf[i].re / WINDOW as f64 * w;
            norm[start + i] += w * w;
        }
        prev_pos = pos;
    }

    out.iter_mut().zip(&norm).for_each(|(o, w)| {
        if *w > 1e-6 {
            *o /= w;
        }
    });
    out[half..half + out_len].to_vec()
}

/// Shifts pitch by `semitones`, keeping the clip length exactly.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip> {
    if !(-12.0..=12.0).contains(&semitones) {
        return Err(Error::invalid(format!("pitch shift {semitones} outside [-12, 12] semitones")));
    }
    if clip.len() < WINDOW {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than the {WINDOW}-sample analysis window",
            clip.len()
        )));
    }
    if semitones == 0.0 {
        // The vocoder is only approximately the identity; skip it.
        return Ok(clip.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(&clip.samples, ratio);
    let mut out = resample_to_len(&stretched, clip.len());
    clip_unit(&mut out);
    Ok(clip.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64) -> Vec<f64> {
        let n = (secs * 16_000.0) as usize;
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16_000.0).sin())
            .collect()
    }

    #[test]
    fn unit_stretch_is_close_to_identity() {
        let x = sine(330.0, 0.5);
        let y = time_stretch(&x, 1.0);
        assert_eq!(y.len(), x.len());
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn stretch_length() {
        let x = sine(330.0, 0.5);
        assert_eq!(time_stretch(&x, 2.0).len(), 16_000);
        assert_eq!(time_stretch(&x, 0.5).len(), 4000);
    }

    #[test]
    fn zero_shift_and_errors() {
        let c = AudioClip::new(sine(200.0, 0.2), 16_000).unwrap();
        assert_eq!(pitch_shift(&c, 0.0).unwrap(), c);
        assert!(pitch_shift(&c, 13.0).is_err());
        let short = AudioClip::new(vec![0.1; 1000], 16_000).unwrap();
        assert!(pitch_shift(&short, 2.0).is_err());
    }

    #[test]
    fn preserves_length() {
        let c = AudioClip::new(sine(200.0, 0.37), 16_000).unwrap();
        for s in [-7.3, -2.0, 3.5, 11.9] {
            assert_eq!(pitch_shift(&c, s).unwrap().len(), c.len());
        }
    }
}
