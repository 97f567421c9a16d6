//! Convolution reverb with synthetic room impulse responses.
//!
//! The response is a unit direct path at `t = 0` followed by a white Gaussian
//! tail whose amplitude falls by 60 dB at `rt60_s`. The tail is scaled to unit
//! energy, so the direct-to-reverberant ratio is 0 dB.

use rand::Rng;
use rand_distr::StandardNormal;

use super::fft;
use crate::audio::{clip_unit, AudioClip};
use crate::error::{Error, Result};

pub const RT60_RANGE: (f64, f64) = (0.1, 1.0);

/// Extra response length kept past `rt60_s`.
const TAIL_MARGIN_S: f64 = 0.1;

pub fn room_impulse_response<R: Rng + ?Sized>(
    rt60_s: f64,
    sample_rate: u32,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(RT60_RANGE.0..=RT60_RANGE.1).contains(&rt60_s) {
        return Err(Error::invalid(format!(
            "rt60 {rt60_s} s outside [{}, {}] s",
            RT60_RANGE.0, RT60_RANGE.1
        )));
    }
    let sr = sample_rate as f64;
    let len = ((rt60_s + TAIL_MARGIN_S) * sr).ceil() as usize;
    let mut h = Vec::with_capacity(len);
    h.push(0.0);
    for i in 1..len {
        let t = i as f64 / sr;
        let g: f64 = rng.sample(StandardNormal);
        h.push(g * 10f64.powf(-3.0 * t / rt60_s));
    }
    let energy: f64 = h.iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let s = energy.sqrt();
        h.iter_mut().for_each(|v| *v /= s);
    }
    h[0] = 1.0;
    Ok(h)
}

/// Convolves with `rir`, truncates to the input length and clips.
pub fn convolve(clip: &AudioClip, rir: &[f64]) -> AudioClip {
    let mut out = fft::convolve_truncated(&clip.samples, rir);
    clip_unit(&mut out);
    clip.with_samples(out)
}

pub fn reverberate<R: Rng + ?Sized>(clip: &AudioClip, rt60_s: f64, rng: &mut R) -> Result<AudioClip> {
    let rir = room_impulse_response(rt60_s, clip.sample_rate, rng)?;
    Ok(convolve(clip, &rir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn band_energy(h: &[f64], from_s: f64, to_s: f64) -> f64 {
        let a = (from_s * 16_000.0) as usize;
        let b = ((to_s * 16_000.0) as usize).min(h.len());
        h[a..b].iter().map(|v| v * v).sum()
    }

    #[test]
    fn envelope_drops_sixty_db_at_rt60() {
        for (i, rt60) in [0.1, 0.3, 0.6, 1.0].into_iter().enumerate() {
            let h = room_impulse_response(rt60, 16_000, &mut seed::rng(7, &[i as u64])).unwrap();
            assert_eq!(h[0], 1.0);
            let early = band_energy(&h, 0.0, 0.05);
            let late = band_energy(&h, rt60, rt60 + 0.05);
            let drop = 10.0 * (early / late).log10();
            assert!((drop - 60.0).abs() <= 6.0, "rt60 {rt60}: {drop} dB");
        }
    }

    #[test]
    fn impulse_reproduces_rir() {
        let mut x = vec![0.0; 8000];
        x[0] = 1.0;
        let clip = AudioClip::new(x, 16_000).unwrap();
        let rir = room_impulse_response(0.3, 16_000, &mut seed::rng(1, &[])).unwrap();
        let y = convolve(&clip, &rir);
        for (a, b) in y.samples.iter().zip(&rir) {
            assert!((a - b.clamp(-1.0, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn silence_stays_silent() {
        let clip = AudioClip::new(vec![0.0; 4000], 16_000).unwrap();
        let y = reverberate(&clip, 0.5, &mut seed::rng(0, &[])).unwrap();
        assert!(y.samples.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(y.len(), 4000);
    }

    #[test]
    fn rt60_out_of_range() {
        assert!(room_impulse_response(0.05, 16_000, &mut seed::rng(0, &[])).is_err());
        assert!(room_impulse_response(1.5, 16_000, &mut seed::rng(0, &[])).is_err());
    }
}
