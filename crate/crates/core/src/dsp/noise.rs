use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::fft;
use crate::audio::{clip_unit, rms, AudioClip};
use crate::error::{Error, Result};

/// Noise with power spectral density proportional to `1 / f^exponent`,
/// normalized to unit RMS. Exponent 0 is white, 1 pink, 2 brown, negative
/// values tilt towards high frequencies.
pub fn colored_noise<R: Rng + ?Sized>(len: usize, exponent: f64, rng: &mut R) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let size = len.next_power_of_two().max(2);
    let mut buf: Vec<Complex64> = (0..size)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    if exponent != 0.0 {
        fft::forward(size).process(&mut buf);
        buf[0] = Complex64::new(0.0, 0.0);
        for k in 1..size {
            // Mirror so the spectrum stays Hermitian.
            let f = k.min(size - k) as f64;
            buf[k] *= f.powf(-exponent / 2.0);
        }
        fft::inverse(size).process(&mut buf);
    }
    let mut noise: Vec<f64> = buf[..len].iter().map(|c| c.re).collect();
    let r = rms(&noise);
    if r > 0.0 {
        noise.iter_mut().for_each(|v| *v /= r);
    }
    noise
}

/// Adds colored noise at `snr_db` relative to the clip's RMS, then clips.
pub fn add_colored_noise<R: Rng + ?Sized>(
    clip: &AudioClip,
    snr_db: f64,
    exponent: f64,
    rng: &mut R,
) -> Result<AudioClip> {
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("snr {snr_db} dB is not finite")));
    }
    if !(-2.0..=2.0).contains(&exponent) {
        return Err(Error::invalid(format!("spectral exponent {exponent} outside [-2, 2]")));
    }
    let signal_rms = clip.rms();
    if signal_rms <= 0.0 {
        return Err(Error::invalid("clip is silent; SNR is undefined"));
    }
    let noise_rms = signal_rms / 10f64.powf(snr_db / 20.0);
    let noise = colored_noise(clip.len(), exponent, rng);
    let mut out: Vec<f64> = clip
        .samples
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + noise_rms * n)
        .collect();
    clip_unit(&mut out);
    Ok(clip.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn sine(secs: f64, amp: f64) -> AudioClip {
        let n = (secs * 16_000.0) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn realized_snr(input: &AudioClip, output: &AudioClip) -> f64 {
        let diff: Vec<f64> = output.samples.iter().zip(&input.samples).map(|(o, i)| o - i).collect();
        20.0 * (input.rms() / rms(&diff)).log10()
    }

    #[test]
    fn realized_snr_matches_request() {
        let x = sine(2.0, 0.3);
        let mut rng = seed::rng(1, &[]);
        for snr in [3.0, 10.0, 25.0] {
            for exponent in [-1.0, 0.0, 1.0] {
                let y = add_colored_noise(&x, snr, exponent, &mut rng).unwrap();
                let got = realized_snr(&x, &y);
                assert!((got - snr).abs() <= 0.5, "snr {snr} exp {exponent}: {got}");
            }
        }
    }

    #[test]
    fn high_snr_is_nearly_transparent() {
        let x = sine(2.0, 0.5);
        let y = add_colored_noise(&x, 60.0, 0.0, &mut seed::rng(2, &[])).unwrap();
        let max = y.samples.iter().zip(&x.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Noise RMS is 1e-3 of the signal RMS; Gaussian peaks stay within 6 sigma.
        assert!(max < 6.0 * 1e-3 * x.rms(), "{max}");
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let n = colored_noise(32_000, 0.0, &mut seed::rng(3, &[]));
        let num: f64 = n.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = n.iter().map(|v| v * v).sum();
        assert!((num / den).abs() < 0.05);
    }

    #[test]
    fn pink_noise_is_correlated() {
        let n = colored_noise(32_000, 1.0, &mut seed::rng(3, &[]));
        let num: f64 = n.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = n.iter().map(|v| v * v).sum();
        assert!(num / den > 0.3);
    }

    #[test]
    fn silence_is_an_error() {
        let z = AudioClip::new(vec![0.0; 100], 16_000).unwrap();
        assert!(add_colored_noise(&z, 10.0, 0.0, &mut seed::rng(0, &[])).is_err());
        let x = sine(0.1, 0.3);
        assert!(add_colored_noise(&x, f64::INFINITY, 0.0, &mut seed::rng(0, &[])).is_err());
    }
}
