use crate::audio::{clip_unit, AudioClip};
use crate::error::{Error, Result};

/// Scales by `10^(gain_db / 20)` and hard-clips to `[-1, 1]`.
pub fn apply_gain(clip: &AudioClip, gain_db: f64) -> Result<AudioClip> {
    if !gain_db.is_finite() {
        return Err(Error::invalid(format!("gain {gain_db} dB is not finite")));
    }
    if gain_db == 0.0 {
        return Ok(clip.clone());
    }
    let g = 10f64.powf(gain_db / 20.0);
    let mut out: Vec<f64> = clip.samples.iter().map(|s| s * g).collect();
    clip_unit(&mut out);
    Ok(clip.with_samples(out))
}

pub fn invert_polarity(clip: &AudioClip) -> AudioClip {
    clip.with_samples(clip.samples.iter().map(|s| -s).collect())
}
