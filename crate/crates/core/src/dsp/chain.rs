use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{add_colored_noise, apply_gain, highpass, invert_polarity, lowpass, pitch_shift, reverberate};
use crate::audio::AudioClip;
use crate::error::Result;
use crate::policy::{Augmentation, AugmentationPolicy};

/// RT60 range drawn from when reverberation is applied. Not a policy parameter.
pub const CHAIN_RT60_S: (f64, f64) = (0.1, 0.6);
/// Spectral exponent range drawn from when colored noise is applied.
pub const CHAIN_NOISE_EXPONENT: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAugmentation {
    pub augmentation: Augmentation,
    pub reason: String,
}

/// What one chain application actually did.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AppliedChainRecord {
    /// One flag per augmentation, canonical order.
    pub applied: [bool; 7],
    /// Realized parameters for every applied augmentation, keyed by unit-suffixed name.
    pub realized_params: BTreeMap<Augmentation, BTreeMap<String, f64>>,
    /// Augmentations whose coin flip came up but which failed on this clip.
    pub skipped: Vec<SkippedAugmentation>,
}

impl AppliedChainRecord {
    pub fn is_applied(&self, aug: Augmentation) -> bool {
        self.applied[aug.index()]
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * u
    }
}

/// Applies a random augmentation chain drawn from `policy`.
///
/// Augmentations are visited in [`Augmentation::ALL`] order. For each one a
/// coin flip with the policy's probability decides whether it runs; if it
/// does, its parameters are drawn uniformly from the policy bounds. An
/// augmentation that fails on this particular clip (noise on silence, pitch
/// shift on a clip shorter than the analysis window) is skipped and listed in
/// [`AppliedChainRecord::skipped`].
pub fn apply_chain<R: Rng + ?Sized>(
    clip: &AudioClip,
    policy: &AugmentationPolicy,
    rng: &mut R,
) -> Result<(AudioClip, AppliedChainRecord)> {
    policy.validate()?;
    let mut record = AppliedChainRecord::default();
    let mut current = clip.clone();

    for aug in Augmentation::ALL {
        let flip: f64 = rng.random();
        if flip >= policy.prob(aug) {
            continue;
        }
        let (result, params): (Result<AudioClip>, Vec<(&str, f64)>) = match aug {
            Augmentation::Pitch => {
                let s = uniform(rng, policy.pitch_min, policy.pitch_max);
                (pitch_shift(&current, s), vec![("semitones", s)])
            }
            Augmentation::Reverb => {
                let rt60 = uniform(rng, CHAIN_RT60_S.0, CHAIN_RT60_S.1);
                (reverberate(&current, rt60, rng), vec![("rt60_s", rt60)])
            }
            Augmentation::Gain => {
                let g = uniform(rng, policy.gain_min, policy.gain_max);
                (apply_gain(&current, g), vec![("gain_db", g)])
            }
            Augmentation::ColoredNoise => {
                let snr = uniform(rng, policy.snr_min, policy.snr_max);
                let exponent = uniform(rng, CHAIN_NOISE_EXPONENT.0, CHAIN_NOISE_EXPONENT.1);
                (
                    add_colored_noise(&current, snr, exponent, rng),
                    vec![("snr_db", snr), ("exponent", exponent)],
                )
            }
            Augmentation::Highpass => {
                let f = uniform(rng, policy.high_min, policy.high_max);
                (highpass(&current, f), vec![("cutoff_hz", f)])
            }
            Augmentation::Lowpass => {
                let f = uniform(rng, policy.low_min, policy.low_max);
                (lowpass(&current, f), vec![("cutoff_hz", f)])
            }
            Augmentation::Polarity => (Ok(invert_polarity(&current)), vec![]),
        };
        match result {
            Ok(next) => {
                current = next;
                record.applied[aug.index()] = true;
                record.realized_params.insert(
                    aug,
                    params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                );
            }
            Err(e) => record.skipped.push(SkippedAugmentation {
                augmentation: aug,
                reason: e.to_string(),
            }),
        }
    }
    Ok((current, record))
}
