//! The 17-parameter augmentation distribution and its sampling priors.
//!
//! A policy holds one application probability per augmentation (seven, in
//! [`Augmentation::ALL`] order) plus `[min, max]` bounds for the uniform
//! distributions that realized parameters are drawn from: lowpass cutoff,
//! highpass cutoff, pitch shift, noise SNR and gain. Reverberation and
//! polarity inversion have no policy-controlled parameters.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::report::sig9;

/// The seven augmentations, in the order a chain applies them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    Pitch,
    Reverb,
    Gain,
    ColoredNoise,
    Highpass,
    Lowpass,
    Polarity,
}

impl Augmentation {
    pub const ALL: [Augmentation; 7] = [
        Augmentation::Pitch,
        Augmentation::Reverb,
        Augmentation::Gain,
        Augmentation::ColoredNoise,
        Augmentation::Highpass,
        Augmentation::Lowpass,
        Augmentation::Polarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Augmentation::Pitch => "pitch",
            Augmentation::Reverb => "reverb",
            Augmentation::Gain => "gain",
            Augmentation::ColoredNoise => "colored_noise",
            Augmentation::Highpass => "highpass",
            Augmentation::Lowpass => "lowpass",
            Augmentation::Polarity => "polarity",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn prob_key(self) -> &'static str {
        match self {
            Augmentation::Pitch => "p_pitch",
            Augmentation::Reverb => "p_reverb",
            Augmentation::Gain => "p_gain",
            Augmentation::ColoredNoise => "p_colored_noise",
            Augmentation::Highpass => "p_highpass",
            Augmentation::Lowpass => "p_lowpass",
            Augmentation::Polarity => "p_polarity",
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An augmentation distribution.
///
/// Serializes as a flat map of its 17 named parameters, the same shape as
/// [`serialize_policy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationPolicy {
    /// Application probabilities in [`Augmentation::ALL`] order.
    pub probs: [f64; 7],
    /// Lowpass cutoff bounds, Hz.
    pub low_min: f64,
    pub low_max: f64,
    /// Highpass cutoff bounds, Hz.
    pub high_min: f64,
    pub high_max: f64,
    /// Pitch shift bounds, semitones.
    pub pitch_min: f64,
    pub pitch_max: f64,
    /// Colored-noise SNR bounds, dB.
    pub snr_min: f64,
    pub snr_max: f64,
    /// Gain bounds, dB.
    pub gain_min: f64,
    pub gain_max: f64,
}

const BOUND_KEYS: [&str; 10] = [
    "low_min", "low_max", "high_min", "high_max", "pitch_min", "pitch_max", "snr_min",
    "snr_max", "gain_min", "gain_max",
];

/// Number of scalar degrees of freedom in a policy.
pub const NUM_PARAMS: usize = 17;

impl AugmentationPolicy {
    /// A policy that never applies anything. Bounds sit in the middle of the
    /// default priors.
    pub fn identity() -> Self {
        Self {
            probs: [0.0; 7],
            low_min: 300.0,
            low_max: 3000.0,
            high_min: 2500.0,
            high_max: 5000.0,
            pitch_min: -4.0,
            pitch_max: 4.0,
            snr_min: 2.5,
            snr_max: 20.0,
            gain_min: -15.0,
            gain_max: 6.5,
        }
    }

    pub fn with_probs(mut self, probs: [f64; 7]) -> Self {
        self.probs = probs;
        self
    }

    pub fn prob(&self, aug: Augmentation) -> f64 {
        self.probs[aug.index()]
    }

    fn bounds(&self) -> [f64; 10] {
        [
            self.low_min,
            self.low_max,
            self.high_min,
            self.high_max,
            self.pitch_min,
            self.pitch_max,
            self.snr_min,
            self.snr_max,
            self.gain_min,
            self.gain_max,
        ]
    }

    fn from_parts(probs: [f64; 7], b: [f64; 10]) -> Self {
        Self {
            probs,
            low_min: b[0],
            low_max: b[1],
            high_min: b[2],
            high_max: b[3],
            pitch_min: b[4],
            pitch_max: b[5],
            snr_min: b[6],
            snr_max: b[7],
            gain_min: b[8],
            gain_max: b[9],
        }
    }

    /// All 17 parameters: probabilities first, then bounds.
    pub fn to_vec(&self) -> Vec<f64> {
        self.probs.iter().copied().chain(self.bounds()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for aug in Augmentation::ALL {
            let p = self.prob(aug);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::policy(aug.prob_key(), format!("probability {p} outside [0, 1]")));
            }
        }
        for (key, v) in BOUND_KEYS.iter().zip(self.bounds()) {
            if !v.is_finite() {
                return Err(Error::policy(*key, "not finite"));
            }
        }
        let strict = |lo: f64, hi: f64, key: &str| {
            if lo < hi {
                Ok(())
            } else {
                Err(Error::policy(key, format!("min {lo} must be below max {hi}")))
            }
        };
        strict(self.low_min, self.low_max, "low_min")?;
        if self.high_min > self.high_max {
            return Err(Error::policy(
                "high_min",
                format!("min {} exceeds max {}", self.high_min, self.high_max),
            ));
        }
        strict(self.pitch_min, self.pitch_max, "pitch_min")?;
        strict(self.snr_min, self.snr_max, "snr_min")?;
        strict(self.gain_min, self.gain_max, "gain_min")?;
        if self.low_min <= 0.0 {
            return Err(Error::policy("low_min", "cutoff must be positive"));
        }
        if self.high_min <= 0.0 {
            return Err(Error::policy("high_min", "cutoff must be positive"));
        }
        if self.pitch_min < -12.0 || self.pitch_max > 12.0 {
            return Err(Error::policy("pitch_min", "pitch bounds must lie in [-12, 12]"));
        }
        Ok(())
    }
}

/// The application probabilities, canonical order.
pub fn probability_vector(policy: &AugmentationPolicy) -> [f64; 7] {
    policy.probs
}

/// Euclidean distance between the probability vectors of two policies.
/// Range bounds do not enter.
pub fn policy_distance(a: &AugmentationPolicy, b: &AugmentationPolicy) -> f64 {
    probability_vector(a)
        .iter()
        .zip(probability_vector(b).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A closed sampling interval; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.lo == self.hi {
            self.lo
        } else {
            (self.lo + (self.hi - self.lo) * u).clamp(self.lo, self.hi)
        }
    }
}

/// Uniform sampling priors for all 17 policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyPriors {
    pub probs: [Interval; 7],
    pub low_min: Interval,
    pub low_max: Interval,
    pub high_min: Interval,
    pub high_max: Interval,
    pub pitch_min: Interval,
    pub pitch_max: Interval,
    pub snr_min: Interval,
    pub snr_max: Interval,
    pub gain_min: Interval,
    pub gain_max: Interval,
}

impl Default for PolicyPriors {
    fn default() -> Self {
        Self {
            probs: [Interval::new(0.0, 1.0); 7],
            low_min: Interval::new(100.0, 500.0),
            low_max: Interval::new(1000.0, 5000.0),
            high_min: Interval::new(1000.0, 4000.0),
            high_max: Interval::new(4000.0, 6000.0),
            pitch_min: Interval::new(-6.0, -2.0),
            pitch_max: Interval::new(2.0, 6.0),
            snr_min: Interval::new(0.0, 5.0),
            snr_max: Interval::new(10.0, 30.0),
            gain_min: Interval::new(-20.0, -10.0),
            gain_max: Interval::new(3.0, 10.0),
        }
    }
}

impl PolicyPriors {
    fn bounds(&self) -> [Interval; 10] {
        [
            self.low_min,
            self.low_max,
            self.high_min,
            self.high_max,
            self.pitch_min,
            self.pitch_max,
            self.snr_min,
            self.snr_max,
            self.gain_min,
            self.gain_max,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (i, iv) in self.probs.iter().enumerate() {
            if !(0.0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 1.0) {
                return Err(Error::policy(
                    Augmentation::ALL[i].prob_key(),
                    format!("prior [{}, {}] is not a sub-interval of [0, 1]", iv.lo, iv.hi),
                ));
            }
        }
        for (key, iv) in BOUND_KEYS.iter().zip(self.bounds()) {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
                return Err(Error::policy(*key, format!("empty prior [{}, {}]", iv.lo, iv.hi)));
            }
        }
        Ok(())
    }
}

/// Draws every parameter independently and uniformly from its prior: the
/// seven probabilities first, then the bounds in field order. Values are
/// rounded to 9 significant digits so that the text form is lossless.
pub fn sample_policy<R: Rng + ?Sized>(priors: &PolicyPriors, rng: &mut R) -> Result<AugmentationPolicy> {
    priors.validate()?;
    let mut probs = [0.0; 7];
    for (p, iv) in probs.iter_mut().zip(&priors.probs) {
        *p = sig9(iv.sample(rng));
    }
    let mut b = [0.0; 10];
    for (v, iv) in b.iter_mut().zip(priors.bounds()) {
        *v = sig9(iv.sample(rng));
    }
    let policy = AugmentationPolicy::from_parts(probs, b);
    policy.validate()?;
    Ok(policy)
}

fn keys() -> impl Iterator<Item = &'static str> {
    Augmentation::ALL
        .iter()
        .map(|a| a.prob_key())
        .chain(BOUND_KEYS.iter().copied())
}

impl Serialize for AugmentationPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_PARAMS))?;
        for (key, v) in keys().zip(self.to_vec()) {
            map.serialize_entry(key, &v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AugmentationPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = Map::<String, Value>::deserialize(deserializer)?;
        policy_from_map(&map).map_err(serde::de::Error::custom)
    }
}

/// Text form: one JSON object, keys in canonical order, 9 significant digits.
pub fn serialize_policy(policy: &AugmentationPolicy) -> String {
    let mut out = String::from("{\n");
    let values = policy.to_vec();
    for (i, (key, v)) in keys().zip(values).enumerate() {
        let num = serde_json::Number::from_f64(sig9(v))
            .map(|n| n.to_string())
            .unwrap_or_else(|| "null".into());
        let sep = if i + 1 < NUM_PARAMS { "," } else { "" };
        out.push_str(&format!("  \"{key}\": {num}{sep}\n"));
    }
    out.push_str("}\n");
    out
}

pub fn parse_policy(text: &str) -> Result<AugmentationPolicy> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::policy("<document>", e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(Error::policy("<document>", "expected a JSON object"));
    };
    policy_from_map(&map)
}

pub(crate) fn policy_from_map(map: &Map<String, Value>) -> Result<AugmentationPolicy> {
    let expected: Vec<&str> = keys().collect();
    if let Some(unknown) = map.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(Error::policy(unknown.as_str(), "unknown field"));
    }
    let mut vals = [0.0; NUM_PARAMS];
    for (slot, key) in vals.iter_mut().zip(&expected) {
        let v = map.get(*key).ok_or_else(|| Error::policy(*key, "missing field"))?;
        *slot = v
            .as_f64()
            .ok_or_else(|| Error::policy(*key, format!("expected a number, found {v}")))?;
    }
    let mut probs = [0.0; 7];
    probs.copy_from_slice(&vals[..7]);
    let mut b = [0.0; 10];
    b.copy_from_slice(&vals[7..]);
    let policy = AugmentationPolicy::from_parts(probs, b);
    policy.validate()?;
    Ok(policy)
}
