//! Deterministic synthetic speech-like corpora for tests and smoke runs.
//!
//! Words are built from a few phone templates: voiced phones are harmonic
//! series shaped by formant resonances, fricatives are band-limited noise and
//! closures are near-silence. Every clip gets its own speaker (pitch, formant
//! scale, speaking rate, loudness), so segments of one word differ from each
//! other the way recordings by different talkers do.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::{write_wav_pcm16, AudioClip, SAMPLE_RATE};
use crate::corpus::{write_manifest, AlignmentEntry, LabeledSegment, SampleId, WordLabel};
use crate::dsp::{highpass, lowpass};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy)]
enum Phone {
    /// Formants F1, F2, F3 in Hz, relative duration.
    Vowel(f64, f64, f64, f64),
    /// Noise band center in Hz, relative duration.
    Fricative(f64, f64),
    /// Closure, relative duration.
    Gap(f64),
}

use Phone::*;

const WORDS: [(&str, &[Phone]); 5] = [
    (
        "ALPHA",
        &[Vowel(750., 1150., 2500., 0.30), Vowel(450., 1000., 2400., 0.10), Fricative(4500., 0.15), Vowel(650., 1100., 2450., 0.30)],
    ),
    (
        "BRAVO",
        &[Gap(0.05), Vowel(400., 1300., 1700., 0.10), Vowel(700., 1250., 2500., 0.30), Fricative(2500., 0.08), Vowel(450., 850., 2300., 0.30)],
    ),
    (
        "CHARLIE",
        &[Fricative(3200., 0.15), Vowel(720., 1200., 2550., 0.25), Vowel(480., 1350., 1650., 0.10), Vowel(300., 2300., 3000., 0.28)],
    ),
    (
        "DELTA",
        &[Gap(0.04), Vowel(550., 1800., 2500., 0.28), Vowel(420., 1000., 2500., 0.10), Gap(0.05), Fricative(5500., 0.04), Vowel(600., 1200., 2450., 0.28)],
    ),
    (
        "ECHO",
        &[Vowel(500., 1850., 2550., 0.30), Gap(0.05), Fricative(3800., 0.06), Vowel(450., 900., 2350., 0.35)],
    ),
];

/// Largest vocabulary the generator can produce.
pub const MAX_WORDS: usize = WORDS.len();

#[derive(Debug, Clone, Copy, PartialEq)]
struct Speaker {
    f0: f64,
    formant_scale: f64,
    rate: f64,
    level: f64,
    breathiness: f64,
}

impl Speaker {
    fn sample(rng: &mut Rng) -> Self {
        Self {
            f0: rng.random_range(95.0..230.0),
            formant_scale: rng.random_range(0.88..1.14),
            rate: rng.random_range(0.85..1.18),
            level: rng.random_range(0.15..0.35),
            breathiness: rng.random_range(0.01..0.06),
        }
    }
}

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn formant_gain(f: f64, formants: &[f64; 3]) -> f64 {
    let bw = [90.0, 120.0, 170.0];
    let peak = [1.0, 0.6, 0.3];
    let res: f64 = (0..3)
        .map(|i| peak[i] / (1.0 + ((f - formants[i]) / bw[i]).powi(2)))
        .sum();
    res / (1.0 + f / 1500.0)
}

/// Raised-cosine fade in and out over `ramp` samples.
fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn band_noise(len: usize, center: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let white: Vec<f64> = (0..len).map(|_| gaussian(rng)).collect();
    let nyq = SAMPLE_RATE as f64 / 2.0;
    let clip = AudioClip::new(white, SAMPLE_RATE)?;
    let band = lowpass(&highpass(&clip, center * 0.7)?, (center * 1.4).min(nyq * 0.95))?;
    let rms = band.rms().max(1e-12);
    Ok(band.samples.iter().map(|x| x / rms).collect())
}

/// Synthesizes one word of roughly `duration_s` seconds.
fn synth_word(phones: &[Phone], speaker: &Speaker, duration_s: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let sr = SAMPLE_RATE as f64;
    let total_rel: f64 = phones
        .iter()
        .map(|p| match *p {
            Vowel(_, _, _, d) | Fricative(_, d) | Gap(d) => d,
        })
        .sum();
    let jitter: Vec<f64> = phones.iter().map(|_| rng.random_range(0.9..1.1)).collect();
    let lens: Vec<usize> = phones
        .iter()
        .zip(&jitter)
        .map(|(p, j)| {
            let d = match *p {
                Vowel(_, _, _, d) | Fricative(_, d) | Gap(d) => d,
            };
            ((d / total_rel) * duration_s * j * sr).round() as usize
        })
        .collect();
    let n: usize = lens.iter().sum();
    let mut out = vec![0.0; n];

    // Continuous glottal phase with a falling contour and light vibrato.
    let vib_rate = rng.random_range(4.0..6.0);
    let mut phase = Vec::with_capacity(n);
    let mut acc = rng.random_range(0.0..2.0 * PI);
    for i in 0..n {
        let t = i as f64 / n as f64;
        let f0 = speaker.f0 * (1.08 - 0.16 * t) * (1.0 + 0.01 * (2.0 * PI * vib_rate * i as f64 / sr).sin());
        acc += 2.0 * PI * f0 / sr;
        phase.push((acc, f0));
    }

    let ramp = (0.012 * sr) as usize;
    let mut start = 0;
    for (phone, &len) in phones.iter().zip(&lens) {
        if len < 2 {
            start += len;
            continue;
        }
        match *phone {
            Vowel(f1, f2, f3, _) => {
                let jit = rng.random_range(0.96..1.04);
                let fm = [f1, f2, f3].map(|f| f * speaker.formant_scale * jit);
                const BLOCK: usize = 64;
                let mut gains = Vec::new();
                for b in (0..len).step_by(BLOCK) {
                    let f0 = phase[start + b].1;
                    let k_max = ((4000.0 / f0) as usize).max(1);
                    gains.clear();
                    gains.extend((1..=k_max).map(|k| formant_gain(k as f64 * f0, &fm)));
                    for i in b..(b + BLOCK).min(len) {
                        let ph = phase[start + i].0;
                        let v: f64 = gains
                            .iter()
                            .enumerate()
                            .map(|(k, g)| g * ((k + 1) as f64 * ph).sin())
                            .sum();
                        out[start + i] += v * envelope(i, len, ramp);
                    }
                }
                let breath = band_noise(len, 1500.0 * speaker.formant_scale, rng)?;
                for (i, b) in breath.iter().enumerate() {
                    out[start + i] += speaker.breathiness * b * envelope(i, len, ramp);
                }
            }
            Fricative(center, _) => {
                let noise = band_noise(len, center * speaker.formant_scale, rng)?;
                for (i, x) in noise.iter().enumerate() {
                    out[start + i] += 0.25 * x * envelope(i, len, ramp / 2);
                }
            }
            Gap(_) => {}
        }
        start += len;
    }

    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let gain = speaker.level / peak;
    Ok(out.into_iter().map(|x| x * gain).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub clip_id: String,
    pub audio: AudioClip,
    /// Word, start and end time in seconds.
    pub words: Vec<(WordLabel, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub clips: Vec<SyntheticClip>,
}

fn background(len: usize, level: f64, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| level * gaussian(rng)).collect()
}

fn vocabulary(num_words: usize) -> Result<&'static [(&'static str, &'static [Phone])]> {
    if num_words == 0 || num_words > MAX_WORDS {
        return Err(Error::invalid(format!("num_words must lie in 1..={MAX_WORDS}")));
    }
    Ok(&WORDS[..num_words])
}

impl SyntheticCorpus {
    /// `num_clips` clips of `clip_s` seconds, each saying every word once in
    /// shuffled order.
    pub fn sentences(num_clips: usize, num_words: usize, clip_s: f64, seed: u64) -> Result<Self> {
        let words = vocabulary(num_words)?;
        let sr = SAMPLE_RATE as f64;
        let len = (clip_s * sr).round() as usize;
        let mut clips = Vec::with_capacity(num_clips);
        for c in 0..num_clips {
            let mut rng = seed::rng(seed, &[c as u64]);
            let speaker = Speaker::sample(&mut rng);
            let mut order: Vec<usize> = (0..words.len()).collect();
            order.shuffle(&mut rng);
            let slot = clip_s / words.len() as f64;
            let mut samples = background(len, 0.002, &mut rng);
            let mut aligned = Vec::new();
            for (pos, &w) in order.iter().enumerate() {
                let dur = (slot * 0.75 / speaker.rate).min(slot * 0.9);
                let start_s = pos as f64 * slot + rng.random_range(0.02..(slot - dur).max(0.03));
                let word = synth_word(words[w].1, &speaker, dur, &mut rng)?;
                let offset = (start_s * sr).round() as usize;
                for (i, x) in word.iter().enumerate() {
                    if let Some(s) = samples.get_mut(offset + i) {
                        *s += x;
                    }
                }
                let end_s = ((offset + word.len()).min(len)) as f64 / sr;
                aligned.push((WordLabel(words[w].0.to_string()), offset as f64 / sr, end_s));
            }
            clips.push(SyntheticClip {
                clip_id: format!("clip{c:03}"),
                audio: AudioClip::new(samples, SAMPLE_RATE)?,
                words: aligned,
            });
        }
        Ok(Self { clips })
    }

    /// `per_word` clips of `clip_s` seconds for each word, one word per clip
    /// aligned to the whole clip.
    pub fn isolated_words(per_word: usize, num_words: usize, clip_s: f64, seed: u64) -> Result<Self> {
        let words = vocabulary(num_words)?;
        let sr = SAMPLE_RATE as f64;
        let len = (clip_s * sr).round() as usize;
        let mut clips = Vec::with_capacity(per_word * words.len());
        for i in 0..per_word {
            for (w, (name, phones)) in words.iter().enumerate() {
                let c = i * words.len() + w;
                let mut rng = seed::rng(seed, &[c as u64]);
                let speaker = Speaker::sample(&mut rng);
                let dur = (clip_s * 0.7 / speaker.rate).min(clip_s * 0.9);
                let word = synth_word(phones, &speaker, dur, &mut rng)?;
                let mut samples = background(len, 0.002, &mut rng);
                let offset = rng.random_range(0..=(len.saturating_sub(word.len())).max(1) - 1);
                for (j, x) in word.iter().enumerate() {
                    if let Some(s) = samples.get_mut(offset + j) {
                        *s += x;
                    }
                }
                clips.push(SyntheticClip {
                    clip_id: format!("{}{c:03}", name.to_lowercase()),
                    audio: AudioClip::new(samples, SAMPLE_RATE)?,
                    words: vec![(WordLabel(name.to_string()), 0.0, len as f64 / sr)],
                });
            }
        }
        Ok(Self { clips })
    }

    /// The bundled smoke-test corpus: 10 two-second clips over 3 words.
    pub fn tiny() -> Result<Self> {
        Self::sentences(10, 3, 2.0, 7)
    }

    /// Labeled segments in clip then word order, without a round trip
    /// through 16-bit WAV.
    pub fn segments(&self) -> Result<Vec<LabeledSegment>> {
        let mut out = Vec::new();
        for clip in &self.clips {
            for (word, start_s, end_s) in &clip.words {
                out.push(LabeledSegment {
                    audio: clip.audio.crop(*start_s, *end_s)?,
                    origin_id: SampleId(out.len()),
                    label: word.clone(),
                    clip_id: clip.clip_id.clone(),
                    start_s: *start_s,
                    end_s: *end_s,
                });
            }
        }
        Ok(out)
    }

    /// Writes `audio/<clip_id>.wav` and `manifest.csv` under `dir` and returns
    /// the manifest path. Audio paths in the manifest are relative to `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let audio_dir = dir.join("audio");
        std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
        let mut entries = Vec::new();
        for clip in &self.clips {
            let rel = PathBuf::from("audio").join(format!("{}.wav", clip.clip_id));
            write_wav_pcm16(&dir.join(&rel), &clip.audio)?;
            for (word, start_s, end_s) in &clip.words {
                entries.push(AlignmentEntry {
                    clip_id: clip.clip_id.clone(),
                    audio_path: rel.clone(),
                    word: word.clone(),
                    start_s: crate::report::sig9(*start_s),
                    end_s: crate::report::sig9(*end_s),
                });
            }
        }
        let manifest = dir.join("manifest.csv");
        write_manifest(&manifest, &entries)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_shape() {
        let c = SyntheticCorpus::tiny().unwrap();
        assert_eq!(c.clips.len(), 10);
        for clip in &c.clips {
            assert_eq!(clip.audio.len(), 32000);
            assert_eq!(clip.words.len(), 3);
            assert!(clip.audio.samples.iter().all(|x| x.abs() < 1.0));
            for (_, s, e) in &clip.words {
                assert!(e - s >= 0.3, "{s} {e}");
                assert!(*e <= 2.0);
            }
        }
        let segs = c.segments().unwrap();
        assert_eq!(segs.len(), 30);
    }

    #[test]
    fn deterministic() {
        let a = SyntheticCorpus::isolated_words(2, 3, 1.0, 5).unwrap();
        let b = SyntheticCorpus::isolated_words(2, 3, 1.0, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clips.len(), 6);
        let c = SyntheticCorpus::isolated_words(2, 3, 1.0, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vocabulary_bounds() {
        assert!(SyntheticCorpus::sentences(1, 0, 2.0, 0).is_err());
        assert!(SyntheticCorpus::sentences(1, MAX_WORDS + 1, 2.0, 0).is_err());
    }

    #[test]
    fn written_corpus_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let c = SyntheticCorpus::tiny().unwrap();
        let manifest = c.write(dir.path()).unwrap();
        let (classes, segs) = crate::corpus::load_corpus(&manifest, dir.path(), 3, 0.2).unwrap();
        assert_eq!(classes.len(), 3);
        assert_eq!(segs.len(), 30);
    }
}
