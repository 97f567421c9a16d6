//! Alignment manifests, word vocabulary and the labeled segment set.
//!
//! A manifest is a CSV file with the header
//! `clip_id,audio_path,word,start_s,end_s`, one row per aligned word. Words are
//! normalized to uppercase ASCII with punctuation removed. Each retained row
//! becomes a [`LabeledSegment`]: the word's audio crop, a sequential origin id
//! and its word label.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, AudioClip};
use crate::error::{Error, Result};

/// Crops shorter than this are dropped.
pub const MIN_SEGMENT_S: f64 = 0.2;

/// Index of the source segment a view was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub usize);

/// A class word, already normalized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordLabel(pub String);

impl fmt::Display for WordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WordLabel {
    fn from(s: &str) -> Self {
        WordLabel(normalize_word(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEntry {
    pub clip_id: String,
    pub audio_path: PathBuf,
    pub word: WordLabel,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub audio: AudioClip,
    pub origin_id: SampleId,
    pub label: WordLabel,
    pub clip_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

pub fn normalize_word(raw: &str) -> String {
    raw.trim()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .filter(|c| !c.is_whitespace())
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    clip_id: String,
    audio_path: String,
    word: String,
    start_s: f64,
    end_s: f64,
}

pub fn load_manifest(path: &Path) -> Result<Vec<AlignmentEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bad = |line: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        let word = normalize_word(&row.word);
        if word.is_empty() {
            return Err(bad(line, format!("word {:?} is empty after normalization", row.word)));
        }
        if !(row.start_s.is_finite() && row.end_s.is_finite()) || row.start_s < 0.0 {
            return Err(bad(line, "start_s/end_s must be finite and start_s >= 0".into()));
        }
        if row.start_s >= row.end_s {
            return Err(bad(
                line,
                format!("start_s {} is not before end_s {}", row.start_s, row.end_s),
            ));
        }
        out.push(AlignmentEntry {
            clip_id: row.clip_id,
            audio_path: PathBuf::from(row.audio_path),
            word: WordLabel(word),
            start_s: row.start_s,
            end_s: row.end_s,
        });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[AlignmentEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(["clip_id", "audio_path", "word", "start_s", "end_s"])
        .map_err(csv_err)?;
    for e in entries {
        w.write_record([
            e.clip_id.clone(),
            e.audio_path.to_string_lossy().into_owned(),
            e.word.0.clone(),
            e.start_s.to_string(),
            e.end_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The `k` most frequent words, most frequent first; equal counts sort
/// lexicographically.
pub fn top_k_words(entries: &[AlignmentEntry], k: usize) -> Result<Vec<WordLabel>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if entries.is_empty() {
        return Err(Error::Corpus("manifest has no entries".into()));
    }
    let mut counts: HashMap<&WordLabel, usize> = HashMap::new();
    for e in entries {
        *counts.entry(&e.word).or_default() += 1;
    }
    if counts.len() < k {
        return Err(Error::Corpus(format!(
            "asked for the top {k} words but the manifest has only {} distinct words",
            counts.len()
        )));
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(ranked.into_iter().take(k).map(|(w, _)| w.clone()).collect())
}

fn resolve(audio_root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        audio_root.join(p)
    }
}

/// Decodes every distinct audio file referenced by `entries`, in parallel.
pub fn load_clips(
    entries: &[AlignmentEntry],
    audio_root: &Path,
) -> Result<BTreeMap<PathBuf, AudioClip>> {
    let mut paths: Vec<PathBuf> = entries
        .iter()
        .map(|e| resolve(audio_root, &e.audio_path))
        .collect();
    paths.sort();
    paths.dedup();
    paths
        .into_par_iter()
        .map(|p| read_wav(&p).map(|c| (p, c)))
        .collect()
}

/// Builds the labeled set with the default minimum segment length.
pub fn build_labeled_set(
    entries: &[AlignmentEntry],
    audio_root: &Path,
    classes: &[WordLabel],
) -> Result<Vec<LabeledSegment>> {
    build_labeled_set_with(entries, audio_root, classes, MIN_SEGMENT_S)
}

pub fn build_labeled_set_with(
    entries: &[AlignmentEntry],
    audio_root: &Path,
    classes: &[WordLabel],
    min_segment_s: f64,
) -> Result<Vec<LabeledSegment>> {
    if classes.is_empty() {
        return Err(Error::invalid("class vocabulary is empty"));
    }
    let wanted: Vec<&AlignmentEntry> = entries.iter().filter(|e| classes.contains(&e.word)).collect();
    let owned: Vec<AlignmentEntry> = wanted.iter().map(|e| (*e).clone()).collect();
    let clips = load_clips(&owned, audio_root)?;

    let mut segments = Vec::with_capacity(wanted.len());
    let mut dropped = 0usize;
    for e in wanted {
        if e.end_s - e.start_s < min_segment_s {
            dropped += 1;
            log::debug!(
                "dropping {}:{} [{:.3}, {:.3}] shorter than {min_segment_s} s",
                e.clip_id,
                e.word,
                e.start_s,
                e.end_s
            );
            continue;
        }
        let clip = &clips[&resolve(audio_root, &e.audio_path)];
        let audio = clip.crop(e.start_s, e.end_s).map_err(|err| {
            Error::Corpus(format!("{} word {} : {err}", e.clip_id, e.word))
        })?;
        segments.push(LabeledSegment {
            audio,
            origin_id: SampleId(segments.len()),
            label: e.word.clone(),
            clip_id: e.clip_id.clone(),
            start_s: e.start_s,
            end_s: e.end_s,
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} segments shorter than {min_segment_s} s");
    }
    Ok(segments)
}

/// Loads a manifest, picks the `k` most frequent words and crops the segments.
pub fn load_corpus(
    manifest: &Path,
    audio_root: &Path,
    k: usize,
    min_segment_s: f64,
) -> Result<(Vec<WordLabel>, Vec<LabeledSegment>)> {
    let entries = load_manifest(manifest)?;
    let classes = top_k_words(&entries, k)?;
    let segments = build_labeled_set_with(&entries, audio_root, &classes, min_segment_s)?;
    if segments.is_empty() {
        return Err(Error::Corpus("no segments survived filtering".into()));
    }
    Ok((classes, segments))
}

#[derive(Serialize)]
struct SegmentDump<'a> {
    origin_id: SampleId,
    label: &'a WordLabel,
    clip_id: &'a str,
    start_s: f64,
    end_s: f64,
    num_samples: usize,
    sample_rate: u32,
    rms: f64,
}

/// One JSON object per line, in origin-id order.
pub fn dump_segments<W: Write>(mut out: W, segments: &[LabeledSegment]) -> Result<()> {
    for s in segments {
        let row = SegmentDump {
            origin_id: s.origin_id,
            label: &s.label,
            clip_id: &s.clip_id,
            start_s: s.start_s,
            end_s: s.end_s,
            num_samples: s.audio.len(),
            sample_rate: s.audio.sample_rate,
            rms: crate::report::sig9(s.audio.rms()),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<segment dump>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::write_wav_pcm16;

    fn entry(word: &str) -> AlignmentEntry {
        AlignmentEntry {
            clip_id: "c".into(),
            audio_path: "c.wav".into(),
            word: WordLabel::from(word),
            start_s: 0.0,
            end_s: 1.0,
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn manifest_parses_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "clip_id,audio_path,word,start_s,end_s\n\
             a,a.wav,hello,0.0,0.5\n\
             a,a.wav,\"World!\",0.5,0.9\n\
             b,b.wav,it's,0.1,0.4\n",
        );
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.len(), 3);
        let words: Vec<_> = m.iter().map(|e| e.word.0.as_str()).collect();
        assert_eq!(words, ["HELLO", "WORLD", "ITS"]);
        assert_eq!(m[1].end_s, 0.9);
    }

    #[test]
    fn manifest_rejects_inverted_interval_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "clip_id,audio_path,word,start_s,end_s\na,a.wav,x,0.0,0.5\na,a.wav,y,0.9,0.9\n",
        );
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "clip_id,audio_path,word,start_s,end_s\na,a.wav,x,zero,0.5\n",
        );
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 2, .. })));
    }

    #[test]
    fn empty_manifest_is_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "clip_id,audio_path,word,start_s,end_s\n");
        assert!(load_manifest(&p).unwrap().is_empty());
        let p = write(dir.path(), "n.csv", "");
        assert!(load_manifest(&p).unwrap().is_empty());
    }

    #[test]
    fn missing_manifest() {
        assert!(matches!(
            load_manifest(Path::new("/nonexistent/m.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn top_k_counts_and_ties() {
        let mut e = Vec::new();
        e.extend(std::iter::repeat_with(|| entry("a")).take(5));
        e.extend(std::iter::repeat_with(|| entry("b")).take(3));
        e.push(entry("c"));
        let top = top_k_words(&e, 2).unwrap();
        assert_eq!(top, vec![WordLabel::from("A"), WordLabel::from("B")]);

        let tie = vec![entry("b"), entry("a"), entry("b"), entry("a")];
        assert_eq!(top_k_words(&tie, 1).unwrap(), vec![WordLabel::from("A")]);

        let err = top_k_words(&tie, 3).unwrap_err().to_string();
        assert!(err.contains("only 2 distinct"), "{err}");
    }

    fn tone_file(dir: &Path, name: &str, secs: f64) {
        let n = (secs * 16_000.0) as usize;
        let s: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
        write_wav_pcm16(&dir.join(name), &AudioClip::new(s, 16_000).unwrap()).unwrap();
    }

    #[test]
    fn labeled_set_filters_and_numbers() {
        let dir = tempfile::tempdir().unwrap();
        tone_file(dir.path(), "c.wav", 3.0);
        let mut entries = Vec::new();
        for i in 0..10 {
            let word = if i % 3 == 0 { "keep" } else { "other" };
            entries.push(AlignmentEntry {
                clip_id: format!("c{i}"),
                audio_path: "c.wav".into(),
                word: WordLabel::from(word),
                start_s: 0.5,
                end_s: 0.9,
            });
        }
        // Too short, dropped.
        entries.push(AlignmentEntry {
            clip_id: "short".into(),
            audio_path: "c.wav".into(),
            word: WordLabel::from("keep"),
            start_s: 1.0,
            end_s: 1.1,
        });
        let segs = build_labeled_set(&entries, dir.path(), &[WordLabel::from("keep")]).unwrap();
        assert_eq!(segs.len(), 4);
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.origin_id, SampleId(i));
            assert_eq!(s.audio.len(), 6400);
        }
        let again = build_labeled_set(&entries, dir.path(), &[WordLabel::from("keep")]).unwrap();
        assert_eq!(segs, again);
    }

    #[test]
    fn crop_past_end_is_corpus_error() {
        let dir = tempfile::tempdir().unwrap();
        tone_file(dir.path(), "c.wav", 1.0);
        let e = vec![AlignmentEntry {
            clip_id: "c".into(),
            audio_path: "c.wav".into(),
            word: WordLabel::from("w"),
            start_s: 0.5,
            end_s: 1.5,
        }];
        assert!(matches!(
            build_labeled_set(&e, dir.path(), &[WordLabel::from("w")]),
            Err(Error::Corpus(_))
        ));
    }

    #[test]
    fn undecodable_audio() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.wav"), b"not a wav").unwrap();
        let e = vec![entry("w")];
        assert!(matches!(
            build_labeled_set(&e, dir.path(), &[WordLabel::from("w")]),
            Err(Error::Decode { .. })
        ));
    }
}
