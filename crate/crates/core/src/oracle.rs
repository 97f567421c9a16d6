//! Controlled check of the selection mechanism.
//!
//! A hidden policy distorts a clean segment set once per segment, producing a
//! target domain whose augmentation distribution is known. Random candidate
//! policies are then scored on views built from the distorted segments, and
//! each candidate's score is compared with the distance between its
//! application probabilities and the hidden ones. If low scores mark
//! candidates that resemble the hidden policy, scores and distances correlate
//! positively.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSegment;
use crate::dsp::apply_chain;
use crate::error::{Error, Result};
use crate::policy::{policy_distance, sample_policy, AugmentationPolicy};
use crate::report::sig9;
use crate::seed::{self, domain};
use crate::selector::{score_policy_with_seed, too_many_failures, SelectorConfig};
use crate::stats::spearman;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub hidden_policies: usize,
    pub candidates_per_target: usize,
    /// Scoring setup. Its `master_seed` and `num_policies` are not used here.
    pub selector: SelectorConfig,
    pub master_seed: u64,
    /// Make candidate 0 of every target the hidden policy itself.
    pub inject_hidden: bool,
    /// Fraction of candidates in each of the best- and worst-scoring tails.
    pub tail_fraction: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            hidden_policies: 8,
            candidates_per_target: 200,
            selector: SelectorConfig::default(),
            master_seed: 0,
            inject_hidden: false,
            tail_fraction: 0.1,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_policies == 0 || self.candidates_per_target == 0 {
            return Err(Error::invalid("hidden_policies and candidates_per_target must be positive"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.5) {
            return Err(Error::invalid("tail_fraction must lie in (0, 0.5]"));
        }
        let mut s = self.selector;
        s.num_policies = s.num_policies.max(1);
        s.validate()
    }
}

/// Applies `hidden` once to every segment; ids and labels carry over.
pub fn simulate_target(
    segments: &[LabeledSegment],
    hidden: &AugmentationPolicy,
    seed: u64,
) -> Result<Vec<LabeledSegment>> {
    if segments.is_empty() {
        return Err(Error::invalid("no segments to distort"));
    }
    segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let mut rng = seed::rng(seed, &[i as u64]);
            let (audio, _) = apply_chain(&seg.audio, hidden, &mut rng)?;
            Ok(LabeledSegment {
                audio,
                ..seg.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub candidate_idx: usize,
    pub policy: AugmentationPolicy,
    pub hsic: f64,
    pub distance: f64,
    pub is_hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub candidate_idx: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target_idx: usize,
    pub hidden: AugmentationPolicy,
    pub candidates: Vec<CandidateResult>,
    pub failures: Vec<CandidateFailure>,
    pub spearman: Option<f64>,
    pub top_tail_mean_distance: f64,
    pub bottom_tail_mean_distance: f64,
    /// 1-based rank of the hidden policy by ascending score, when injected.
    pub hidden_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTarget {
    pub target_idx: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub targets: Vec<TargetReport>,
    pub failed_targets: Vec<FailedTarget>,
    /// Spearman over every (score, distance) pair of every target.
    pub pooled_spearman: f64,
    /// Mean distance over the union of the per-target best-scoring tails.
    pub top_decile_mean_distance: f64,
    /// Same for the worst-scoring tails.
    pub bottom_decile_mean_distance: f64,
}

/// Indices of `scores` in ascending order, ties by position.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

pub fn tail_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n.max(1))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn run_target(
    segments: &[LabeledSegment],
    config: &OracleConfig,
    target_idx: usize,
) -> Result<TargetReport> {
    let master = config.master_seed;
    let a = target_idx as u64;
    let priors = &config.selector.priors;
    let hidden = sample_policy(priors, &mut seed::rng(master, &[domain::HIDDEN, a]))?;
    let target = simulate_target(segments, &hidden, seed::derive(master, &[domain::TARGET, a]))?;

    let candidates: Vec<(AugmentationPolicy, bool)> = (0..config.candidates_per_target)
        .map(|j| {
            if config.inject_hidden && j == 0 {
                Ok((hidden, true))
            } else {
                let mut rng = seed::rng(master, &[domain::CANDIDATE, a, j as u64]);
                sample_policy(priors, &mut rng).map(|p| (p, false))
            }
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<Result<f64>> = candidates
        .par_iter()
        .enumerate()
        .map(|(j, (p, _))| {
            let view_seed = seed::derive(master, &[domain::VIEW, a, j as u64]);
            score_policy_with_seed(&target, p, &config.selector, j, view_seed).map(|r| r.score)
        })
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (j, ((policy, is_hidden), outcome)) in candidates.into_iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(hsic) => results.push(CandidateResult {
                candidate_idx: j,
                distance: policy_distance(&policy, &hidden),
                policy,
                hsic,
                is_hidden,
            }),
            Err(e) => failures.push(CandidateFailure {
                candidate_idx: j,
                error: e.to_string(),
            }),
        }
    }
    if results.is_empty()
        || too_many_failures(
            failures.len(),
            config.candidates_per_target,
            config.selector.max_failure_fraction,
        )
    {
        return Err(Error::Scoring(format!(
            "{} of {} candidates failed",
            failures.len(),
            config.candidates_per_target
        )));
    }

    let scores: Vec<f64> = results.iter().map(|r| r.hsic).collect();
    let dists: Vec<f64> = results.iter().map(|r| r.distance).collect();
    let order = ascending(&scores);
    let k = tail_size(results.len(), config.tail_fraction);
    let hidden_rank = order.iter().position(|&i| results[i].is_hidden).map(|p| p + 1);
    Ok(TargetReport {
        target_idx,
        hidden,
        spearman: spearman(&scores, &dists).ok(),
        top_tail_mean_distance: mean(order[..k].iter().map(|&i| dists[i])),
        bottom_tail_mean_distance: mean(order[order.len() - k..].iter().map(|&i| dists[i])),
        hidden_rank,
        candidates: results,
        failures,
    })
}

pub fn run_oracle(segments: &[LabeledSegment], config: &OracleConfig) -> Result<OracleReport> {
    config.validate()?;
    let mut targets = Vec::new();
    let mut failed_targets = Vec::new();
    for a in 0..config.hidden_policies {
        match run_target(segments, config, a) {
            Ok(t) => targets.push(t),
            Err(e) => {
                log::warn!("target {a} failed: {e}");
                failed_targets.push(FailedTarget {
                    target_idx: a,
                    error: e.to_string(),
                });
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::Scoring("every oracle target failed".into()));
    }

    let scores: Vec<f64> = targets.iter().flat_map(|t| t.candidates.iter().map(|c| c.hsic)).collect();
    let dists: Vec<f64> = targets.iter().flat_map(|t| t.candidates.iter().map(|c| c.distance)).collect();
    let pooled_spearman = spearman(&scores, &dists)?;

    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for t in &targets {
        let s: Vec<f64> = t.candidates.iter().map(|c| c.hsic).collect();
        let order = ascending(&s);
        let k = tail_size(order.len(), config.tail_fraction);
        top.extend(order[..k].iter().map(|&i| t.candidates[i].distance));
        bottom.extend(order[order.len() - k..].iter().map(|&i| t.candidates[i].distance));
    }
    Ok(OracleReport {
        targets,
        failed_targets,
        pooled_spearman,
        top_decile_mean_distance: mean(top.into_iter()),
        bottom_decile_mean_distance: mean(bottom.into_iter()),
    })
}

/// Flat `target_idx,candidate_idx,hsic,distance` rows, 9 significant digits.
pub fn write_oracle_csv<W: Write>(mut out: W, report: &OracleReport) -> Result<()> {
    let io = |e| Error::io("<oracle csv>", e);
    writeln!(out, "target_idx,candidate_idx,hsic,distance").map_err(io)?;
    for t in &report.targets {
        for c in &t.candidates {
            writeln!(
                out,
                "{},{},{},{}",
                t.target_idx,
                c.candidate_idx,
                sig9(c.hsic),
                sig9(c.distance)
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
