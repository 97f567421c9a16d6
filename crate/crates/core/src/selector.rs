//! Random search over augmentation policies.
//!
//! [`select_policy`] samples `num_policies` candidates from the priors, builds
//! `views_per_sample` augmented views of every labeled segment under each
//! candidate, scores the views with [`conditional_hsic`] and ranks the
//! candidates by ascending score. Every random draw is keyed by
//! `(master_seed, policy, segment, view)`, so the ranking does not depend on
//! how many threads did the work.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledSegment, SampleId, WordLabel};
use crate::dsp::apply_chain;
use crate::error::{Error, Result};
use crate::features::{embed, FeatureKind, FeatureVector};
use crate::hsic::{conditional_hsic, ExcludedClass, HsicConfig};
use crate::policy::{sample_policy, AugmentationPolicy, PolicyPriors};
use crate::seed::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    pub num_policies: usize,
    pub views_per_sample: usize,
    pub num_classes: usize,
    pub master_seed: u64,
    pub feature: FeatureKind,
    pub priors: PolicyPriors,
    pub hsic: HsicConfig,
    /// Largest fraction of policies allowed to fail before the search aborts.
    pub max_failure_fraction: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            num_policies: 100,
            views_per_sample: 20,
            num_classes: 10,
            master_seed: 0,
            feature: FeatureKind::LogMelStats,
            priors: PolicyPriors::default(),
            hsic: HsicConfig::default(),
            max_failure_fraction: 0.1,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_policies == 0 {
            return Err(Error::invalid("num_policies must be at least 1"));
        }
        if self.views_per_sample == 0 {
            return Err(Error::invalid("views_per_sample must be at least 1"));
        }
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::invalid("max_failure_fraction must lie in [0, 1]"));
        }
        if let Some(b) = self.hsic.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("hsic.bandwidth must be positive"));
            }
        }
        self.priors.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFailure {
    pub origin_id: SampleId,
    pub view: usize,
    pub reason: String,
}

/// Augmented views of a segment set under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub features: Vec<FeatureVector>,
    pub origin_ids: Vec<SampleId>,
    pub labels: Vec<WordLabel>,
    pub policy: AugmentationPolicy,
    pub failures: Vec<ViewFailure>,
    /// Segments none of whose views survived.
    pub dropped_segments: Vec<SampleId>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// `n_views` chain applications per segment; view `v` of segment `s` draws
/// from the stream `(seed, s, v)`.
pub fn build_views(
    segments: &[LabeledSegment],
    policy: &AugmentationPolicy,
    n_views: usize,
    seed: u64,
) -> Result<ViewSet> {
    if segments.is_empty() {
        return Err(Error::invalid("no segments to build views from"));
    }
    if n_views == 0 {
        return Err(Error::invalid("need at least one view per segment"));
    }
    policy.validate()?;

    type Outcome = std::result::Result<FeatureVector, String>;
    let per_segment: Vec<Vec<Outcome>> = segments
        .par_iter()
        .enumerate()
        .map(|(s, seg)| {
            (0..n_views)
                .map(|v| {
                    let mut rng = seed::rng(seed, &[s as u64, v as u64]);
                    let (clip, _) = apply_chain(&seg.audio, policy, &mut rng).map_err(|e| e.to_string())?;
                    embed(&clip).map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut set = ViewSet {
        features: Vec::with_capacity(segments.len() * n_views),
        origin_ids: Vec::with_capacity(segments.len() * n_views),
        labels: Vec::with_capacity(segments.len() * n_views),
        policy: *policy,
        failures: Vec::new(),
        dropped_segments: Vec::new(),
    };
    for (seg, outcomes) in segments.iter().zip(per_segment) {
        let mut kept = 0;
        for (v, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(f) => {
                    set.features.push(f);
                    set.origin_ids.push(seg.origin_id);
                    set.labels.push(seg.label.clone());
                    kept += 1;
                }
                Err(reason) => set.failures.push(ViewFailure {
                    origin_id: seg.origin_id,
                    view: v,
                    reason,
                }),
            }
        }
        if kept == 0 {
            log::warn!("segment {} lost every view", seg.origin_id.0);
            set.dropped_segments.push(seg.origin_id);
        }
    }
    Ok(set)
}

/// Score of one policy, with enough diagnostics to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicReport {
    pub policy_index: usize,
    pub policy: AugmentationPolicy,
    pub score: f64,
    pub per_class_scores: BTreeMap<WordLabel, f64>,
    pub per_class_bandwidth: BTreeMap<WordLabel, f64>,
    pub class_weights: BTreeMap<WordLabel, f64>,
    pub excluded_classes: Vec<ExcludedClass>,
    pub n_views: usize,
    pub bandwidth: f64,
    pub view_failures: usize,
    pub dropped_segments: Vec<SampleId>,
}

/// Scores `policy` with views drawn from the stream `(view_seed, segment, view)`.
pub fn score_policy_with_seed(
    segments: &[LabeledSegment],
    policy: &AugmentationPolicy,
    config: &SelectorConfig,
    policy_index: usize,
    view_seed: u64,
) -> Result<HsicReport> {
    let views = build_views(segments, policy, config.views_per_sample, view_seed)?;
    let est = conditional_hsic(&views.features, &views.origin_ids, &views.labels, &config.hsic)?;
    if !est.score.is_finite() {
        return Err(Error::Scoring("non-finite HSIC score".into()));
    }
    Ok(HsicReport {
        policy_index,
        policy: *policy,
        score: est.score,
        per_class_scores: est.per_class_scores,
        per_class_bandwidth: est.per_class_bandwidth,
        class_weights: est.class_weights,
        excluded_classes: est.excluded_classes,
        n_views: est.n_views,
        bandwidth: est.bandwidth,
        view_failures: views.failures.len(),
        dropped_segments: views.dropped_segments,
    })
}

fn view_seed(master: u64, policy_index: usize) -> u64 {
    seed::derive(master, &[domain::VIEW, policy_index as u64])
}

/// Scores `policy` on the view streams of policy index `policy_index`.
pub fn score_policy_at(
    segments: &[LabeledSegment],
    policy: &AugmentationPolicy,
    config: &SelectorConfig,
    policy_index: usize,
) -> Result<HsicReport> {
    score_policy_with_seed(
        segments,
        policy,
        config,
        policy_index,
        view_seed(config.master_seed, policy_index),
    )
}

/// Scores `policy` on the view streams that [`select_policy`] uses for its
/// first candidate.
pub fn score_policy(
    segments: &[LabeledSegment],
    policy: &AugmentationPolicy,
    config: &SelectorConfig,
) -> Result<HsicReport> {
    score_policy_at(segments, policy, config, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFailure {
    pub policy_index: usize,
    pub policy: AugmentationPolicy,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: AugmentationPolicy,
    /// Ascending by score; equal scores keep sampling order.
    pub ranking: Vec<HsicReport>,
    pub failures: Vec<PolicyFailure>,
}

/// Candidate `i` of a search seeded with `master`.
pub fn candidate_policy(priors: &PolicyPriors, master: u64, i: usize) -> Result<AugmentationPolicy> {
    sample_policy(priors, &mut seed::rng(master, &[domain::POLICY, i as u64]))
}

/// Ranks candidates in ascending score order; ties keep index order.
pub(crate) fn rank(reports: &mut [HsicReport]) {
    reports.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.policy_index.cmp(&b.policy_index)));
}

pub(crate) fn too_many_failures(failed: usize, total: usize, max_fraction: f64) -> bool {
    failed as f64 > max_fraction * total as f64
}

pub fn select_policy(segments: &[LabeledSegment], config: &SelectorConfig) -> Result<Selection> {
    config.validate()?;
    let policies: Vec<AugmentationPolicy> = (0..config.num_policies)
        .map(|i| candidate_policy(&config.priors, config.master_seed, i))
        .collect::<Result<_>>()?;

    let outcomes: Vec<Result<HsicReport>> = policies
        .par_iter()
        .enumerate()
        .map(|(i, p)| score_policy_at(segments, p, config, i))
        .collect();

    let mut ranking = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => ranking.push(r),
            Err(e) => {
                log::warn!("policy {i} failed: {e}");
                failures.push(PolicyFailure {
                    policy_index: i,
                    policy: policies[i],
                    error: e.to_string(),
                });
            }
        }
    }
    if ranking.is_empty()
        || too_many_failures(failures.len(), config.num_policies, config.max_failure_fraction)
    {
        let first = failures.first().map(|f| f.error.as_str()).unwrap_or("");
        return Err(Error::Scoring(format!(
            "{} of {} policies failed (first: {first})",
            failures.len(),
            config.num_policies
        )));
    }
    rank(&mut ranking);
    Ok(Selection {
        best: ranking[0].policy,
        ranking,
        failures,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Workers in the pool the caller runs on.
pub fn current_num_threads() -> usize {
    rayon::current_num_threads()
}
