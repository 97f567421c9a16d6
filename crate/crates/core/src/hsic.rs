//! Dependence between views and their origin ids, conditioned on the word
//! label.
//!
//! The default estimator splits the views by label and averages the per-class
//! HSIC between an RBF kernel on view features and a delta kernel on origin
//! ids, weighting each class by its share of the views:
//!
//! ```text
//! score = Σ_y (n_y / n) · HSIC(X'_y, Z_y)
//! ```
//!
//! A class takes part only if it has at least two distinct origin ids and at
//! least one id with two or more views; otherwise the ids carry no within-id
//! structure to measure and the class is listed as excluded.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{SampleId, WordLabel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::kernels::{delta_gram, hsic_biased, median_heuristic, rbf_gram, GramMatrix, KernelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Estimator {
    #[default]
    #[serde(rename = "class-conditional")]
    ClassConditional,
    /// Normalized conditional cross-covariance operator, regularized.
    #[serde(rename = "nocco")]
    Nocco,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HsicConfig {
    pub estimator: Estimator,
    /// Fixed RBF bandwidth; `None` uses the per-class median heuristic.
    pub bandwidth: Option<f64>,
    /// Compute classes concurrently. Results do not depend on it.
    pub parallel: bool,
}

impl Default for HsicConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::ClassConditional,
            bandwidth: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedClass {
    pub label: WordLabel,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicEstimate {
    pub score: f64,
    /// Per-class HSIC, class-conditional estimator only.
    pub per_class_scores: BTreeMap<WordLabel, f64>,
    pub per_class_bandwidth: BTreeMap<WordLabel, f64>,
    pub class_weights: BTreeMap<WordLabel, f64>,
    pub excluded_classes: Vec<ExcludedClass>,
    /// Views that entered the score.
    pub n_views: usize,
    /// View-weighted mean bandwidth.
    pub bandwidth: f64,
}

struct ClassScore {
    label: WordLabel,
    n: usize,
    outcome: std::result::Result<(f64, f64), String>,
}

fn score_class(
    label: &WordLabel,
    idx: &[usize],
    features: &[FeatureVector],
    ids: &[SampleId],
    config: &HsicConfig,
) -> ClassScore {
    let n = idx.len();
    let outcome = (|| {
        let mut distinct: Vec<SampleId> = idx.iter().map(|&i| ids[i]).collect();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(format!("{} distinct origin id(s); need 2", distinct.len()));
        }
        if n <= distinct.len() {
            return Err("no origin id has 2 or more views".to_string());
        }
        let f: Vec<FeatureVector> = idx.iter().map(|&i| features[i].clone()).collect();
        let z: Vec<SampleId> = idx.iter().map(|&i| ids[i]).collect();
        let bw = match config.bandwidth {
            Some(b) => b,
            None => median_heuristic(&f).map_err(|e| e.to_string())?,
        };
        let kx = rbf_gram(&f, bw).map_err(|e| e.to_string())?;
        let kz = delta_gram(&z);
        let h = hsic_biased(&kx, &kz).map_err(|e| e.to_string())?;
        Ok((h, bw))
    })();
    ClassScore {
        label: label.clone(),
        n,
        outcome,
    }
}

fn group_by_label(labels: &[WordLabel]) -> BTreeMap<&WordLabel, Vec<usize>> {
    let mut groups: BTreeMap<&WordLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

fn check_lengths(features: &[FeatureVector], ids: &[SampleId], labels: &[WordLabel]) -> Result<()> {
    if features.len() != ids.len() || ids.len() != labels.len() {
        return Err(Error::invalid(format!(
            "misaligned inputs: {} features, {} ids, {} labels",
            features.len(),
            ids.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Conditional dependence of `features` on `ids` given `labels`.
pub fn conditional_hsic(
    features: &[FeatureVector],
    ids: &[SampleId],
    labels: &[WordLabel],
    config: &HsicConfig,
) -> Result<HsicEstimate> {
    check_lengths(features, ids, labels)?;
    match config.estimator {
        Estimator::ClassConditional => class_conditional(features, ids, labels, config),
        Estimator::Nocco => nocco(features, ids, labels, config),
    }
}

fn class_conditional(
    features: &[FeatureVector],
    ids: &[SampleId],
    labels: &[WordLabel],
    config: &HsicConfig,
) -> Result<HsicEstimate> {
    let groups: Vec<(&WordLabel, Vec<usize>)> = group_by_label(labels).into_iter().collect();
    let scores: Vec<ClassScore> = if config.parallel {
        groups
            .par_iter()
            .map(|(l, idx)| score_class(l, idx, features, ids, config))
            .collect()
    } else {
        groups
            .iter()
            .map(|(l, idx)| score_class(l, idx, features, ids, config))
            .collect()
    };

    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for s in scores {
        match s.outcome {
            Ok((h, bw)) => kept.push((s.label, s.n, h, bw)),
            Err(reason) => excluded.push(ExcludedClass { label: s.label, reason }),
        }
    }
    if kept.is_empty() {
        let detail: Vec<String> = excluded.iter().map(|e| format!("{}: {}", e.label, e.reason)).collect();
        return Err(Error::Scoring(format!(
            "every class was excluded ({})",
            detail.join("; ")
        )));
    }
    let total: usize = kept.iter().map(|k| k.1).sum();
    let mut est = HsicEstimate {
        score: 0.0,
        per_class_scores: BTreeMap::new(),
        per_class_bandwidth: BTreeMap::new(),
        class_weights: BTreeMap::new(),
        excluded_classes: excluded,
        n_views: total,
        bandwidth: 0.0,
    };
    // Classes are in label order, so the sum is reproducible.
    for (label, n, h, bw) in kept {
        let w = n as f64 / total as f64;
        est.score += w * h;
        est.bandwidth += w * bw;
        est.per_class_scores.insert(label.clone(), h);
        est.per_class_bandwidth.insert(label.clone(), bw);
        est.class_weights.insert(label, w);
    }
    Ok(est)
}

/// Relative regularization: `ε = NOCCO_EPSILON · n`.
pub const NOCCO_EPSILON: f64 = 1e-3;

fn centered_matrix(k: &GramMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(k.n(), k.n(), &k.centered())
}

/// `G (G + ε I)^{-1}` for a centered Gram matrix `G`.
fn regularized_operator(g: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let shifted = g + DMatrix::<f64>::identity(n, n) * eps;
    let inv = shifted
        .cholesky()
        .ok_or_else(|| Error::Scoring("regularized Gram matrix is not positive definite".into()))?
        .inverse();
    Ok(g * inv)
}

/// Conditional NOCCO estimate with the label folded into both extended
/// variables: `Tr[R_x R_z − 2 R_x R_z R_y + R_x R_y R_z R_y]`, where the view
/// kernel is multiplied by a label delta kernel. Origin ids determine labels,
/// so the id kernel needs no such product.
fn nocco(
    features: &[FeatureVector],
    ids: &[SampleId],
    labels: &[WordLabel],
    config: &HsicConfig,
) -> Result<HsicEstimate> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Scoring("need at least 2 views".into()));
    }
    let bw = match config.bandwidth {
        Some(b) => b,
        None => median_heuristic(features)?,
    };
    let kx = rbf_gram(features, bw)?;
    let label_ids: Vec<usize> = {
        let groups = group_by_label(labels);
        let index: BTreeMap<&WordLabel, usize> = groups.keys().enumerate().map(|(i, l)| (*l, i)).collect();
        labels.iter().map(|l| index[l]).collect()
    };
    let kx_ext = GramMatrix::from_fn(n, KernelKind::Rbf, |i, j| {
        if label_ids[i] == label_ids[j] {
            kx.get(i, j)
        } else {
            0.0
        }
    });
    let ky = GramMatrix::from_fn(n, KernelKind::Delta, |i, j| {
        if label_ids[i] == label_ids[j] {
            1.0
        } else {
            0.0
        }
    });
    let kz = delta_gram(ids);
    let eps = NOCCO_EPSILON * n as f64;
    let rx = regularized_operator(&centered_matrix(&kx_ext), eps)?;
    let ry = regularized_operator(&centered_matrix(&ky), eps)?;
    let rz = regularized_operator(&centered_matrix(&kz), eps)?;
    let rxrz = &rx * &rz;
    let score = rxrz.trace() - 2.0 * (&rxrz * &ry).trace() + (&rx * &ry * &rz * &ry).trace();
    Ok(HsicEstimate {
        score,
        per_class_scores: BTreeMap::new(),
        per_class_bandwidth: BTreeMap::new(),
        class_weights: BTreeMap::new(),
        excluded_classes: Vec::new(),
        n_views: n,
        bandwidth: bw,
    })
}
