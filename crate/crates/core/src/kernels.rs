//! Gram matrices and the biased HSIC estimator.
//!
//! For Gram matrices `K` and `L` over the same `n` points, the estimator is
//!
//! ```text
//! HSIC(K, L) = trace(H K H L) / (n - 1)^2,    H = I - (1/n) 1 1ᵀ
//! ```
//!
//! It is zero when either kernel is constant and non-negative for positive
//! semidefinite `K` and `L`.

use serde::{Deserialize, Serialize};

use crate::corpus::SampleId;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    Delta,
}

/// A dense symmetric `n × n` kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
    pub kind: KernelKind,
}

impl GramMatrix {
    pub fn from_fn(n: usize, kind: KernelKind, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries, kind }
    }

    /// Wraps raw row-major entries; the caller vouches for symmetry.
    pub fn from_entries(n: usize, kind: KernelKind, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        Ok(Self { n, entries, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `H K H`.
    pub fn centered(&self) -> Vec<f64> {
        let n = self.n;
        let nf = n as f64;
        let row_means: Vec<f64> = (0..n)
            .map(|i| self.entries[i * n..(i + 1) * n].iter().sum::<f64>() / nf)
            .collect();
        let grand = row_means.iter().sum::<f64>() / nf;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j) - row_means[i] - row_means[j] + grand;
            }
        }
        out
    }
}

/// `K_ij = exp(-‖v_i − v_j‖² / (2 σ²))`.
pub fn rbf_gram(vectors: &[FeatureVector], bandwidth: f64) -> Result<GramMatrix> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if vectors.len() < 2 {
        return Err(Error::invalid("need at least 2 vectors for a Gram matrix"));
    }
    let denom = 2.0 * bandwidth * bandwidth;
    Ok(GramMatrix::from_fn(vectors.len(), KernelKind::Rbf, |i, j| {
        if i == j {
            1.0
        } else {
            (-vectors[i].sq_dist(&vectors[j]) / denom).exp()
        }
    }))
}

/// Median of the pairwise Euclidean distances over `i < j`.
pub fn median_heuristic(vectors: &[FeatureVector]) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 vectors"));
    }
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(vectors[i].sq_dist(&vectors[j]).sqrt());
        }
    }
    let m = d.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let median = if m % 2 == 1 {
        *d.select_nth_unstable_by(m / 2, cmp).1
    } else {
        let (lower, upper, _) = d.select_nth_unstable_by(m / 2, cmp);
        let hi = *upper;
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    if median <= 0.0 {
        return Err(Error::invalid(
            "median pairwise distance is zero; supply an explicit bandwidth",
        ));
    }
    Ok(median)
}

/// `K_ij = 1` iff `ids_i == ids_j`.
pub fn delta_gram(ids: &[SampleId]) -> GramMatrix {
    GramMatrix::from_fn(ids.len(), KernelKind::Delta, |i, j| {
        if ids[i] == ids[j] {
            1.0
        } else {
            0.0
        }
    })
}

/// Biased HSIC with `1 / (n − 1)²` normalization.
pub fn hsic_biased(kx: &GramMatrix, kz: &GramMatrix) -> Result<f64> {
    if kx.n() != kz.n() {
        return Err(Error::invalid(format!(
            "Gram matrices differ in size: {} vs {}",
            kx.n(),
            kz.n()
        )));
    }
    let n = kx.n();
    if n < 2 {
        return Err(Error::invalid("HSIC needs at least 2 points"));
    }
    let centered = kx.centered();
    let trace: f64 = centered.iter().zip(kz.entries()).map(|(a, b)| a * b).sum();
    Ok(trace / ((n - 1) * (n - 1)) as f64)
}
