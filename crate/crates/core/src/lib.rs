//! Selecting audio augmentation policies by conditional kernel dependence.
//!
//! A policy is a distribution over waveform distortion chains. Each candidate
//! policy is applied many times to a labeled speech set, the resulting views
//! are embedded, and the policy is scored by how much the views still reveal
//! which segment they came from, given the word they carry. The search keeps
//! the policy with the lowest score.
//!
//! ```
//! use augsel::{fixture::SyntheticCorpus, AugmentationPolicy, SelectorConfig, score_policy};
//!
//! let segments = SyntheticCorpus::tiny()?.segments()?;
//! let config = SelectorConfig { views_per_sample: 3, ..SelectorConfig::default() };
//! let report = score_policy(&segments, &AugmentationPolicy::identity(), &config)?;
//! assert!(report.score >= 0.0);
//! # Ok::<(), augsel::Error>(())
//! ```

pub mod audio;
pub mod corpus;
pub mod dsp;
mod error;
pub mod features;
pub mod fixture;
pub mod hsic;
pub mod kernels;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod seed;
pub mod selector;
pub mod stats;

pub use audio::{AudioClip, SAMPLE_RATE};
pub use corpus::{LabeledSegment, SampleId, WordLabel};
pub use dsp::{apply_chain, AppliedChainRecord};
pub use error::{Error, Result};
pub use features::{embed, FeatureKind, FeatureVector};
pub use hsic::{conditional_hsic, Estimator, HsicConfig, HsicEstimate};
pub use kernels::{hsic_biased, GramMatrix};
pub use oracle::{run_oracle, simulate_target, OracleConfig, OracleReport};
pub use policy::{
    parse_policy, policy_distance, sample_policy, serialize_policy, Augmentation, AugmentationPolicy,
    PolicyPriors,
};
pub use selector::{build_views, score_policy, select_policy, HsicReport, SelectorConfig, Selection, ViewSet};
pub use stats::spearman;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/augmentations.md")]
    mod augmentations {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/hsic.md")]
    mod hsic {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
