use augsel::fixture::SyntheticCorpus;
use augsel::kernels::{delta_gram, median_heuristic, rbf_gram};
use augsel::selector::{candidate_policy, score_policy_at};
use augsel::{
    build_views, conditional_hsic, embed, hsic_biased, policy::PolicyPriors, seed, select_policy, Estimator,
    FeatureVector, HsicConfig, LabeledSegment, SampleId, SelectorConfig, WordLabel,
};
use proptest::prelude::*;
use rand::Rng;

fn tiny() -> Vec<LabeledSegment> {
    SyntheticCorpus::tiny().unwrap().segments().unwrap()
}

fn config(d: usize, n: usize) -> SelectorConfig {
    SelectorConfig {
        num_policies: d,
        views_per_sample: n,
        num_classes: 3,
        master_seed: 17,
        ..SelectorConfig::default()
    }
}

#[test]
fn view_counts() {
    let segs: Vec<_> = tiny().into_iter().take(5).collect();
    let p = candidate_policy(&PolicyPriors::default(), 1, 0).unwrap();
    let v = build_views(&segs, &p, 3, 99).unwrap();
    assert_eq!(v.len(), 15);
    assert_eq!(v.origin_ids.len(), 15);
    assert_eq!(v.labels.len(), 15);
    for s in &segs {
        assert_eq!(v.origin_ids.iter().filter(|&&i| i == s.origin_id).count(), 3);
    }
}

#[test]
fn identity_views_equal_segment_features() {
    let segs: Vec<_> = tiny().into_iter().take(4).collect();
    let v = build_views(&segs, &augsel::AugmentationPolicy::identity(), 2, 5).unwrap();
    for (f, id) in v.features.iter().zip(&v.origin_ids) {
        assert_eq!(f, &embed(&segs[id.0].audio).unwrap());
    }
}

#[test]
fn views_are_reproducible() {
    let segs: Vec<_> = tiny().into_iter().take(6).collect();
    let p = candidate_policy(&PolicyPriors::default(), 2, 3).unwrap();
    assert_eq!(build_views(&segs, &p, 2, 8).unwrap(), build_views(&segs, &p, 2, 8).unwrap());
}

#[test]
fn score_is_deterministic_and_sequential_matches_parallel() {
    let segs = tiny();
    let p = candidate_policy(&PolicyPriors::default(), 4, 0).unwrap();
    let cfg = config(1, 2);
    let a = score_policy_at(&segs, &p, &cfg, 3).unwrap();
    let b = score_policy_at(&segs, &p, &cfg, 3).unwrap();
    assert_eq!(a, b);
    let mut seq = cfg;
    seq.hsic.parallel = false;
    assert_eq!(score_policy_at(&segs, &p, &seq, 3).unwrap().score, a.score);
    let total: f64 = a.class_weights.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(a.n_views, 60);
}

#[test]
fn identity_and_heavy_policies_are_finite() {
    let segs = tiny();
    let cfg = config(1, 2);
    let id = augsel::AugmentationPolicy::identity();
    let heavy = id.with_probs([1.0; 7]);
    for p in [id, heavy] {
        assert!(augsel::score_policy(&segs, &p, &cfg).unwrap().score.is_finite());
    }
}

#[test]
fn single_candidate_search() {
    let segs = tiny();
    let s = select_policy(&segs, &config(1, 2)).unwrap();
    assert_eq!(s.ranking.len(), 1);
    assert_eq!(s.best, candidate_policy(&PolicyPriors::default(), 17, 0).unwrap());
}

#[test]
fn ranking_is_a_sorted_permutation_and_thread_independent() {
    let segs = tiny();
    let cfg = config(4, 2);
    let one = augsel::selector::with_threads(Some(1), || select_policy(&segs, &cfg)).unwrap().unwrap();
    let four = augsel::selector::with_threads(Some(4), || select_policy(&segs, &cfg)).unwrap().unwrap();
    assert_eq!(one, four);
    let mut idx: Vec<usize> = one.ranking.iter().map(|r| r.policy_index).collect();
    assert!(one.ranking.windows(2).all(|w| w[0].score <= w[1].score));
    idx.sort();
    assert_eq!(idx, vec![0, 1, 2, 3]);
    for r in &one.ranking {
        assert_eq!(r.policy, candidate_policy(&cfg.priors, 17, r.policy_index).unwrap());
    }
}

#[test]
fn nocco_estimator_scores() {
    let segs = tiny();
    let mut cfg = config(1, 2);
    cfg.hsic.estimator = Estimator::Nocco;
    let r = augsel::score_policy(&segs, &augsel::AugmentationPolicy::identity(), &cfg).unwrap();
    assert!(r.score.is_finite());
    assert!(r.per_class_scores.is_empty());
}

fn random_problem(s: u64) -> (Vec<FeatureVector>, Vec<SampleId>, Vec<WordLabel>) {
    let mut rng = seed::rng(s, &[]);
    let classes = rng.random_range(1..4);
    let (mut f, mut z, mut y) = (Vec::new(), Vec::new(), Vec::new());
    let mut next = 0;
    for c in 0..classes {
        let ids = rng.random_range(2..5);
        for _ in 0..ids {
            let base: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..rng.random_range(2..4) {
                f.push(FeatureVector(base.iter().map(|b| b + rng.random_range(-0.3..0.3)).collect()));
                z.push(SampleId(next));
                y.push(WordLabel(format!("C{c}")));
            }
            next += 1;
        }
    }
    (f, z, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_a_convex_combination(s in any::<u64>()) {
        let (f, z, y) = random_problem(s);
        let est = conditional_hsic(&f, &z, &y, &HsicConfig::default()).unwrap();
        let w: f64 = est.class_weights.values().sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
        let combined: f64 = est.per_class_scores.iter().map(|(c, v)| est.class_weights[c] * v).sum();
        prop_assert!((combined - est.score).abs() < 1e-12);
        let lo = est.per_class_scores.values().cloned().fold(f64::INFINITY, f64::min);
        let hi = est.per_class_scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-15 <= est.score && est.score <= hi + 1e-15);
    }

    #[test]
    fn hsic_is_symmetric_and_permutation_invariant(s in any::<u64>()) {
        let (f, z, _) = random_problem(s);
        let bw = median_heuristic(&f).unwrap();
        let k = rbf_gram(&f, bw).unwrap();
        let l = delta_gram(&z);
        let base = hsic_biased(&k, &l).unwrap();
        prop_assert!((base - hsic_biased(&l, &k).unwrap()).abs() < 1e-12);

        let mut rng = seed::rng(s, &[1]);
        let mut perm: Vec<usize> = (0..f.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let fp: Vec<FeatureVector> = perm.iter().map(|&i| f[i].clone()).collect();
        let zp: Vec<SampleId> = perm.iter().map(|&i| z[i]).collect();
        let permuted = hsic_biased(&rbf_gram(&fp, bw).unwrap(), &delta_gram(&zp)).unwrap();
        prop_assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn rbf_gram_is_scale_invariant(s in any::<u64>(), c in 0.1f64..10.0) {
        let (f, z, _) = random_problem(s);
        let bw = median_heuristic(&f).unwrap();
        let scaled: Vec<FeatureVector> = f.iter().map(|v| FeatureVector(v.0.iter().map(|x| x * c).collect())).collect();
        let a = rbf_gram(&f, bw).unwrap();
        let b = rbf_gram(&scaled, bw * c).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let l = delta_gram(&z);
        prop_assert!((hsic_biased(&a, &l).unwrap() - hsic_biased(&b, &l).unwrap()).abs() < 1e-12);
    }
}
