use augsel::fixture::SyntheticCorpus;
use augsel::oracle::write_oracle_csv;
use augsel::{
    run_oracle, simulate_target, spearman, AugmentationPolicy, LabeledSegment, OracleConfig, SelectorConfig,
};

fn segments() -> Vec<LabeledSegment> {
    SyntheticCorpus::tiny().unwrap().segments().unwrap()
}

fn small(a: usize, c: usize, inject: bool) -> OracleConfig {
    OracleConfig {
        hidden_policies: a,
        candidates_per_target: c,
        master_seed: 31,
        inject_hidden: inject,
        selector: SelectorConfig {
            views_per_sample: 2,
            num_classes: 3,
            ..SelectorConfig::default()
        },
        ..OracleConfig::default()
    }
}

#[test]
fn defaults() {
    let c = OracleConfig::default();
    assert_eq!((c.hidden_policies, c.candidates_per_target), (8, 200));
    let s = SelectorConfig::default();
    assert_eq!((s.num_policies, s.views_per_sample, s.num_classes), (100, 20, 10));
}

#[test]
fn identity_target_is_unchanged() {
    let segs = segments();
    let out = simulate_target(&segs, &AugmentationPolicy::identity(), 4).unwrap();
    assert_eq!(out, segs);
}

#[test]
fn polarity_target_is_negated() {
    let segs = segments();
    let p = AugmentationPolicy::identity().with_probs([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let out = simulate_target(&segs, &p, 4).unwrap();
    for (a, b) in segs.iter().zip(&out) {
        assert_eq!(a.origin_id, b.origin_id);
        assert_eq!(a.label, b.label);
        assert!(a.audio.samples.iter().zip(&b.audio.samples).all(|(x, y)| *y == -*x));
    }
}

#[test]
fn target_is_reproducible() {
    let segs = segments();
    let p = AugmentationPolicy::identity().with_probs([0.5; 7]);
    assert_eq!(simulate_target(&segs, &p, 9).unwrap(), simulate_target(&segs, &p, 9).unwrap());
    assert!(simulate_target(&[], &p, 9).is_err());
}

#[test]
fn bookkeeping_and_injection() {
    let segs = segments();
    let r = run_oracle(&segs, &small(1, 3, true)).unwrap();
    assert_eq!(r.targets.len(), 1);
    let t = &r.targets[0];
    assert_eq!(t.candidates.len() + t.failures.len(), 3);
    assert_eq!(t.candidates[0].distance, 0.0);
    assert!(t.candidates[0].is_hidden);
    assert_eq!(t.candidates[0].policy, t.hidden);
    assert!(t.candidates.iter().all(|c| c.distance >= t.candidates[0].distance));
    assert!(t.hidden_rank.is_some());
    let s: Vec<f64> = t.candidates.iter().map(|c| c.hsic).collect();
    let d: Vec<f64> = t.candidates.iter().map(|c| c.distance).collect();
    assert_eq!(t.spearman, spearman(&s, &d).ok());
}

#[test]
fn report_is_deterministic_and_csv_is_flat() {
    let segs = segments();
    let cfg = small(2, 3, false);
    let a = run_oracle(&segs, &cfg).unwrap();
    assert_eq!(a, run_oracle(&segs, &cfg).unwrap());

    let mut buf = Vec::new();
    write_oracle_csv(&mut buf, &a).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let n: usize = a.targets.iter().map(|t| t.candidates.len()).sum();
    assert_eq!(text.lines().count(), n + 1);
    for t in &a.targets {
        assert!(t.top_tail_mean_distance.is_finite());
        assert!(t.candidates.iter().all(|c| !c.is_hidden));
    }
}

#[test]
fn invalid_configs() {
    let segs = segments();
    let mut c = small(1, 3, false);
    c.tail_fraction = 0.0;
    assert!(run_oracle(&segs, &c).is_err());
    let c = small(0, 3, false);
    assert!(run_oracle(&segs, &c).is_err());
}
