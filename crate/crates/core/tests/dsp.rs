use std::f64::consts::PI;

use augsel::dsp::{self, filter, pitch, reverb};
use augsel::{apply_chain, seed, Augmentation, AudioClip, AugmentationPolicy};
use proptest::prelude::*;

fn sine(freq: f64, secs: f64, amp: f64) -> AudioClip {
    let n = (secs * 16_000.0) as usize;
    let x = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / 16_000.0).sin()).collect();
    AudioClip::new(x, 16_000).unwrap()
}

/// Period of the strongest autocorrelation peak between 2 and 20 ms.
fn detect_f0(x: &[f64]) -> f64 {
    let x = &x[x.len() / 4..3 * x.len() / 4];
    let ac = |lag: usize| -> f64 { (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (x.len() - lag) as f64 };
    let vals: Vec<f64> = (32..=320).map(ac).collect();
    let peak = vals.iter().cloned().fold(f64::MIN, f64::max);
    let best = (1..vals.len() - 1)
        .find(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] >= 0.9 * peak)
        .unwrap();
    let (a, b, c) = (vals[best - 1], vals[best], vals[best + 1]);
    16_000.0 / ((32 + best) as f64 + 0.5 * (a - c) / (a - 2.0 * b + c))
}

fn db(a: &[f64], b: &[f64]) -> f64 {
    20.0 * (augsel::audio::rms(a) / augsel::audio::rms(b)).log10()
}

#[test]
fn octave_shifts_double_and_halve_pitch() {
    let up = dsp::pitch_shift(&sine(220.0, 1.0, 0.5), 12.0).unwrap();
    let f = detect_f0(&up.samples);
    assert!((430.0..=450.0).contains(&f), "{f}");
    let down = dsp::pitch_shift(&sine(440.0, 1.0, 0.5), -12.0).unwrap();
    let f = detect_f0(&down.samples);
    assert!((215.0..=225.0).contains(&f), "{f}");
}

#[test]
fn semitone_shift_of_a_fifth() {
    let y = dsp::pitch_shift(&sine(300.0, 1.0, 0.5), 7.0).unwrap();
    let want = 300.0 * 2f64.powf(7.0 / 12.0);
    let f = detect_f0(&y.samples);
    assert!((f / want - 1.0).abs() < 0.02, "{f} vs {want}");
}

#[test]
fn time_stretch_lengths() {
    let x = sine(500.0, 0.5, 0.3).samples;
    for ratio in [0.5, 0.8, 1.25, 2.0] {
        assert_eq!(pitch::time_stretch(&x, ratio).len(), (x.len() as f64 * ratio).round() as usize);
    }
}

#[test]
fn lowpass_stopband_one_octave_above_cutoff() {
    let tone = sine(1000.0, 1.0, 0.5);
    let y = dsp::lowpass(&tone, 500.0).unwrap();
    let atten = db(&tone.samples[1600..], &y.samples[1600..]);
    assert!(atten >= 30.0, "{atten}");
    // Analytic response agrees with the measured one.
    let sections = filter::butterworth(filter::FilterKind::Lowpass, filter::FILTER_ORDER, 500.0, 16_000.0);
    let analytic = -20.0 * filter::magnitude(&sections, 1000.0, 16_000.0).log10();
    assert!((analytic - atten).abs() < 0.5, "{analytic} vs {atten}");
}

#[test]
fn highpass_passes_high_and_blocks_low() {
    let hi = sine(6000.0, 0.5, 0.5);
    let lo = sine(500.0, 0.5, 0.5);
    let yh = dsp::highpass(&hi, 2000.0).unwrap();
    let yl = dsp::highpass(&lo, 2000.0).unwrap();
    assert!(db(&hi.samples[1600..], &yh.samples[1600..]).abs() < 0.1);
    assert!(db(&lo.samples[1600..], &yl.samples[1600..]) > 60.0);
}

#[test]
fn reverb_of_impulse_is_the_rir() {
    for (i, rt60) in [0.1, 0.35, 0.6].into_iter().enumerate() {
        let mut x = vec![0.0; 16_000];
        x[0] = 0.25;
        let clip = AudioClip::new(x, 16_000).unwrap();
        let wet = dsp::reverberate(&clip, rt60, &mut seed::rng(10, &[i as u64])).unwrap();
        let rir = reverb::room_impulse_response(rt60, 16_000, &mut seed::rng(10, &[i as u64])).unwrap();
        for (k, h) in rir.iter().enumerate().take(wet.len()) {
            assert!((wet.samples[k] - 0.25 * h).abs() < 1e-10, "rt60 {rt60} sample {k}");
        }
    }
}

#[test]
fn noise_snr_on_two_second_sines() {
    let mut rng = seed::rng(21, &[]);
    for freq in [150.0, 440.0, 3000.0] {
        let x = sine(freq, 2.0, 0.1);
        for snr in [0.0, 7.5, 15.0, 30.0] {
            for exp in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let y = dsp::add_colored_noise(&x, snr, exp, &mut rng).unwrap();
                let n: Vec<f64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
                let got = db(&x.samples, &n);
                assert!((got - snr).abs() <= 0.5, "{freq} Hz, {snr} dB, exp {exp}: {got}");
            }
        }
    }
}

#[test]
fn all_on_chain_records_every_augmentation() {
    let x = sine(300.0, 1.0, 0.3);
    let p = AugmentationPolicy::identity().with_probs([1.0; 7]);
    let (y, rec) = apply_chain(&x, &p, &mut seed::rng(4, &[])).unwrap();
    assert_eq!(y.len(), x.len());
    assert!(Augmentation::ALL.iter().all(|a| rec.is_applied(*a)));
    assert!(rec.skipped.is_empty());
    let pitch = rec.realized_params[&Augmentation::Pitch].values().next().copied().unwrap();
    assert!((p.pitch_min..=p.pitch_max).contains(&pitch));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gain_zero_and_double_polarity_are_exact(seed_v in any::<u64>(), len in 1usize..2000) {
        let mut rng = seed::rng(seed_v, &[]);
        let x: Vec<f64> = (0..len).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let c = AudioClip::new(x, 16_000).unwrap();
        prop_assert_eq!(&dsp::apply_gain(&c, 0.0).unwrap(), &c);
        prop_assert_eq!(&dsp::invert_polarity(&dsp::invert_polarity(&c)), &c);
    }

    #[test]
    fn chain_preserves_length_and_finiteness(s in any::<u64>(), probs in prop::array::uniform7(0.0f64..=1.0)) {
        let x = sine(250.0, 0.3, 0.5);
        let p = AugmentationPolicy::identity().with_probs(probs);
        let (y, _) = apply_chain(&x, &p, &mut seed::rng(s, &[])).unwrap();
        prop_assert_eq!(y.len(), x.len());
        prop_assert!(y.samples.iter().all(|v| v.is_finite()));
    }
}
