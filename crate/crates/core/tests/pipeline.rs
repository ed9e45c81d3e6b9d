use ppgid_core::bench;
use ppgid_core::eval::{
    evaluate_auth, evaluate_auth_values, evaluate_vitals, trial_values, SignalRef, TrialRecord,
};
use ppgid_core::export::{build_dl_export, linear_resample, DlExportOptions, LengthAdjustment};
use ppgid_core::frames::{
    auto_roi, decode_raw, encode_raw, extract_ppg, load_frames, write_image_directory, FrameFormat, Reduction,
};
use ppgid_core::human_id::{enroll, threshold_grid, verify, AcceptRule, AuthOutcome, HumanIdConfig, HumanIdTemplate};
use ppgid_core::synth::{synth_frames, synth_ppg, Morphology, SynthSpec};
use ppgid_core::vitals::{estimate_heart_rate, heart_rate_from_peaks, HrMethod, VitalsConfig};
use ppgid_core::{Error, PpgSignal};

fn inline(user: &str, trial: usize, sig: PpgSignal) -> TrialRecord {
    TrialRecord {
        user_label: user.into(),
        trial_index: trial,
        signal_ref: SignalRef::Inline(sig),
        ground_truth_bpm: None,
    }
}

#[test]
fn frames_written_and_reloaded_extract_identically() {
    let spec = SynthSpec {
        hr_bpm: 66.0,
        noise_sigma: 0.03,
        seed: 9,
        ..SynthSpec::default()
    };
    let (sig, _) = synth_ppg(&spec).unwrap();
    for depth in [8u8, 16] {
        let seq = synth_frames(&sig, 6, 5, depth).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_image_directory(&seq, dir.path()).unwrap();
        let back = load_frames(dir.path(), FrameFormat::ImageDirectory, None).unwrap();
        assert_eq!(back, seq);
        assert_eq!(decode_raw(&encode_raw(&seq)).unwrap(), seq);
        assert_eq!(auto_roi(&back), back.full_roi());
        assert_eq!(
            extract_ppg(&back, Reduction::Sum).unwrap(),
            extract_ppg(&seq, Reduction::Sum).unwrap()
        );
    }
}

#[test]
fn frame_rate_precedence() {
    let (sig, _) = synth_ppg(&SynthSpec {
        duration_s: 1.0,
        sample_rate_hz: 10.0,
        ..SynthSpec::default()
    })
    .unwrap();
    let seq = synth_frames(&sig, 2, 2, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_image_directory(&seq, dir.path()).unwrap();
    let from_meta = load_frames(dir.path(), FrameFormat::ImageDirectory, None).unwrap();
    assert_eq!(from_meta.frame_rate_hz(), 10.0);
    let overridden = load_frames(dir.path(), FrameFormat::ImageDirectory, Some(20.0)).unwrap();
    assert_eq!(overridden.frame_rate_hz(), 20.0);
}

#[test]
fn missing_frames_path_is_reported() {
    let err = load_frames(std::path::Path::new("/no/such/dir"), FrameFormat::ImageDirectory, None).unwrap_err();
    assert!(matches!(err, Error::MissingPath(_)));
}

#[test]
fn extracted_signal_recovers_rate() {
    let (sig, truth) = synth_ppg(&SynthSpec {
        hr_bpm: 60.0,
        noise_sigma: 0.02,
        seed: 1,
        ..SynthSpec::default()
    })
    .unwrap();
    let seq = synth_frames(&sig, 8, 8, 8).unwrap();
    let extracted = extract_ppg(&seq, Reduction::Sum).unwrap();
    for method in [HrMethod::Basic, HrMethod::Ensemble] {
        let est = estimate_heart_rate(&extracted, method, &VitalsConfig::default()).unwrap();
        assert!((est.bpm - truth.true_hr_bpm).abs() < 3.0, "{method}: {}", est.bpm);
    }
}

#[test]
fn ground_truth_peaks_match_rate() {
    for c in bench::hr_benchmark() {
        let (_, truth) = synth_ppg(&c.spec).unwrap();
        let from_peaks = heart_rate_from_peaks(&truth.beat_peak_indices, c.spec.sample_rate_hz).unwrap();
        // Median of rounded intervals against the mean of exact ones: within
        // the jitter bound plus one sample of rounding.
        let period = 60.0 / truth.true_hr_bpm;
        let slack = 2.0 * c.spec.hr_jitter_frac * period + 1.0 / c.spec.sample_rate_hz;
        let got_period = 60.0 / from_peaks;
        assert!((got_period - period).abs() <= slack, "{}: {got_period} vs {period}", c.id);
    }
}

#[test]
fn enroll_then_verify() {
    let cfg = HumanIdConfig::default();
    let (sig, _) = synth_ppg(&SynthSpec {
        noise_sigma: 0.02,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    let tpl = enroll(&sig, "me", &cfg).unwrap();
    assert_eq!(tpl.id_signal.len(), 2 * (2 * cfg.half_width + 1) - 1);
    let back = HumanIdTemplate::from_json(&tpl.to_json().unwrap()).unwrap();
    assert_eq!(back, tpl);
    let d = verify(&back, &sig).unwrap();
    assert!(d.accepted);
    assert_eq!(d.abs_difference, Some(0.0));

    let short = PpgSignal::new(sig.samples()[..20].to_vec(), 14.0).unwrap();
    let d = verify(&tpl, &short).unwrap();
    assert!(!d.accepted);
    assert_eq!(d.outcome, AuthOutcome::Untemplateable);
}

#[test]
fn same_user_retrial_accepted_at_default_threshold() {
    let cases = bench::auth_benchmark();
    let cfg = HumanIdConfig::default();
    let (base, _) = synth_ppg(&cases[0].spec).unwrap();
    let tpl = enroll(&base, &cases[0].user, &cfg).unwrap();
    for c in cases.iter().filter(|c| c.user == cases[0].user) {
        let (probe, _) = synth_ppg(&c.spec).unwrap();
        assert!(verify(&tpl, &probe).unwrap().accepted, "{}", c.id);
    }
}

/// Straight re-implementation of the comparison loop.
fn brute_force_counts(values: &[(String, usize, f64)], t: f64) -> Vec<(usize, usize, usize, usize)> {
    let mut users: Vec<&String> = values.iter().map(|v| &v.0).collect();
    users.sort();
    users.dedup();
    users
        .iter()
        .map(|u| {
            let base = values
                .iter()
                .filter(|v| &v.0 == *u)
                .min_by_key(|v| v.1)
                .unwrap()
                .2;
            let (mut tp, mut fnn, mut fp, mut tn) = (0, 0, 0, 0);
            for v in values {
                let ok = (v.2 - base).abs() <= t * base.abs();
                match (&v.0 == *u, ok) {
                    (true, true) => tp += 1,
                    (true, false) => fnn += 1,
                    (false, true) => fp += 1,
                    (false, false) => tn += 1,
                }
            }
            (tp, fnn, fp, tn)
        })
        .collect()
}

#[test]
fn auth_counts_match_brute_force() {
    let trials: Vec<TrialRecord> = bench::auth_benchmark()
        .into_iter()
        .map(|c| inline(&c.user, c.trial, synth_ppg(&c.spec).unwrap().0))
        .collect();
    let values = trial_values(&trials, &HumanIdConfig::default(), None).unwrap();
    let flat: Vec<(String, usize, f64)> = values
        .iter()
        .map(|v| (v.user_label.clone(), v.trial_index, v.value.unwrap()))
        .collect();
    for t in threshold_grid() {
        let r = evaluate_auth_values(&values, t, AcceptRule::WithinThreshold).unwrap();
        let got: Vec<_> = r
            .users
            .iter()
            .map(|u| {
                let c = u.counts.unwrap();
                (c.tp, c.fn_, c.fp, c.tn)
            })
            .collect();
        assert_eq!(got, brute_force_counts(&flat, t), "threshold {t}");
        for u in &r.users {
            let c = u.counts.unwrap();
            assert_eq!((c.genuine(), c.impostor()), (6, 24));
        }
    }
}

#[test]
fn identical_signals_cannot_be_separated() {
    let (sig, _) = synth_ppg(&SynthSpec::default()).unwrap();
    let trials = vec![
        inline("a", 1, sig.clone()),
        inline("a", 2, sig.clone()),
        inline("b", 1, sig.clone()),
        inline("b", 2, sig),
    ];
    let r = evaluate_auth(&trials, &HumanIdConfig::default(), None).unwrap();
    for u in &r.users {
        let c = u.counts.unwrap();
        assert_eq!(c.fp, c.impostor());
    }
}

#[test]
fn vitals_on_benchmark_trials() {
    let trials: Vec<TrialRecord> = bench::hr_benchmark()
        .into_iter()
        .map(|c| {
            let (sig, truth) = synth_ppg(&c.spec).unwrap();
            TrialRecord {
                ground_truth_bpm: Some(truth.true_hr_bpm),
                ..inline(&c.user, c.trial, sig)
            }
        })
        .collect();
    let basic = evaluate_vitals(&trials, HrMethod::Basic, &VitalsConfig::default(), None).unwrap();
    let ens = evaluate_vitals(&trials, HrMethod::Ensemble, &VitalsConfig::default(), None).unwrap();
    for r in [&basic, &ens] {
        let errs: Vec<f64> = r.rows.iter().filter_map(|row| row.percent_error).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((r.overall_mean_error.unwrap() - mean).abs() < 1e-9);
        assert_eq!(r.per_user_mean_error.len(), 5);
    }
    assert!(ens.overall_mean_error.unwrap() <= basic.overall_mean_error.unwrap());

    let mut missing = trials.clone();
    missing[3].ground_truth_bpm = None;
    assert!(evaluate_vitals(&missing, HrMethod::Basic, &VitalsConfig::default(), None).is_err());
}

#[test]
fn short_trial_becomes_failed_row() {
    let (sig, _) = synth_ppg(&SynthSpec {
        duration_s: 2.0,
        ..SynthSpec::default()
    })
    .unwrap();
    let trials = vec![TrialRecord {
        ground_truth_bpm: Some(75.0),
        ..inline("u", 1, sig)
    }];
    let r = evaluate_vitals(&trials, HrMethod::Basic, &VitalsConfig::default(), None).unwrap();
    assert_eq!(r.failures, 1);
    assert_eq!(r.overall_mean_error, None);
    assert!(r.rows[0].error.is_some());
}

#[test]
fn export_shapes_and_resampling() {
    let mut trials: Vec<TrialRecord> = bench::auth_benchmark()
        .into_iter()
        .map(|c| inline(&c.user, c.trial, synth_ppg(&c.spec).unwrap().0))
        .collect();
    let e = build_dl_export(&trials, &DlExportOptions::default(), None).unwrap();
    assert_eq!((e.rows.len(), e.metadata.signal_len), (30, 210));
    assert!(e.metadata.trials.iter().all(|t| t.adjustment == LengthAdjustment::None));

    // One shorter trial: with the default length the others are truncated;
    // asking for the long length resamples the short one instead.
    let (short, _) = synth_ppg(&SynthSpec {
        duration_s: 10.0,
        ..bench::auth_benchmark()[0].spec.clone()
    })
    .unwrap();
    trials[0].signal_ref = SignalRef::Inline(short.clone());
    let e = build_dl_export(&trials, &DlExportOptions::default(), None).unwrap();
    assert_eq!(e.metadata.signal_len, 140);
    assert_eq!(e.metadata.trials[1].adjustment, LengthAdjustment::Truncated);

    let e = build_dl_export(
        &trials,
        &DlExportOptions {
            signal_len: Some(210),
            positive_user: None,
        },
        None,
    )
    .unwrap();
    assert_eq!(e.metadata.trials[0].adjustment, LengthAdjustment::Resampled);
    // Independent resampling: interpolate at i * 139 / 209 by hand.
    let x = short.samples();
    let manual: Vec<f64> = (0..210)
        .map(|i| {
            let pos = i as f64 * 139.0 / 209.0;
            let k = (pos as usize).min(138);
            x[k] * (1.0 - (pos - k as f64)) + x[k + 1] * (pos - k as f64)
        })
        .collect();
    for (a, b) in linear_resample(x, 210).iter().zip(&manual) {
        assert!((a - b).abs() < 1e-12);
    }
    let row = &e.rows[0];
    let mean = row.iter().sum::<f64>() / 210.0;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 210.0;
    assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
}

#[test]
fn presets_are_distinct_and_named() {
    let names: Vec<_> = Morphology::preset_names().collect();
    assert_eq!(names.len(), 5);
    for n in &names {
        assert!(Morphology::preset(n).is_some());
    }
    assert!(Morphology::preset("nope").is_none());
}
