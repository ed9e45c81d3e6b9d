use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ppgid_core::eval::{evaluate_auth, evaluate_vitals, read_manifest};
use ppgid_core::frames::{extract_ppg, load_frames, FrameFormat, Reduction};
use ppgid_core::human_id::{verify, HumanIdConfig, HumanIdTemplate};
use ppgid_core::vitals::{estimate_heart_rate, HrMethod, VitalsConfig};
use ppgid_core::PpgSignal;

fn ppgid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppgid"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ppgid(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap() + "\n"
}

#[test]
fn extract_matches_library_and_full_roi() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--seed", "5", "synth", "--hr", "70", "--noise", "0.05", "--out", "s.csv", "--frames", "fr", "--width", "6", "--height", "4"]);
    ok(p, &["extract", "fr", "--out", "a.csv"]);
    ok(p, &["extract", "fr", "--roi", "0,0,6,4", "--out", "b.csv"]);
    let seq = load_frames(&p.join("fr"), FrameFormat::ImageDirectory, None).unwrap();
    let direct = extract_ppg(&seq, Reduction::Sum).unwrap();
    assert_eq!(fs::read_to_string(p.join("a.csv")).unwrap(), direct.to_csv_string());
    assert_eq!(fs::read(p.join("a.csv")).unwrap(), fs::read(p.join("b.csv")).unwrap());
    let stdout = ok(p, &["extract", "fr", "--format", "csv"]);
    assert_eq!(stdout, direct.to_csv_string());
}

#[test]
fn extract_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = ppgid(d.path(), &["extract", "missing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    ok(d.path(), &["synth", "--out", "s.csv", "--frames", "fr"]);
    let out = ppgid(d.path(), &["extract", "fr", "--roi", "4,4,8,8"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hr_output_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--seed", "2", "synth", "--hr", "60", "--noise", "0.05", "--out", "s.csv"]);
    let text = ok(p, &["hr", "s.csv"]);
    let sig = PpgSignal::read(&p.join("s.csv"), None).unwrap();
    let direct = estimate_heart_rate(&sig, HrMethod::Basic, &VitalsConfig::default()).unwrap();
    assert_eq!(text, json_pretty(&direct));
    assert!((direct.bpm - 60.0).abs() <= 3.0);

    let v: serde_json::Value = serde_json::from_str(&ok(p, &["hr", "s.csv", "--method", "ensemble"])).unwrap();
    assert_eq!(v["method"], "ensemble");

    fs::write(p.join("bad.csv"), "sample_index,intensity\n0,1\n2,x\n").unwrap();
    assert_eq!(ppgid(p, &["hr", "bad.csv"]).status.code(), Some(2));

    ok(p, &["synth", "--duration", "2", "--out", "short.csv"]);
    assert_eq!(ppgid(p, &["hr", "short.csv"]).status.code(), Some(3));

    assert_eq!(ppgid(p, &["hr", "s.csv", "--bogus"]).status.code(), Some(1));
    assert_eq!(ppgid(p, &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn csv_without_sidecar_uses_sample_rate_flag() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--sample-rate", "28", "synth", "--hr", "80", "--out", "s.csv"]);
    fs::remove_file(p.join("s.meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(p, &["--sample-rate", "28", "hr", "s.csv"])).unwrap();
    assert!((v["bpm"].as_f64().unwrap() - 80.0).abs() < 2.0);
}

#[test]
fn enroll_verify_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--seed", "1", "synth", "--noise", "0.02", "--out", "a.csv"]);
    ok(p, &["--seed", "2", "synth", "--hr", "95", "--morphology", "narrow", "--noise", "0.02", "--out", "b.json"]);
    ok(p, &["enroll", "a.csv", "--user", "alice", "--out", "t.json"]);

    let v: serde_json::Value = serde_json::from_str(&ok(p, &["verify", "t.json", "a.csv"])).unwrap();
    assert_eq!(v["accepted"], true);

    let tpl = HumanIdTemplate::from_json(&fs::read_to_string(p.join("t.json")).unwrap()).unwrap();
    let probe = PpgSignal::read(&p.join("b.json"), None).unwrap();
    assert_eq!(ok(p, &["verify", "t.json", "b.json"]), json_pretty(&verify(&tpl, &probe).unwrap()));

    fs::write(p.join("corrupt.json"), "{\"user_label\": 3").unwrap();
    let out = ppgid(p, &["verify", "corrupt.json", "a.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid template"));
}

#[test]
fn eval_and_export_follow_library() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["synth", "--benchmark", "auth", "--out", "auth"]);
    ok(p, &["synth", "--benchmark", "hr", "--out", "hr"]);

    let auth = read_manifest(&p.join("auth/manifest.json")).unwrap();
    let expected = evaluate_auth(&auth, &HumanIdConfig::default(), Some(14.0)).unwrap();
    assert_eq!(ok(p, &["eval", "auth/manifest.json", "--mode", "auth"]), json_pretty(&expected));
    let table = ok(p, &["eval", "auth/manifest.json", "--mode", "auth", "--format", "table"]);
    assert_eq!(table.lines().filter(|l| l.starts_with("user")).count(), 5);

    let hr = read_manifest(&p.join("hr/manifest.json")).unwrap();
    let expected = evaluate_vitals(&hr, HrMethod::Ensemble, &VitalsConfig::default(), Some(14.0)).unwrap();
    let got = ok(p, &["eval", "hr/manifest.json", "--mode", "vitals", "--method", "ensemble"]);
    assert_eq!(got, json_pretty(&expected));
    let csv = ok(p, &["eval", "hr/manifest.json", "--mode", "vitals", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 31);

    ok(p, &["export-dl", "auth/manifest.json", "--out", "x1.csv", "--positive-user", "user3"]);
    ok(p, &["export-dl", "auth/manifest.json", "--out", "x2.csv", "--positive-user", "user3"]);
    let m1 = fs::read_to_string(p.join("x1.csv")).unwrap();
    assert_eq!(m1, fs::read_to_string(p.join("x2.csv")).unwrap());
    assert_eq!(
        fs::read(p.join("x1.meta.json")).unwrap(),
        fs::read(p.join("x2.meta.json")).unwrap()
    );
    let lines: Vec<&str> = m1.lines().collect();
    assert_eq!(lines.len(), 31);
    assert!(lines.iter().all(|l| l.split(',').count() == 211));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("x1.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["n_trials"], 30);
    assert_eq!(meta["signal_len"], 210);
    let positives = meta["binary_labels"].as_array().unwrap().iter().filter(|v| *v == 1).count();
    assert_eq!(positives, 6);
}
