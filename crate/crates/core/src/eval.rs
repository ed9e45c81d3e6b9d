//! Evaluation harness: per-trial heart-rate error reports and the
//! first-trial-baseline genuine/impostor protocol for Human-ID.
//!
//! A manifest is a JSON list of [`TrialRecord`]s. Relative signal paths are
//! resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::human_id::{
    choose_threshold, decide, is_untemplateable, relative_difference, representative_value,
    AcceptRule, HumanIdConfig,
};
use crate::signal::PpgSignal;
use crate::vitals::{estimate_heart_rate, percent_error, HrMethod, VitalsConfig};

/// Either a path to a signal file or the signal itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalRef {
    Path(PathBuf),
    Inline(PpgSignal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub user_label: String,
    /// 1-based.
    pub trial_index: usize,
    pub signal_ref: SignalRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_bpm: Option<f64>,
}

impl TrialRecord {
    pub fn load_signal(&self, fallback_rate_hz: Option<f64>) -> Result<PpgSignal> {
        match &self.signal_ref {
            SignalRef::Path(p) => PpgSignal::read(p, fallback_rate_hz),
            SignalRef::Inline(s) => Ok(s.clone()),
        }
    }

    fn key(&self) -> (&str, usize) {
        (&self.user_label, self.trial_index)
    }
}

fn check_records(trials: &[TrialRecord]) -> Result<()> {
    if let Some(t) = trials.iter().find(|t| t.trial_index == 0) {
        return Err(Error::InvalidParameter(format!(
            "trial_index must be at least 1 (user {})",
            t.user_label
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for t in trials {
        if !seen.insert(t.key()) {
            return Err(Error::InvalidParameter(format!(
                "duplicate trial {} for user {}",
                t.trial_index, t.user_label
            )));
        }
    }
    Ok(())
}

pub fn parse_manifest(text: &str, base_dir: Option<&Path>) -> Result<Vec<TrialRecord>> {
    let mut trials: Vec<TrialRecord> =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if let Some(base) = base_dir {
        for t in &mut trials {
            if let SignalRef::Path(p) = &mut t.signal_ref {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
    check_records(&trials)?;
    Ok(trials)
}

pub fn read_manifest(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent())
}

pub fn write_manifest(trials: &[TrialRecord], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(trials)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

// ---- vitals ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsRow {
    pub user_label: String,
    pub trial_index: usize,
    pub ground_truth_bpm: f64,
    pub calculated_bpm: Option<f64>,
    pub percent_error: Option<f64>,
    /// Estimator failure message; such rows are left out of the means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMean {
    pub user_label: String,
    pub mean_error: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsReport {
    pub method: HrMethod,
    pub rows: Vec<VitalsRow>,
    pub per_user_mean_error: Vec<UserMean>,
    pub overall_mean_error: Option<f64>,
    pub failures: usize,
}

/// Builds the report from finished rows. Rows are sorted by user, then
/// trial.
pub fn summarize_vitals(method: HrMethod, mut rows: Vec<VitalsRow>) -> VitalsReport {
    rows.sort_by(|a, b| (&a.user_label, a.trial_index).cmp(&(&b.user_label, b.trial_index)));
    let mut by_user: BTreeMap<&str, (Vec<f64>, usize, usize)> = BTreeMap::new();
    for r in &rows {
        let e = by_user.entry(&r.user_label).or_default();
        e.1 += 1;
        match r.percent_error {
            Some(p) => e.0.push(p),
            None => e.2 += 1,
        }
    }
    let per_user_mean_error = by_user
        .iter()
        .map(|(u, (errs, n, fails))| UserMean {
            user_label: u.to_string(),
            mean_error: mean(errs),
            trials: *n,
            failures: *fails,
        })
        .collect();
    let all: Vec<f64> = rows.iter().filter_map(|r| r.percent_error).collect();
    VitalsReport {
        method,
        failures: rows.len() - all.len(),
        overall_mean_error: mean(&all),
        per_user_mean_error,
        rows,
    }
}

/// Runs the chosen estimator on every trial. Estimator failures become
/// error rows; unreadable signals and missing ground truth fail the whole
/// evaluation.
pub fn evaluate_vitals(
    trials: &[TrialRecord],
    method: HrMethod,
    cfg: &VitalsConfig,
    fallback_rate_hz: Option<f64>,
) -> Result<VitalsReport> {
    check_records(trials)?;
    if let Some(t) = trials.iter().find(|t| t.ground_truth_bpm.is_none()) {
        return Err(Error::InvalidParameter(format!(
            "trial {} of user {} has no ground_truth_bpm",
            t.trial_index, t.user_label
        )));
    }
    let rows = trials
        .par_iter()
        .map(|t| {
            let truth = t.ground_truth_bpm.expect("checked above");
            let sig = t.load_signal(fallback_rate_hz)?;
            let row = match estimate_heart_rate(&sig, method, cfg) {
                Ok(est) => VitalsRow {
                    user_label: t.user_label.clone(),
                    trial_index: t.trial_index,
                    ground_truth_bpm: truth,
                    calculated_bpm: Some(est.bpm),
                    percent_error: Some(percent_error(est.bpm, truth)?),
                    error: None,
                },
                Err(e) if e.kind() == crate::ErrorKind::Algorithm => VitalsRow {
                    user_label: t.user_label.clone(),
                    trial_index: t.trial_index,
                    ground_truth_bpm: truth,
                    calculated_bpm: None,
                    percent_error: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_vitals(method, rows))
}

pub fn vitals_table(report: &VitalsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>5}  {:>18}  {:>16}  {:>9}",
        "User", "Trial", "Ground Truth (bpm)", "Calculated (bpm)", "Error (%)"
    );
    let fmt_opt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
    for u in &report.per_user_mean_error {
        for r in report.rows.iter().filter(|r| r.user_label == u.user_label) {
            let _ = writeln!(
                s,
                "{:<12} {:>5}  {:>18.2}  {:>16}  {:>9}",
                r.user_label,
                r.trial_index,
                r.ground_truth_bpm,
                fmt_opt(r.calculated_bpm, 2),
                r.error.as_ref().map_or_else(|| fmt_opt(r.percent_error, 1), |_| "failed".into()),
            );
        }
        let _ = writeln!(
            s,
            "{:<12} {:>5}  {:>18}  {:>16}  {:>9}",
            "", "", "", "Average % Error", fmt_opt(u.mean_error, 1)
        );
    }
    let _ = writeln!(
        s,
        "{:<12} {:>5}  {:>18}  {:>16}  {:>9}",
        "All users",
        "",
        "",
        "Average % Error",
        fmt_opt(report.overall_mean_error, 1)
    );
    if report.failures > 0 {
        let _ = writeln!(s, "{} trial(s) failed and are excluded from the means", report.failures);
    }
    s
}

// ---- authentication ----

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn genuine(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn impostor(&self) -> usize {
        self.fp + self.tn
    }

    pub fn is_perfect(&self) -> bool {
        self.fn_ == 0 && self.fp == 0
    }
}

/// Representative value of one trial, or `None` if it could not be
/// templated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialValue {
    pub user_label: String,
    pub trial_index: usize,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub user_label: String,
    pub trial_index: usize,
    pub relative_difference: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAuthResult {
    pub user_label: String,
    pub baseline_trial: usize,
    pub baseline_value: Option<f64>,
    /// `None` when the baseline trial itself is untemplateable.
    pub counts: Option<ConfusionCounts>,
    pub genuine: Vec<Comparison>,
    pub impostor: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthReport {
    pub threshold_frac: f64,
    pub accept_rule: AcceptRule,
    pub users: Vec<UserAuthResult>,
    /// Trials the pipeline could not template, as `(user, trial)`.
    pub untemplateable: Vec<(String, usize)>,
    /// Grid threshold maximizing pooled TP - FP over the same comparisons.
    pub suggested_threshold_frac: Option<f64>,
    pub note: String,
}

const SELF_MATCH_NOTE: &str =
    "each user's baseline trial is also counted as one of its genuine comparisons";

/// Computes representative values for all trials. Untemplateable trials get
/// `None`; any other failure is returned.
pub fn trial_values(
    trials: &[TrialRecord],
    config: &HumanIdConfig,
    fallback_rate_hz: Option<f64>,
) -> Result<Vec<TrialValue>> {
    check_records(trials)?;
    let mut out = trials
        .par_iter()
        .map(|t| {
            let sig = t.load_signal(fallback_rate_hz)?;
            let value = match representative_value(&sig, config) {
                Ok(v) => Some(v),
                Err(e) if is_untemplateable(&e) => None,
                Err(e) => return Err(e),
            };
            Ok(TrialValue {
                user_label: t.user_label.clone(),
                trial_index: t.trial_index,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (&a.user_label, a.trial_index).cmp(&(&b.user_label, b.trial_index)));
    Ok(out)
}

/// Scores the first-trial-baseline protocol on precomputed values.
pub fn evaluate_auth_values(values: &[TrialValue], threshold_frac: f64, rule: AcceptRule) -> Result<AuthReport> {
    let mut values = values.to_vec();
    values.sort_by(|a, b| (&a.user_label, a.trial_index).cmp(&(&b.user_label, b.trial_index)));
    let mut users: Vec<&str> = values.iter().map(|v| v.user_label.as_str()).collect();
    users.dedup();
    if users.len() < 2 {
        return Err(Error::InvalidParameter("authentication needs at least 2 users".into()));
    }
    for u in &users {
        if values.iter().filter(|v| v.user_label == *u).count() < 2 {
            return Err(Error::InvalidParameter(format!("user {u} needs at least 2 trials")));
        }
    }

    let compare = |baseline: Option<f64>, v: &TrialValue| -> Comparison {
        let (rel, accepted) = match (baseline, v.value) {
            (Some(b), Some(p)) => (
                Some(relative_difference(b, p)),
                decide(b, p, threshold_frac, rule).accepted,
            ),
            _ => (None, false),
        };
        Comparison {
            user_label: v.user_label.clone(),
            trial_index: v.trial_index,
            relative_difference: rel,
            accepted,
        }
    };

    let mut results = Vec::with_capacity(users.len());
    for u in &users {
        let base = values.iter().find(|v| v.user_label == *u).expect("user has trials");
        let genuine: Vec<Comparison> = values
            .iter()
            .filter(|v| v.user_label == *u)
            .map(|v| compare(base.value, v))
            .collect();
        let impostor: Vec<Comparison> = values
            .iter()
            .filter(|v| v.user_label != *u)
            .map(|v| compare(base.value, v))
            .collect();
        let counts = base.value.map(|_| {
            let tp = genuine.iter().filter(|c| c.accepted).count();
            let fp = impostor.iter().filter(|c| c.accepted).count();
            ConfusionCounts {
                tp,
                fn_: genuine.len() - tp,
                fp,
                tn: impostor.len() - fp,
            }
        });
        results.push(UserAuthResult {
            user_label: u.to_string(),
            baseline_trial: base.trial_index,
            baseline_value: base.value,
            counts,
            genuine,
            impostor,
        });
    }

    let scores = |f: fn(&UserAuthResult) -> &Vec<Comparison>| -> Vec<f64> {
        results
            .iter()
            .flat_map(|r| f(r).iter().filter_map(|c| c.relative_difference))
            .collect()
    };
    let suggested_threshold_frac =
        choose_threshold(&scores(|r| &r.genuine), &scores(|r| &r.impostor)).ok();

    Ok(AuthReport {
        threshold_frac,
        accept_rule: rule,
        untemplateable: values
            .iter()
            .filter(|v| v.value.is_none())
            .map(|v| (v.user_label.clone(), v.trial_index))
            .collect(),
        users: results,
        suggested_threshold_frac,
        note: SELF_MATCH_NOTE.into(),
    })
}

/// Full protocol: template every trial with `config`, then compare at
/// `config.threshold_frac`.
pub fn evaluate_auth(
    trials: &[TrialRecord],
    config: &HumanIdConfig,
    fallback_rate_hz: Option<f64>,
) -> Result<AuthReport> {
    config.validate()?;
    let values = trial_values(trials, config, fallback_rate_hz)?;
    evaluate_auth_values(&values, config.threshold_frac, config.accept_rule)
}

pub fn auth_table(report: &AuthReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "threshold_frac {:.2}, suggested {}",
        report.threshold_frac,
        report
            .suggested_threshold_frac
            .map_or_else(|| "-".into(), |t| format!("{t:.2}"))
    );
    let _ = writeln!(
        s,
        "{:<12} {:>8}  {:>10}  {:>3}  {:>3}  {:>3}  {:>3}",
        "User", "Baseline", "Value", "TP", "FN", "FP", "TN"
    );
    for r in &report.users {
        let value = r.baseline_value.map_or_else(|| "-".into(), |v| format!("{v:.4}"));
        match r.counts {
            Some(c) => {
                let _ = writeln!(
                    s,
                    "{:<12} {:>8}  {:>10}  {:>3}  {:>3}  {:>3}  {:>3}",
                    r.user_label, r.baseline_trial, value, c.tp, c.fn_, c.fp, c.tn
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "{:<12} {:>8}  {:>10}  baseline untemplateable",
                    r.user_label, r.baseline_trial, value
                );
            }
        }
    }
    if !report.untemplateable.is_empty() {
        let list: Vec<String> = report
            .untemplateable
            .iter()
            .map(|(u, t)| format!("{u}/{t}"))
            .collect();
        let _ = writeln!(s, "untemplateable: {}", list.join(", "));
    }
    let _ = writeln!(s, "note: {}", report.note);
    s
}
