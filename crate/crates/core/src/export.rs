//! Fixed-length dataset export for external classifiers.
//!
//! The container is a CSV matrix with header `label,x0,..,x{L-1}` (one row
//! per trial, sorted by user then trial) plus `<stem>.meta.json` describing
//! it. Every trial is brought to length `L` (default: the shortest trial):
//! longer ones keep their first `L` samples, shorter ones are linearly
//! resampled so that first and last samples line up. Each row is then
//! z-scored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TrialRecord;
use crate::signal::sidecar_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthAdjustment {
    None,
    Truncated,
    Resampled,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DlExportOptions {
    pub signal_len: Option<usize>,
    /// Adds binary labels, 1 for this user's trials.
    pub positive_user: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlTrialMeta {
    pub user_label: String,
    pub trial_index: usize,
    pub original_len: usize,
    pub adjustment: LengthAdjustment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlMetadata {
    pub n_trials: usize,
    pub signal_len: usize,
    pub sample_rate_hz: f64,
    pub labels: Vec<String>,
    pub normalization: String,
    pub trials: Vec<DlTrialMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_labels: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlExport {
    pub rows: Vec<Vec<f64>>,
    pub metadata: DlMetadata,
}

/// Linear interpolation of `x` onto `len` evenly spaced points spanning the
/// same first-to-last range.
pub fn linear_resample(x: &[f64], len: usize) -> Vec<f64> {
    match (x.len(), len) {
        (_, 0) => Vec::new(),
        (0, _) => Vec::new(),
        (1, _) => vec![x[0]; len],
        (_, 1) => vec![x[0]],
        (n, _) => {
            let step = (n - 1) as f64 / (len - 1) as f64;
            (0..len)
                .map(|i| {
                    let pos = i as f64 * step;
                    let k = (pos.floor() as usize).min(n - 2);
                    let frac = pos - k as f64;
                    x[k] + frac * (x[k + 1] - x[k])
                })
                .collect()
        }
    }
}

fn zscore_row(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (sd > 1e-12 * m.abs().max(1.0)).then(|| x.iter().map(|v| (v - m) / sd).collect())
}

pub fn build_dl_export(
    trials: &[TrialRecord],
    opts: &DlExportOptions,
    fallback_rate_hz: Option<f64>,
) -> Result<DlExport> {
    if trials.is_empty() {
        return Err(Error::InvalidParameter("nothing to export".into()));
    }
    let mut sorted: Vec<&TrialRecord> = trials.iter().collect();
    sorted.sort_by(|a, b| (&a.user_label, a.trial_index).cmp(&(&b.user_label, b.trial_index)));
    let signals = sorted
        .iter()
        .map(|t| t.load_signal(fallback_rate_hz))
        .collect::<Result<Vec<_>>>()?;

    let fs = signals[0].sample_rate_hz();
    if let Some(s) = signals.iter().find(|s| s.sample_rate_hz() != fs) {
        return Err(Error::InvalidParameter(format!(
            "mixed sample rates: {fs} and {} Hz",
            s.sample_rate_hz()
        )));
    }
    let min_len = signals.iter().map(|s| s.len()).min().expect("non-empty");
    let len = opts.signal_len.unwrap_or(min_len);
    if len < 2 {
        return Err(Error::InvalidParameter(format!("signal_len must be at least 2, got {len}")));
    }
    if let Some(p) = &opts.positive_user {
        if !sorted.iter().any(|t| &t.user_label == p) {
            return Err(Error::InvalidParameter(format!("positive user {p} has no trials")));
        }
    }

    let mut rows = Vec::with_capacity(signals.len());
    let mut metas = Vec::with_capacity(signals.len());
    for (t, s) in sorted.iter().zip(&signals) {
        let x = s.samples();
        let (fixed, adjustment) = match x.len() {
            n if n == len => (x.to_vec(), LengthAdjustment::None),
            n if n > len => (x[..len].to_vec(), LengthAdjustment::Truncated),
            _ => (linear_resample(x, len), LengthAdjustment::Resampled),
        };
        let row = zscore_row(&fixed).ok_or(Error::ZeroVariance("exported trial"))?;
        rows.push(row);
        metas.push(DlTrialMeta {
            user_label: t.user_label.clone(),
            trial_index: t.trial_index,
            original_len: x.len(),
            adjustment,
        });
    }

    let binary_labels = opts.positive_user.as_ref().map(|p| {
        sorted
            .iter()
            .map(|t| u8::from(&t.user_label == p))
            .collect()
    });
    Ok(DlExport {
        metadata: DlMetadata {
            n_trials: rows.len(),
            signal_len: len,
            sample_rate_hz: fs,
            labels: sorted.iter().map(|t| t.user_label.clone()).collect(),
            normalization: "zscore".into(),
            trials: metas,
            positive_user: opts.positive_user.clone(),
            binary_labels,
        },
        rows,
    })
}

impl DlExport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut s = String::from("label");
        for i in 0..self.metadata.signal_len {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        for (label, row) in self.metadata.labels.iter().zip(&self.rows) {
            if label.contains([',', '"', '\n']) {
                return Err(Error::InvalidParameter(format!(
                    "user label {label:?} cannot be written to the CSV matrix"
                )));
            }
            s.push_str(label);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        Ok(s)
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metadata)? + "\n")
    }

    /// Writes the matrix to `path` and the metadata next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))?;
        let meta = sidecar_path(path);
        fs::write(&meta, self.metadata_json()?).map_err(|e| Error::io(&meta, e))
    }
}
