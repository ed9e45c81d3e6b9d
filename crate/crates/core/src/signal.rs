//! The uniformly sampled PPG trace and its peak list, plus the CSV/JSON
//! interchange formats.
//!
//! CSV layout: a header `sample_index,intensity` followed by one row per
//! sample. The sample rate lives in a sidecar `<stem>.meta.json` holding
//! `{ "sample_rate_hz": <real> }`. Alternatively a single JSON document
//! `{ "sample_rate_hz": <real>, "samples": [..] }` carries both.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real-valued time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalRepr", into = "SignalRepr")]
pub struct PpgSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    sample_rate_hz: f64,
    samples: Vec<f64>,
}

impl TryFrom<SignalRepr> for PpgSignal {
    type Error = Error;

    fn try_from(r: SignalRepr) -> Result<Self> {
        PpgSignal::new(r.samples, r.sample_rate_hz)
    }
}

impl From<PpgSignal> for SignalRepr {
    fn from(s: PpgSignal) -> Self {
        SignalRepr {
            sample_rate_hz: s.sample_rate_hz,
            samples: s.samples,
        }
    }
}

impl PpgSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite sample at index {i}")));
        }
        Ok(PpgSignal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Same sample rate, new samples. Used by the filters, whose outputs are
    /// finite whenever their inputs are.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> PpgSignal {
        debug_assert_eq!(samples.len(), self.samples.len());
        PpgSignal {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// `a * x + b`, sample-wise.
    pub fn affine(&self, a: f64, b: f64) -> Result<PpgSignal> {
        PpgSignal::new(
            self.samples.iter().map(|v| a * v + b).collect(),
            self.sample_rate_hz,
        )
    }

    /// Writes the CSV form plus its `.meta.json` sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))?;
        let meta = serde_json::to_string_pretty(&SampleRateMeta {
            sample_rate_hz: self.sample_rate_hz,
        })?;
        let meta_path = sidecar_path(path);
        fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(meta_path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 16 + 24);
        out.push_str("sample_index,intensity\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json_string()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Writes JSON when the path ends in `.json`, CSV otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        if is_json(path) {
            self.write_json(path)
        } else {
            self.write_csv(path)
        }
    }

    /// Reads either interchange form. For CSV the sample rate comes from the
    /// sidecar when present, then `fallback_rate_hz`.
    pub fn read(path: &Path, fallback_rate_hz: Option<f64>) -> Result<PpgSignal> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if is_json(path) {
            return Ok(serde_json::from_str(&text)?);
        }
        let meta_path = sidecar_path(path);
        let rate = if meta_path.exists() {
            let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            serde_json::from_str::<SampleRateMeta>(&meta)?.sample_rate_hz
        } else {
            fallback_rate_hz.ok_or_else(|| {
                Error::Format(format!(
                    "no sample rate: {} is missing and none was supplied",
                    meta_path.display()
                ))
            })?
        };
        PpgSignal::from_csv_str(&text, rate)
    }

    pub fn from_csv_str(text: &str, sample_rate_hz: f64) -> Result<PpgSignal> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "sample_index" || &headers[1] != "intensity" {
            return Err(Error::Format(
                "expected CSV header `sample_index,intensity`".into(),
            ));
        }
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let index: usize = rec[0]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad sample_index", row + 1)))?;
            if index != row {
                return Err(Error::Format(format!(
                    "row {}: sample_index {index} out of sequence",
                    row + 1
                )));
            }
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad intensity", row + 1)))?;
            samples.push(v);
        }
        PpgSignal::new(samples, sample_rate_hz)
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRateMeta {
    sample_rate_hz: f64,
}

/// `trace.csv` -> `trace.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Strictly increasing sample indices of detected peaks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakList(Vec<usize>);

impl PeakList {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "peak indices must be strictly increasing".into(),
            ));
        }
        Ok(PeakList(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        PeakList(indices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_signals() {
        assert!(PpgSignal::new(vec![], 14.0).is_err());
        assert!(PpgSignal::new(vec![1.0], 0.0).is_err());
        assert!(PpgSignal::new(vec![1.0, f64::NAN], 14.0).is_err());
    }

    #[test]
    fn csv_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let sig = PpgSignal::new(vec![1.5, -2.0, 3.25], 14.0).unwrap();
        sig.write(&path).unwrap();
        assert!(dir.path().join("trace.meta.json").exists());
        assert_eq!(PpgSignal::read(&path, None).unwrap(), sig);

        let jpath = dir.path().join("trace.json");
        sig.write(&jpath).unwrap();
        assert_eq!(PpgSignal::read(&jpath, None).unwrap(), sig);
    }

    #[test]
    fn csv_without_sidecar_needs_rate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "sample_index,intensity\n0,1\n1,2\n").unwrap();
        assert!(PpgSignal::read(&path, None).is_err());
        let s = PpgSignal::read(&path, Some(10.0)).unwrap();
        assert_eq!(s.samples(), &[1.0, 2.0]);
        assert_eq!(s.sample_rate_hz(), 10.0);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(PpgSignal::from_csv_str("a,b\n0,1\n", 14.0).is_err());
        assert!(PpgSignal::from_csv_str("sample_index,intensity\n0,x\n", 14.0).is_err());
        assert!(PpgSignal::from_csv_str("sample_index,intensity\n1,2\n", 14.0).is_err());
        assert!(PpgSignal::from_csv_str("sample_index,intensity\n", 14.0).is_err());
    }

    #[test]
    fn json_rejects_invalid_rate() {
        let r: std::result::Result<PpgSignal, _> =
            serde_json::from_str(r#"{"sample_rate_hz": -1, "samples": [1]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn peak_list_must_increase() {
        assert!(PeakList::new(vec![1, 1]).is_err());
        assert!(PeakList::new(vec![3, 2]).is_err());
        assert_eq!(PeakList::new(vec![0, 4]).unwrap().len(), 2);
    }
}
