//! Heart-rate estimation from a PPG trace.
//!
//! Two estimators share the same final step, `60 / median inter-peak
//! interval`:
//!
//! * **basic**: detrend, zero-phase Chebyshev type I low-pass (order 6),
//!   peak picking;
//! * **ensemble**: five centered moving averages of orders 2 through 6, one
//!   rate per branch, and a quality gate on the skewness of the pooled
//!   inter-peak intervals. A regular capture (`|skewness| < 0.13`) reports
//!   the mean of the branch rates; an irregular one reports the order-2
//!   branch alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{
    chebyshev_lowpass, detrend, find_peaks, median, moving_average, refine_peak_positions, skewness,
    ChebyshevSettings, PeakConfig,
};
use crate::error::{Error, Result};
use crate::signal::{PeakList, PpgSignal};

pub const ENSEMBLE_ORDERS: [usize; 5] = [2, 3, 4, 5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrMethod {
    Basic,
    Ensemble,
}

impl std::fmt::Display for HrMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HrMethod::Basic => "basic",
            HrMethod::Ensemble => "ensemble",
        })
    }
}

impl std::str::FromStr for HrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(HrMethod::Basic),
            "ensemble" => Ok(HrMethod::Ensemble),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsConfig {
    pub detrend_order: usize,
    pub lowpass: ChebyshevSettings,
    pub peaks: PeakConfig,
    pub skew_threshold: f64,
    /// Timing resolution, in samples, below which interval spread is treated
    /// as quantization rather than irregularity when computing the gate's
    /// skewness.
    pub skew_resolution_samples: f64,
    pub min_duration_s: f64,
}

impl Default for VitalsConfig {
    fn default() -> Self {
        VitalsConfig {
            detrend_order: 2,
            lowpass: ChebyshevSettings::with_order(6),
            peaks: PeakConfig::default(),
            skew_threshold: 0.13,
            skew_resolution_samples: 1.0,
            min_duration_s: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartRateEstimate {
    pub bpm: f64,
    pub method: HrMethod,
    /// Ensemble only: one entry per moving-average order 2..=6, `None` where
    /// the branch found fewer than two peaks.
    pub per_filter_bpm: Option<Vec<Option<f64>>>,
    pub skewness: Option<f64>,
    pub quality_good: Option<bool>,
    pub peak_count: usize,
}

/// `60 / median(inter-peak interval)` on integer peak positions.
pub fn heart_rate_from_peaks(peaks: &PeakList, sample_rate_hz: f64) -> Result<f64> {
    let positions: Vec<f64> = peaks.indices().iter().map(|&i| i as f64).collect();
    heart_rate_from_positions(&positions, sample_rate_hz)
}

/// Same as [`heart_rate_from_peaks`] with each peak first refined to
/// sub-sample precision on `sig`.
pub fn heart_rate_from_signal_peaks(sig: &PpgSignal, peaks: &PeakList) -> Result<f64> {
    heart_rate_from_positions(&refine_peak_positions(sig, peaks), sig.sample_rate_hz())
}

pub fn heart_rate_from_positions(positions: &[f64], sample_rate_hz: f64) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::InsufficientPeaks {
            found: positions.len(),
            needed: 2,
        });
    }
    let intervals: Vec<f64> = positions
        .windows(2)
        .map(|w| (w[1] - w[0]) / sample_rate_hz)
        .collect();
    let m = median(&intervals).expect("at least one interval");
    Ok(60.0 / m)
}

pub fn percent_error(estimate_bpm: f64, ground_truth_bpm: f64) -> Result<f64> {
    if ground_truth_bpm.is_nan() || ground_truth_bpm <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ground truth must be positive, got {ground_truth_bpm}"
        )));
    }
    Ok(100.0 * (estimate_bpm - ground_truth_bpm).abs() / ground_truth_bpm)
}

fn check_duration(sig: &PpgSignal, cfg: &VitalsConfig) -> Result<()> {
    if sig.duration_s() < cfg.min_duration_s {
        return Err(Error::SignalTooShort(format!(
            "{:.2} s captured, need at least {} s",
            sig.duration_s(),
            cfg.min_duration_s
        )));
    }
    Ok(())
}

pub fn estimate_heart_rate_basic(sig: &PpgSignal, cfg: &VitalsConfig) -> Result<HeartRateEstimate> {
    check_duration(sig, cfg)?;
    let clean = detrend(sig, cfg.detrend_order)?;
    let lp = cfg.lowpass;
    let filtered = chebyshev_lowpass(&clean, lp.order, lp.cutoff_hz, lp.ripple_db)?;
    let peaks = find_peaks(&filtered, cfg.peaks.min_distance_s, cfg.peaks.min_prominence_frac)?;
    let bpm = heart_rate_from_signal_peaks(&filtered, &peaks)?;
    Ok(HeartRateEstimate {
        bpm,
        method: HrMethod::Basic,
        per_filter_bpm: None,
        skewness: None,
        quality_good: None,
        peak_count: peaks.len(),
    })
}

struct Branch {
    bpm: f64,
    peak_count: usize,
    intervals: Vec<f64>,
}

fn ensemble_branch(clean: &PpgSignal, order: usize, cfg: &VitalsConfig) -> Result<Branch> {
    let smoothed = moving_average(clean, order)?;
    let peaks = find_peaks(&smoothed, cfg.peaks.min_distance_s, cfg.peaks.min_prominence_frac)?;
    let positions = refine_peak_positions(&smoothed, &peaks);
    let bpm = heart_rate_from_positions(&positions, clean.sample_rate_hz())?;
    let intervals = positions
        .windows(2)
        .map(|w| (w[1] - w[0]) / clean.sample_rate_hz())
        .collect();
    Ok(Branch {
        bpm,
        peak_count: peaks.len(),
        intervals,
    })
}

/// Skewness of the pooled intervals with the spread floored at the timing
/// resolution: `G1 * (s / max(s, r))^3`. Zero spread reads as perfectly
/// regular.
fn gate_skewness(intervals: &[f64], resolution_s: f64) -> Option<f64> {
    if intervals.len() < 3 {
        return None;
    }
    let n = intervals.len() as f64;
    let m = intervals.iter().sum::<f64>() / n;
    let s = (intervals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    match skewness(intervals) {
        Ok(g) => {
            let shrink = if s < resolution_s { (s / resolution_s).powi(3) } else { 1.0 };
            Some(g * shrink)
        }
        Err(Error::ZeroVariance(_)) => Some(0.0),
        Err(_) => None,
    }
}

pub fn estimate_heart_rate_ensemble(sig: &PpgSignal, cfg: &VitalsConfig) -> Result<HeartRateEstimate> {
    check_duration(sig, cfg)?;
    let clean = detrend(sig, cfg.detrend_order)?;
    let branches: Vec<Option<Branch>> = ENSEMBLE_ORDERS
        .par_iter()
        .map(|&order| match ensemble_branch(&clean, order, cfg) {
            Ok(b) => Ok(Some(b)),
            Err(Error::InsufficientPeaks { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let per_filter_bpm: Vec<Option<f64>> = branches.iter().map(|b| b.as_ref().map(|b| b.bpm)).collect();
    let ok: Vec<&Branch> = branches.iter().flatten().collect();
    let Some(first_ok) = ok.first() else {
        return Err(Error::InsufficientPeaks { found: 0, needed: 2 });
    };

    let pooled: Vec<f64> = ok.iter().flat_map(|b| b.intervals.iter().copied()).collect();
    let resolution = cfg.skew_resolution_samples / sig.sample_rate_hz();
    let skew = gate_skewness(&pooled, resolution);
    let quality_good = skew.is_some_and(|s| s.abs() < cfg.skew_threshold);

    // The order-2 branch, or the lowest order that produced a rate.
    let primary = branches[0].as_ref().unwrap_or(first_ok);
    let bpm = if quality_good {
        ok.iter().map(|b| b.bpm).sum::<f64>() / ok.len() as f64
    } else {
        primary.bpm
    };

    Ok(HeartRateEstimate {
        bpm,
        method: HrMethod::Ensemble,
        per_filter_bpm: Some(per_filter_bpm),
        skewness: skew,
        quality_good: Some(quality_good),
        peak_count: primary.peak_count,
    })
}

pub fn estimate_heart_rate(sig: &PpgSignal, method: HrMethod, cfg: &VitalsConfig) -> Result<HeartRateEstimate> {
    match method {
        HrMethod::Basic => estimate_heart_rate_basic(sig, cfg),
        HrMethod::Ensemble => estimate_heart_rate_ensemble(sig, cfg),
    }
}
