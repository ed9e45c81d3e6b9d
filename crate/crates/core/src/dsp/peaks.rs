use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{PeakList, PpgSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    /// Minimum spacing between retained peaks, seconds.
    pub min_distance_s: f64,
    /// Minimum prominence as a fraction of the signal's peak-to-peak range.
    pub min_prominence_frac: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            min_distance_s: 0.33,
            min_prominence_frac: 0.2,
        }
    }
}

/// `ceil(min_distance_s * fs)`, tolerant of representation error in the
/// product (0.5 s at 14 Hz is 7 samples, not 8).
pub fn min_distance_samples(min_distance_s: f64, sample_rate_hz: f64) -> usize {
    (min_distance_s * sample_rate_hz - 1e-9).ceil().max(0.0) as usize
}

/// Local maxima: strictly above the left neighbour and above the first
/// differing right neighbour. Flat tops resolve to their midpoint (rounded
/// down).
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Topographic prominence of each peak: height above the higher of the two
/// lowest points reached before climbing above the peak on either side.
pub fn peak_prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = x[p];
            let left_min = x[..=p]
                .iter()
                .rev()
                .take_while(|&&v| v <= h)
                .fold(h, |m, &v| m.min(v));
            let right_min = x[p..]
                .iter()
                .take_while(|&&v| v <= h)
                .fold(h, |m, &v| m.min(v));
            h - left_min.max(right_min)
        })
        .collect()
}

pub fn find_peaks(sig: &PpgSignal, min_distance_s: f64, min_prominence_frac: f64) -> Result<PeakList> {
    if !(min_distance_s >= 0.0 && min_distance_s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "min_distance_s must be non-negative, got {min_distance_s}"
        )));
    }
    if !(0.0..=1.0).contains(&min_prominence_frac) {
        return Err(Error::InvalidParameter(format!(
            "min_prominence_frac must lie in [0, 1], got {min_prominence_frac}"
        )));
    }
    let x = sig.samples();
    let mut peaks = local_maxima(x);
    if peaks.is_empty() {
        return Ok(PeakList::default());
    }

    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let floor = min_prominence_frac * (hi - lo);
    let prominences = peak_prominences(x, &peaks);
    peaks = peaks
        .into_iter()
        .zip(prominences)
        .filter(|&(_, p)| p >= floor)
        .map(|(i, _)| i)
        .collect();

    let distance = min_distance_samples(min_distance_s, sig.sample_rate_hz());
    if distance > 1 && peaks.len() > 1 {
        // Highest first; equal heights favour the earlier peak.
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
        let mut keep = vec![true; peaks.len()];
        for &j in &order {
            if !keep[j] {
                continue;
            }
            for k in (0..j).rev() {
                if peaks[j] - peaks[k] >= distance {
                    break;
                }
                keep[k] = false;
            }
            for k in j + 1..peaks.len() {
                if peaks[k] - peaks[j] >= distance {
                    break;
                }
                keep[k] = false;
            }
        }
        peaks = peaks
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
    }
    Ok(PeakList::from_sorted(peaks))
}

/// Sub-sample peak positions from a parabola through each peak and its two
/// neighbours. Peaks on the signal boundary, or without a concave
/// neighbourhood, keep their integer position. Offsets are clamped to half
/// a sample.
pub fn refine_peak_positions(sig: &PpgSignal, peaks: &PeakList) -> Vec<f64> {
    let x = sig.samples();
    peaks
        .indices()
        .iter()
        .map(|&i| {
            if i == 0 || i + 1 >= x.len() {
                return i as f64;
            }
            let (l, c, r) = (x[i - 1], x[i], x[i + 1]);
            let curvature = l - 2.0 * c + r;
            if curvature < 0.0 {
                i as f64 + (0.5 * (l - r) / curvature).clamp(-0.5, 0.5)
            } else {
                i as f64
            }
        })
        .collect()
}
