//! Pulse-wave "Human ID" templates and verification.
//!
//! Enrollment: detrend, low-pass with an order-2 Chebyshev type I filter,
//! pick peaks, cut a `2 * half_width + 1` sample wave around every peak that
//! is far enough from the ends, average the waves, cross-correlate each
//! z-scored wave with the z-scored mean wave over all lags, and take the
//! per-lag minimum across waves. That minimum curve is the ID signal; its
//! maximum is the representative value.
//!
//! Verification runs the same pipeline on the probe and accepts when the two
//! representative values differ by at most `threshold_frac * |baseline|`.

use serde::{Deserialize, Serialize};

use crate::dsp::{chebyshev_lowpass, detrend, find_peaks, ChebyshevSettings, PeakConfig};
use crate::error::{Error, Result};
use crate::signal::{PeakList, PpgSignal};

pub const TEMPLATE_FORMAT_VERSION: u32 = 1;
pub const MIN_WAVES: usize = 3;
const DETREND_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    samples: Vec<f64>,
    center_peak_index: usize,
}

impl Wave {
    pub fn new(samples: Vec<f64>, center_peak_index: usize) -> Self {
        Wave {
            samples,
            center_peak_index,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn center_peak_index(&self) -> usize {
        self.center_peak_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Which side of the threshold counts as a match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptRule {
    /// Accept when `|probe - baseline| <= threshold`.
    #[default]
    WithinThreshold,
    /// Accept when the difference exceeds the threshold.
    BeyondThreshold,
}

impl AcceptRule {
    fn is_default(&self) -> bool {
        *self == AcceptRule::WithinThreshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanIdConfig {
    pub half_width: usize,
    pub threshold_frac: f64,
    pub filter: ChebyshevSettings,
    #[serde(default, skip_serializing_if = "AcceptRule::is_default")]
    pub accept_rule: AcceptRule,
}

impl Default for HumanIdConfig {
    fn default() -> Self {
        HumanIdConfig {
            half_width: 5,
            threshold_frac: 0.1,
            filter: ChebyshevSettings::with_order(2),
            accept_rule: AcceptRule::WithinThreshold,
        }
    }
}

impl HumanIdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_width == 0 {
            return Err(Error::InvalidParameter("half_width must be at least 1".into()));
        }
        if !(self.threshold_frac > 0.0 && self.threshold_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold_frac must lie in (0, 1), got {}",
                self.threshold_frac
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanIdTemplate {
    pub user_label: String,
    pub representative_value: f64,
    pub id_signal: Vec<f64>,
    pub config: HumanIdConfig,
    pub format_version: u32,
}

impl HumanIdTemplate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses and checks a serialized template.
    pub fn from_json(text: &str) -> Result<Self> {
        let t: HumanIdTemplate =
            serde_json::from_str(text).map_err(|e| Error::InvalidTemplate(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidTemplate(m));
        if self.format_version != TEMPLATE_FORMAT_VERSION {
            return invalid(format!("unsupported format_version {}", self.format_version));
        }
        self.config
            .validate()
            .map_err(|e| Error::InvalidTemplate(e.to_string()))?;
        let expected = 2 * (2 * self.config.half_width + 1) - 1;
        if self.id_signal.len() != expected {
            return invalid(format!(
                "id_signal has {} lags, half_width {} implies {expected}",
                self.id_signal.len(),
                self.config.half_width
            ));
        }
        let max = self.id_signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max != self.representative_value {
            return invalid("representative_value is not the id_signal maximum".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthOutcome {
    Accepted,
    Rejected,
    /// The probe could not be turned into an ID signal.
    Untemplateable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision {
    pub accepted: bool,
    pub outcome: AuthOutcome,
    pub probe_value: Option<f64>,
    pub baseline_value: f64,
    pub abs_difference: Option<f64>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Waves centered on every peak at least `half_width` samples from both
/// ends, in peak order.
pub fn extract_waves(sig: &PpgSignal, peaks: &PeakList, half_width: usize) -> Result<Vec<Wave>> {
    if half_width == 0 {
        return Err(Error::InvalidParameter("half_width must be at least 1".into()));
    }
    let x = sig.samples();
    Ok(peaks
        .indices()
        .iter()
        .filter(|&&p| p >= half_width && p + half_width < x.len())
        .map(|&p| Wave::new(x[p - half_width..=p + half_width].to_vec(), p))
        .collect())
}

pub fn mean_wave(waves: &[Wave]) -> Result<Wave> {
    let first = waves
        .first()
        .ok_or(Error::TooFewWaves { found: 0, needed: 1 })?;
    let len = first.len();
    if waves.iter().any(|w| w.len() != len) {
        return Err(Error::InvalidParameter("waves differ in length".into()));
    }
    let mut acc = vec![0.0; len];
    for w in waves {
        for (a, v) in acc.iter_mut().zip(&w.samples) {
            *a += v;
        }
    }
    let n = waves.len() as f64;
    Ok(Wave::new(acc.into_iter().map(|v| v / n).collect(), first.center_peak_index))
}

/// Zero mean, unit (population) variance.
fn zscore(x: &[f64], what: &'static str) -> Result<Vec<f64>> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if var.is_nan() || var <= 1e-24 * (1.0 + m * m) {
        return Err(Error::ZeroVariance(what));
    }
    let sd = var.sqrt();
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// Full cross-correlation of `a` against `b`, `c[k] = sum_n a[n + k] * b[n]`
/// for `k = -(L-1) ..= L-1`, stored at index `k + L - 1`.
fn cross_correlate(a: &[f64], b: &[f64]) -> Vec<f64> {
    let l = a.len();
    (0..2 * l - 1)
        .map(|j| {
            let lag = j as isize - (l as isize - 1);
            if lag >= 0 {
                let k = lag as usize;
                a[k..].iter().zip(&b[..l - k]).map(|(x, y)| x * y).sum()
            } else {
                let k = (-lag) as usize;
                a[..l - k].iter().zip(&b[k..]).map(|(x, y)| x * y).sum()
            }
        })
        .collect()
}

/// One row per wave: the full cross-correlation of the z-scored wave with
/// the z-scored mean wave. For z-scored length-`L` inputs every entry lies
/// in `[-L, L]`.
pub fn wave_correlations(waves: &[Wave], mean: &Wave) -> Result<Vec<Vec<f64>>> {
    if waves.is_empty() {
        return Err(Error::TooFewWaves { found: 0, needed: 1 });
    }
    let m = zscore(mean.samples(), "mean wave")?;
    waves
        .iter()
        .map(|w| {
            if w.len() != m.len() {
                return Err(Error::InvalidParameter("wave and mean differ in length".into()));
            }
            Ok(cross_correlate(&zscore(w.samples(), "wave")?, &m))
        })
        .collect()
}

/// Per-lag minimum over all rows.
pub fn human_id_signal(corr: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = corr.first() else {
        return Vec::new();
    };
    corr[1..].iter().fold(first.clone(), |mut acc, row| {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = a.min(v);
        }
        acc
    })
}

/// The enrollment pipeline up to the ID signal. Returns the waves too, for
/// inspection.
pub fn id_signal_for(sig: &PpgSignal, config: &HumanIdConfig) -> Result<(Vec<f64>, Vec<Wave>)> {
    config.validate()?;
    let clean = detrend(sig, DETREND_ORDER)?;
    let f = config.filter;
    let filtered = chebyshev_lowpass(&clean, f.order, f.cutoff_hz, f.ripple_db)?;
    let pk = PeakConfig::default();
    let peaks = find_peaks(&filtered, pk.min_distance_s, pk.min_prominence_frac)?;
    let waves = extract_waves(&filtered, &peaks, config.half_width)?;
    if waves.len() < MIN_WAVES {
        return Err(Error::TooFewWaves {
            found: waves.len(),
            needed: MIN_WAVES,
        });
    }
    let mean = mean_wave(&waves)?;
    let corr = wave_correlations(&waves, &mean)?;
    Ok((human_id_signal(&corr), waves))
}

pub fn enroll(sig: &PpgSignal, user_label: &str, config: &HumanIdConfig) -> Result<HumanIdTemplate> {
    let (id_signal, _) = id_signal_for(sig, config)?;
    let representative_value = id_signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HumanIdTemplate {
        user_label: user_label.to_string(),
        representative_value,
        id_signal,
        config: config.clone(),
        format_version: TEMPLATE_FORMAT_VERSION,
    })
}

/// Representative value of `sig` under `config`.
pub fn representative_value(sig: &PpgSignal, config: &HumanIdConfig) -> Result<f64> {
    Ok(enroll(sig, "", config)?.representative_value)
}

/// Decision for an already computed probe value.
pub fn decide(baseline_value: f64, probe_value: f64, threshold_frac: f64, rule: AcceptRule) -> AuthDecision {
    let threshold = threshold_frac * baseline_value.abs();
    let diff = (probe_value - baseline_value).abs();
    let accepted = match rule {
        AcceptRule::WithinThreshold => diff <= threshold,
        AcceptRule::BeyondThreshold => diff > threshold,
    };
    AuthDecision {
        accepted,
        outcome: if accepted {
            AuthOutcome::Accepted
        } else {
            AuthOutcome::Rejected
        },
        probe_value: Some(probe_value),
        baseline_value,
        abs_difference: Some(diff),
        threshold,
        reason: None,
    }
}

/// Verifies `probe` against `template`. A probe the pipeline cannot template
/// yields an `Untemplateable` rejection; other errors propagate.
pub fn verify(template: &HumanIdTemplate, probe: &PpgSignal) -> Result<AuthDecision> {
    let cfg = &template.config;
    match representative_value(probe, cfg) {
        Ok(v) => Ok(decide(template.representative_value, v, cfg.threshold_frac, cfg.accept_rule)),
        Err(e) if is_untemplateable(&e) => Ok(AuthDecision {
            accepted: false,
            outcome: AuthOutcome::Untemplateable,
            probe_value: None,
            baseline_value: template.representative_value,
            abs_difference: None,
            threshold: cfg.threshold_frac * template.representative_value.abs(),
            reason: Some(format!("rejected: untemplateable ({e})")),
        }),
        Err(e) => Err(e),
    }
}

pub(crate) fn is_untemplateable(e: &Error) -> bool {
    matches!(
        e,
        Error::TooFewWaves { .. } | Error::ZeroVariance(_) | Error::Underdetermined { .. } | Error::InsufficientPeaks { .. }
    )
}

/// `|probe - baseline| / |baseline|`, the quantity compared against
/// `threshold_frac`.
pub fn relative_difference(baseline_value: f64, probe_value: f64) -> f64 {
    (probe_value - baseline_value).abs() / baseline_value.abs()
}

/// Threshold grid swept by [`choose_threshold`]: 0.01 to 0.50 in steps of
/// 0.01.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=50).map(|k| k as f64 / 100.0)
}

/// Picks the grid threshold maximizing `TP - FP`, where a score (relative
/// difference) at or below the threshold counts as accepted. Ties go to the
/// smaller threshold.
pub fn choose_threshold(genuine_scores: &[f64], impostor_scores: &[f64]) -> Result<f64> {
    if genuine_scores.is_empty() || impostor_scores.is_empty() {
        return Err(Error::InvalidParameter(
            "threshold selection needs genuine and impostor scores".into(),
        ));
    }
    let mut best = (i64::MIN, 0.0);
    for t in threshold_grid() {
        let tp = genuine_scores.iter().filter(|&&s| s <= t).count() as i64;
        let fp = impostor_scores.iter().filter(|&&s| s <= t).count() as i64;
        if tp - fp > best.0 {
            best = (tp - fp, t);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ramp(n: usize) -> PpgSignal {
        PpgSignal::new((0..n).map(|i| i as f64).collect(), 14.0).unwrap()
    }

    #[test]
    fn edge_peaks_dropped() {
        let p = PeakList::new(vec![1, 10, 19]).unwrap();
        let w = extract_waves(&ramp(20), &p, 3).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].center_peak_index(), 10);
        assert_eq!(w[0].samples(), &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0]);
    }

    #[test]
    fn window_bounds() {
        let p = PeakList::new(vec![5]).unwrap();
        let w = extract_waves(&ramp(20), &p, 2).unwrap();
        assert_eq!(w[0].samples(), &[3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(extract_waves(&ramp(20), &PeakList::default(), 2).unwrap().is_empty());
        assert!(extract_waves(&ramp(20), &p, 0).is_err());
        // Exactly half_width from either end is still valid.
        let p = PeakList::new(vec![2, 17]).unwrap();
        assert_eq!(extract_waves(&ramp(20), &p, 2).unwrap().len(), 2);
    }

    #[test]
    fn pointwise_mean() {
        let a = Wave::new(vec![0.0, 1.0, 0.0], 1);
        let b = Wave::new(vec![0.0, 3.0, 0.0], 5);
        assert_eq!(mean_wave(&[a.clone(), b]).unwrap().samples(), &[0.0, 2.0, 0.0]);
        assert_eq!(mean_wave(&[a.clone(), a.clone()]).unwrap().samples(), a.samples());
        assert!(mean_wave(&[]).is_err());
    }

    #[test]
    fn self_correlation_peaks_at_zero_lag() {
        let w = Wave::new(vec![0.1, 0.5, 2.0, 0.7, 0.2], 2);
        let rows = wave_correlations(std::slice::from_ref(&w), &w).unwrap();
        let row = &rows[0];
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 4);
        assert_abs_diff_eq!(row[4], 5.0, epsilon = 1e-12);

        let neg = Wave::new(w.samples().iter().map(|v| -v).collect(), 2);
        let rows = wave_correlations(&[neg], &w).unwrap();
        assert_abs_diff_eq!(rows[0][4], -5.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_wave_rejected() {
        let flat = Wave::new(vec![1.0; 5], 2);
        let w = Wave::new(vec![0.0, 1.0, 2.0, 1.0, 0.0], 2);
        assert!(matches!(wave_correlations(std::slice::from_ref(&flat), &w), Err(Error::ZeroVariance(_))));
        assert!(matches!(wave_correlations(&[w], &flat), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn column_minimum() {
        assert_eq!(human_id_signal(&[vec![1.0, 2.0], vec![2.0, 1.0]]), vec![1.0, 1.0]);
        assert_eq!(human_id_signal(&[vec![3.0, -1.0, 2.0]]), vec![3.0, -1.0, 2.0]);
        assert!(human_id_signal(&[]).is_empty());
    }

    #[test]
    fn decision_rule() {
        let d = decide(10.0, 10.5, 0.1, AcceptRule::WithinThreshold);
        assert!(d.accepted);
        assert_eq!(d.threshold, 1.0);
        assert_eq!(d.abs_difference, Some(0.5));
        // Boundary is inclusive.
        assert!(decide(10.0, 11.0, 0.1, AcceptRule::WithinThreshold).accepted);
        assert!(!decide(10.0, 11.5, 0.1, AcceptRule::WithinThreshold).accepted);
        assert!(decide(10.0, 11.5, 0.1, AcceptRule::BeyondThreshold).accepted);
        assert!(!decide(-10.0, -10.5, 0.01, AcceptRule::WithinThreshold).accepted);
        assert_eq!(decide(-10.0, -10.5, 0.01, AcceptRule::WithinThreshold).threshold, 0.1);
    }

    #[test]
    fn threshold_selection() {
        // Separable: genuine at or below 0.03, impostors from 0.2 upward.
        let g = [0.0, 0.01, 0.03];
        let i = [0.2, 0.3, 0.45];
        assert_eq!(choose_threshold(&g, &i).unwrap(), 0.03);
        // Identical distributions: TP - FP is always zero.
        assert_eq!(choose_threshold(&g, &g).unwrap(), 0.01);
        assert!(choose_threshold(&[], &i).is_err());
        assert!(choose_threshold(&g, &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = HumanIdConfig::default();
        assert!(c.validate().is_ok());
        c.threshold_frac = 1.0;
        assert!(c.validate().is_err());
        c.threshold_frac = 0.1;
        c.half_width = 0;
        assert!(c.validate().is_err());
    }
}
