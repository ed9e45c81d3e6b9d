//! Synthetic PPG traces and frame sequences with known ground truth.
//!
//! Each beat is a Gaussian systolic peak of unit height followed by a
//! smaller Gaussian dicrotic bump. Beat `k + 1` follows beat `k` by
//! `T * (1 + j * u_k)` where `T = 60 / hr_bpm`, `j = hr_jitter_frac` and
//! `u_k` is uniform on [-1, 1]; the first beat sits at `T / 2`. On top of
//! the pulses come a polynomial drift `sum_i drift[i] * t^i` (t in seconds)
//! and white Gaussian noise of standard deviation `noise_sigma`.
//!
//! Randomness comes from SplitMix64 seeded with `seed`. Jitter draws are
//! taken first (one per beat interval, `u = 2 * (next_u64 >> 11) / 2^53 - 1`),
//! then one standard normal per sample, so output is reproducible across
//! platforms for a given dependency lock.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{FrameSequence, DEFAULT_FRAME_RATE_HZ};
use crate::signal::{PeakList, PpgSignal};

/// Pulse shape, all lengths as fractions of the beat period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morphology {
    /// Standard deviation of the systolic Gaussian.
    pub systolic_width_frac: f64,
    /// Dicrotic bump height relative to the systolic peak.
    pub dicrotic_amplitude_frac: f64,
    /// Delay from systolic to dicrotic peak.
    pub dicrotic_delay_frac: f64,
}

impl Morphology {
    /// Named presets used as synthetic "users".
    pub const PRESETS: [(&'static str, Morphology); 5] = [
        (
            "narrow",
            Morphology {
                systolic_width_frac: 0.07,
                dicrotic_amplitude_frac: 0.15,
                dicrotic_delay_frac: 0.30,
            },
        ),
        (
            "notched",
            Morphology {
                systolic_width_frac: 0.09,
                dicrotic_amplitude_frac: 0.30,
                dicrotic_delay_frac: 0.36,
            },
        ),
        (
            "rounded",
            Morphology {
                systolic_width_frac: 0.13,
                dicrotic_amplitude_frac: 0.25,
                dicrotic_delay_frac: 0.40,
            },
        ),
        (
            "broad",
            Morphology {
                systolic_width_frac: 0.18,
                dicrotic_amplitude_frac: 0.10,
                dicrotic_delay_frac: 0.45,
            },
        ),
        (
            "late-wave",
            Morphology {
                systolic_width_frac: 0.11,
                dicrotic_amplitude_frac: 0.22,
                dicrotic_delay_frac: 0.46,
            },
        ),
    ];

    pub fn preset(name: &str) -> Option<Morphology> {
        Self::PRESETS.iter().find(|(n, _)| *n == name).map(|(_, m)| *m)
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        Self::PRESETS.iter().map(|(n, _)| *n)
    }
}

impl Default for Morphology {
    fn default() -> Self {
        Self::PRESETS[2].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub hr_bpm: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub morphology: Morphology,
    pub drift: Vec<f64>,
    /// Noise standard deviation as a fraction of the pulse amplitude.
    pub noise_sigma: f64,
    pub hr_jitter_frac: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            hr_bpm: 75.0,
            duration_s: 15.0,
            sample_rate_hz: DEFAULT_FRAME_RATE_HZ,
            morphology: Morphology::default(),
            drift: Vec::new(),
            noise_sigma: 0.0,
            hr_jitter_frac: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.hr_bpm > 20.0 && self.hr_bpm < 240.0) {
            return bad(format!("hr_bpm must lie in (20, 240), got {}", self.hr_bpm));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.hr_jitter_frac) {
            return bad(format!("hr_jitter_frac must lie in [0, 1), got {}", self.hr_jitter_frac));
        }
        let m = &self.morphology;
        if !(m.systolic_width_frac > 0.0 && m.dicrotic_amplitude_frac >= 0.0 && m.dicrotic_delay_frac >= 0.0) {
            return bad("morphology fractions must be non-negative, systolic width positive".into());
        }
        if self.drift.iter().any(|c| !c.is_finite()) {
            return bad("drift coefficients must be finite".into());
        }
        if (self.duration_s * self.sample_rate_hz).round() < 1.0 {
            return bad("spec yields no samples".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGroundTruth {
    /// Mean rate of the generated beats, `60 * (k - 1) / (t_last - t_first)`;
    /// the nominal rate when fewer than two beats fit.
    pub true_hr_bpm: f64,
    /// Sample index nearest each beat's systolic peak.
    pub beat_peak_indices: PeakList,
    /// Exact beat times in seconds.
    pub beat_times_s: Vec<f64>,
}

fn unit_uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn synth_ppg(spec: &SynthSpec) -> Result<(PpgSignal, SynthGroundTruth)> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let period = 60.0 / spec.hr_bpm;
    let mut rng = SplitMix64::seed_from_u64(spec.seed);

    let mut beats = Vec::new();
    let mut t = period / 2.0;
    let end = n as f64 / fs;
    while t < end {
        beats.push(t);
        let u = 2.0 * unit_uniform(&mut rng) - 1.0;
        t += period * (1.0 + spec.hr_jitter_frac * u);
    }

    let m = spec.morphology;
    let sys_sigma = m.systolic_width_frac * period;
    let dic_delay = m.dicrotic_delay_frac * period;
    let gauss = |dt: f64| (-0.5 * (dt / sys_sigma).powi(2)).exp();

    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let ti = i as f64 / fs;
            let pulses: f64 = beats
                .iter()
                .map(|&b| gauss(ti - b) + m.dicrotic_amplitude_frac * gauss(ti - b - dic_delay))
                .sum();
            let drift: f64 = spec
                .drift
                .iter()
                .enumerate()
                .map(|(k, c)| c * ti.powi(k as i32))
                .sum();
            pulses + drift
        })
        .collect();

    let samples = if spec.noise_sigma > 0.0 {
        samples
            .into_iter()
            .map(|v| {
                let z: f64 = rng.sample(StandardNormal);
                v + spec.noise_sigma * z
            })
            .collect()
    } else {
        samples
    };

    let mut indices: Vec<usize> = beats
        .iter()
        .map(|b| (b * fs).round() as usize)
        .filter(|&i| i < n)
        .collect();
    indices.dedup();
    let true_hr_bpm = match (beats.first(), beats.last()) {
        (Some(first), Some(last)) if beats.len() >= 2 => 60.0 * (beats.len() - 1) as f64 / (last - first),
        _ => spec.hr_bpm,
    };

    let signal = PpgSignal::new(samples, fs)?;
    Ok((
        signal,
        SynthGroundTruth {
            true_hr_bpm,
            beat_peak_indices: PeakList::new(indices)?,
            beat_times_s: beats,
        },
    ))
}

/// Renders each sample as a near-uniform frame whose total intensity is an
/// affine image of the sample: the sample's position in `[min, max]` scales
/// the total between 0 and `pixels * maxval`, rounded to an integer and
/// spread as evenly as possible over the pixels (no two pixels differ by more
/// than one level). A constant signal renders at half scale.
pub fn synth_frames(sig: &PpgSignal, width: u32, height: u32, bit_depth: u8) -> Result<FrameSequence> {
    let px = width as u64 * height as u64;
    if px == 0 {
        return Err(Error::InvalidParameter(format!("degenerate frame size {width}x{height}")));
    }
    let maxval: u64 = match bit_depth {
        8 => 255,
        16 => 65535,
        d => return Err(Error::UnsupportedBitDepth(d as u32)),
    };
    let x = sig.samples();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let full = (px * maxval) as f64;
    let frames = x
        .iter()
        .map(|&v| {
            let frac = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let total = (frac * full).round() as u64;
            let (base, extra) = (total / px, total % px);
            // Pixel i gets one extra level when floor((i+1)*extra/px) steps.
            (0..px)
                .map(|i| {
                    let bump = ((i + 1) * extra / px) - (i * extra / px);
                    (base + bump) as u16
                })
                .collect()
        })
        .collect();
    FrameSequence::new(frames, width, height, bit_depth, sig.sample_rate_hz())
}

/// Continuous-time value of the noiseless pulse train, for oracles.
pub fn pulse_value(spec: &SynthSpec, beats: &[f64], t: f64) -> f64 {
    let period = 60.0 / spec.hr_bpm;
    let m = spec.morphology;
    let sigma = m.systolic_width_frac * period;
    let g = |dt: f64| (-0.5 * (dt / sigma).powi(2)).exp();
    beats
        .iter()
        .map(|&b| g(t - b) + m.dicrotic_amplitude_frac * g(t - b - m.dicrotic_delay_frac * period))
        .sum()
}

/// Pure sinusoid helper used by filter checks.
pub fn sinusoid(freq_hz: f64, amplitude: f64, n: usize, sample_rate_hz: f64) -> Result<PpgSignal> {
    PpgSignal::new(
        (0..n)
            .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sample_rate_hz).sin())
            .collect(),
        sample_rate_hz,
    )
}
