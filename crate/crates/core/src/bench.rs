//! Fixed, seeded synthetic benchmarks.
//!
//! Each generator returns the synthesis specs only; callers decide whether to
//! run them in memory or write them out as trial files.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::synth::{Morphology, SynthSpec};

pub const HR_BENCH_SEED: u64 = 0x5eed_0001;
pub const HEAVY_NOISE_SEED: u64 = 0x5eed_0002;
pub const AUTH_BENCH_SEED: u64 = 0x5eed_0003;

pub const BENCH_DURATION_S: f64 = 15.0;
pub const HR_RANGE_BPM: (f64, f64) = (55.0, 110.0);

/// Noise level of each of the six draws per morphology in the HR benchmark.
/// The first two are noiseless.
pub const HR_DRAW_NOISE: [f64; 6] = [0.0, 0.0, 0.02, 0.04, 0.06, 0.08];

pub const AUTH_TRIALS_PER_USER: usize = 6;
/// Resting rate of each synthetic user, in preset order.
pub const AUTH_USER_HR_BPM: [f64; 5] = [62.0, 70.0, 78.0, 86.0, 94.0];
pub const AUTH_NOISE_SIGMA: f64 = 0.02;
pub const AUTH_JITTER_FRAC: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub id: String,
    pub user: String,
    /// 1-based trial number within the user.
    pub trial: usize,
    pub spec: SynthSpec,
}

fn mild_drift(rng: &mut SplitMix64) -> Vec<f64> {
    vec![
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.03..0.03),
        rng.random_range(-0.001..0.001),
    ]
}

/// 5 morphologies x 6 draws, HR uniform in 55-110 bpm, mild drift and noise.
pub fn hr_benchmark() -> Vec<BenchCase> {
    let mut rng = SplitMix64::seed_from_u64(HR_BENCH_SEED);
    let mut out = Vec::with_capacity(30);
    for (name, morphology) in Morphology::PRESETS {
        for (d, &noise_sigma) in HR_DRAW_NOISE.iter().enumerate() {
            let spec = SynthSpec {
                hr_bpm: rng.random_range(HR_RANGE_BPM.0..HR_RANGE_BPM.1),
                duration_s: BENCH_DURATION_S,
                morphology,
                drift: mild_drift(&mut rng),
                noise_sigma,
                hr_jitter_frac: 0.02,
                seed: rng.random(),
                ..SynthSpec::default()
            };
            out.push(BenchCase {
                id: format!("{name}-{}", d + 1),
                user: name.to_string(),
                trial: d + 1,
                spec,
            });
        }
    }
    out
}

/// Two draws per morphology with noise_sigma in [0.5, 0.95].
pub fn heavy_noise_benchmark() -> Vec<BenchCase> {
    let mut rng = SplitMix64::seed_from_u64(HEAVY_NOISE_SEED);
    let mut out = Vec::with_capacity(10);
    for (name, morphology) in Morphology::PRESETS {
        for d in 0..2 {
            let spec = SynthSpec {
                hr_bpm: rng.random_range(HR_RANGE_BPM.0..HR_RANGE_BPM.1),
                duration_s: BENCH_DURATION_S,
                morphology,
                drift: mild_drift(&mut rng),
                noise_sigma: rng.random_range(0.5..0.95),
                hr_jitter_frac: 0.02,
                seed: rng.random(),
                ..SynthSpec::default()
            };
            out.push(BenchCase {
                id: format!("{name}-noisy-{}", d + 1),
                user: name.to_string(),
                trial: d + 1,
                spec,
            });
        }
    }
    out
}

/// Five users (one per preset, each with its own resting rate) x six trials.
/// Trials differ in noise realisation, drift and beat jitter.
pub fn auth_benchmark() -> Vec<BenchCase> {
    let mut rng = SplitMix64::seed_from_u64(AUTH_BENCH_SEED);
    let mut out = Vec::with_capacity(30);
    for (u, (_, morphology)) in Morphology::PRESETS.into_iter().enumerate() {
        for t in 1..=AUTH_TRIALS_PER_USER {
            let spec = SynthSpec {
                hr_bpm: AUTH_USER_HR_BPM[u],
                duration_s: BENCH_DURATION_S,
                morphology,
                drift: mild_drift(&mut rng),
                noise_sigma: AUTH_NOISE_SIGMA,
                hr_jitter_frac: AUTH_JITTER_FRAC,
                seed: rng.random(),
                ..SynthSpec::default()
            };
            out.push(BenchCase {
                id: format!("user{}-trial{t}", u + 1),
                user: format!("user{}", u + 1),
                trial: t,
                spec,
            });
        }
    }
    out
}
