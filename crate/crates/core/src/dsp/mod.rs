//! One-dimensional numeric kernels shared by the heart-rate and Human-ID
//! pipelines. Every function here is a pure function of its inputs.

mod chebyshev;
mod detrend;
mod moving_average;
mod peaks;
mod stats;

pub use chebyshev::{chebyshev_lowpass, Biquad, ChebyshevSettings, SosFilter};
pub use detrend::detrend;
pub use moving_average::moving_average;
pub use peaks::{find_peaks, min_distance_samples, peak_prominences, refine_peak_positions, PeakConfig};
pub use stats::{mean, median, skewness};
