//! Chebyshev type I low-pass design (bilinear transform with a prewarped
//! analog prototype) and zero-phase second-order-section filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::PpgSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevSettings {
    pub order: usize,
    pub cutoff_hz: f64,
    pub ripple_db: f64,
}

impl ChebyshevSettings {
    pub const DEFAULT_CUTOFF_HZ: f64 = 3.0;
    pub const DEFAULT_RIPPLE_DB: f64 = 0.5;

    pub fn with_order(order: usize) -> Self {
        ChebyshevSettings {
            order,
            cutoff_hz: Self::DEFAULT_CUTOFF_HZ,
            ripple_db: Self::DEFAULT_RIPPLE_DB,
        }
    }
}

/// One second-order section, `a0` normalized to 1, transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Delay-line state that makes a unit step look like it has always been
    /// applied.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    /// Type I low-pass. The passband edge (end of the ripple band) sits at
    /// `cutoff_hz`; each section is scaled to unit DC gain.
    pub fn chebyshev1_lowpass(
        order: usize,
        cutoff_hz: f64,
        ripple_db: f64,
        sample_rate_hz: f64,
    ) -> Result<SosFilter> {
        if order == 0 {
            return Err(Error::InvalidParameter("filter order must be at least 1".into()));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        if !(ripple_db > 0.0 && ripple_db.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "passband ripple must be positive, got {ripple_db} dB"
            )));
        }

        let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
        let mu = (1.0 / eps).asinh() / order as f64;
        let warped = (PI * cutoff_hz / sample_rate_hz).tan();

        let to_z = |k: usize| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            let s = Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos()) * warped;
            (1.0 + s) / (1.0 - s)
        };

        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 0..order / 2 {
            let p = to_z(k);
            let a = [-2.0 * p.re, p.norm_sqr()];
            let g = (1.0 + a[0] + a[1]) / 4.0;
            sections.push(Biquad {
                b: [g, 2.0 * g, g],
                a,
            });
        }
        if order % 2 == 1 {
            let p = to_z(order / 2).re;
            let a = [-p, 0.0];
            let g = (1.0 + a[0]) / 2.0;
            sections.push(Biquad {
                b: [g, g, 0.0],
                a,
            });
        }
        Ok(SosFilter { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm()
    }

    /// Causal filtering. `initial` scales the step steady state of every
    /// section; zero gives a cold start.
    pub fn filter(&self, x: &[f64], initial: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut level = initial;
        for s in &self.sections {
            let [mut z1, mut z2] = s.step_state().map(|v| v * level);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
            level *= s.dc_gain();
        }
        y
    }

    /// Forward-backward filtering with odd-reflection padding and
    /// steady-state initial conditions. Net phase is zero and the magnitude
    /// response is squared.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let padlen = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut fwd = self.filter(&ext, ext[0]);
        fwd.reverse();
        let mut back = self.filter(&fwd, fwd[0]);
        back.reverse();
        back[padlen..padlen + n].to_vec()
    }
}

/// Zero-phase Chebyshev type I low-pass of `sig`.
pub fn chebyshev_lowpass(
    sig: &PpgSignal,
    order: usize,
    cutoff_hz: f64,
    passband_ripple_db: f64,
) -> Result<PpgSignal> {
    let filt = SosFilter::chebyshev1_lowpass(order, cutoff_hz, passband_ripple_db, sig.sample_rate_hz())?;
    Ok(sig.with_samples(filt.filtfilt(sig.samples())))
}
