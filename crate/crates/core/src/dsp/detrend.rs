use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::PpgSignal;

/// Subtracts the least-squares polynomial of degree `poly_order`.
///
/// The abscissa is mapped onto [-1, 1] before building the Vandermonde
/// matrix so the fit stays well conditioned for long signals.
pub fn detrend(sig: &PpgSignal, poly_order: usize) -> Result<PpgSignal> {
    let n = sig.len();
    if n <= poly_order {
        return Err(Error::Underdetermined {
            len: n,
            order: poly_order,
        });
    }
    let cols = poly_order + 1;
    let scale = if n > 1 { 2.0 / (n - 1) as f64 } else { 0.0 };
    let design = DMatrix::from_fn(n, cols, |i, k| (i as f64 * scale - 1.0).powi(k as i32));
    let y = DVector::from_column_slice(sig.samples());

    let svd = design.clone().svd(true, true);
    let coeffs = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("polynomial fit failed: {e}")))?;
    let residual = y - design * coeffs;
    Ok(sig.with_samples(residual.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sig(v: Vec<f64>) -> PpgSignal {
        PpgSignal::new(v, 14.0).unwrap()
    }

    #[test]
    fn removes_dc() {
        let out = detrend(&sig(vec![5.0; 4]), 0).unwrap();
        for v in out.samples() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn removes_line() {
        let out = detrend(&sig(vec![0.0, 1.0, 2.0, 3.0]), 1).unwrap();
        for v in out.samples() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sine_plus_line_leaves_sine() {
        // Whole number of periods with a zero-mean sine has no projection on
        // a constant; the linear projection is removed from the oracle too by
        // fitting it analytically.
        let n = 280;
        let fs = 14.0;
        let t: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
        let sine: Vec<f64> = t.iter().map(|t| (2.0 * PI * 1.3 * t).sin()).collect();
        let input: Vec<f64> = t.iter().zip(&sine).map(|(t, s)| s + 3.0 - 0.7 * t).collect();
        let out = detrend(&PpgSignal::new(input, fs).unwrap(), 1).unwrap();

        // Oracle: the sine's own least-squares line, via closed-form simple regression.
        let mt = t.iter().sum::<f64>() / n as f64;
        let ms = sine.iter().sum::<f64>() / n as f64;
        let sxy: f64 = t.iter().zip(&sine).map(|(t, s)| (t - mt) * (s - ms)).sum();
        let sxx: f64 = t.iter().map(|t| (t - mt).powi(2)).sum();
        let slope = sxy / sxx;
        for ((o, s), ti) in out.samples().iter().zip(&sine).zip(&t) {
            let expected = s - ms - slope * (ti - mt);
            assert_abs_diff_eq!(*o, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn underdetermined_is_error() {
        assert!(matches!(
            detrend(&sig(vec![1.0, 2.0]), 2),
            Err(Error::Underdetermined { len: 2, order: 2 })
        ));
        assert!(detrend(&sig(vec![1.0]), 0).is_ok());
    }

    #[test]
    fn output_mean_is_zero() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64).sqrt() * 100.0).collect();
        for order in 0..4 {
            let out = detrend(&sig(v.clone()), order).unwrap();
            let m = out.samples().iter().sum::<f64>() / out.len() as f64;
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-9);
        }
    }
}
