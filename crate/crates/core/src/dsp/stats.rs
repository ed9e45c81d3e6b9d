use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Median; an even count averages the two central values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Adjusted Fisher-Pearson sample skewness `G1 = g1 * sqrt(n(n-1)) / (n-2)`,
/// where `g1 = m3 / m2^1.5` uses biased central moments.
pub fn skewness(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewValues { found: n, needed: 3 });
    }
    let nf = n as f64;
    let m = values.iter().sum::<f64>() / nf;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(s2, s3), &v| {
        let d = v - m;
        (s2 + d * d, s3 + d * d * d)
    });
    let (m2, m3) = (m2 / nf, m3 / nf);
    // Relative floor: deviations below rounding noise of the mean count as zero.
    let tiny = (f64::EPSILON * m.abs()).powi(2);
    if m2 <= tiny {
        return Err(Error::ZeroVariance("skewness input"));
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn symmetric_is_zero() {
        assert_abs_diff_eq!(skewness(&[1.0, 2.0, 3.0]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn four_point_reference() {
        // [0,0,0,1]: mean 1/4, m2 = 3/16, m3 = 3/32.
        // g1 = (3/32) / (3/16)^1.5 = 2/sqrt(3); G1 = g1 * sqrt(12) / 2 = 2.
        let m2: f64 = 3.0 / 16.0;
        let m3: f64 = 3.0 / 32.0;
        let expected = m3 / m2.powf(1.5) * (12f64).sqrt() / 2.0;
        assert_abs_diff_eq!(expected, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(skewness(&[0.0, 0.0, 0.0, 1.0]).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn odd_symmetry() {
        let x = [0.3, 1.7, -2.0, 5.5, 0.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(skewness(&neg).unwrap(), -skewness(&x).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(skewness(&[1.0, 2.0]), Err(Error::TooFewValues { .. })));
        assert!(matches!(skewness(&[2.0; 5]), Err(Error::ZeroVariance(_))));
    }
}
