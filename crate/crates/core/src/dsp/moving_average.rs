use crate::error::{Error, Result};
use crate::signal::PpgSignal;

/// Order-`order` FIR moving average: `order + 1` equal taps, centered.
///
/// For an even tap count the extra tap sits on the right
/// (`i - order/2 ..= i + order - order/2`). Near the edges the window is
/// truncated to the samples that exist and the mean is taken over those,
/// so the output has the input's length.
pub fn moving_average(sig: &PpgSignal, order: usize) -> Result<PpgSignal> {
    if order == 0 {
        return Err(Error::InvalidParameter("moving-average order must be at least 1".into()));
    }
    let x = sig.samples();
    let n = x.len();
    if n < order + 1 {
        return Err(Error::SignalTooShort(format!(
            "{n} samples is shorter than the {}-tap window",
            order + 1
        )));
    }
    let left = order / 2;
    let right = order - left;
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(n - 1);
            let window = &x[lo..=hi];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    Ok(sig.with_samples(out))
}
