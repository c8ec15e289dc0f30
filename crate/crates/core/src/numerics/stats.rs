use super::Tensor;
use crate::error::{Error, Result};

/// Two-pass population mean and variance over a slice, summed left to right.
pub(crate) fn mean_var_raw(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().fold(0.0, |acc, v| acc + v) / n;
    let var = x.iter().fold(0.0, |acc, v| {
        let d = v - mean;
        acc + d * d
    }) / n;
    (mean, var)
}

/// Population mean and variance (divisor = element count) over every element.
pub fn mean_and_variance(x: &Tensor) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::Empty("mean_and_variance"));
    }
    Ok(mean_var_raw(x.data()))
}
