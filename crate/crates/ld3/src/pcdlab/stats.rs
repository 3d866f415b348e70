//! Similarity metrics for the dependency experiment.

use super::PcdError;

/// Sample Pearson correlation coefficient.
///
/// The denominator is computed as `sqrt(sxx * syy)` in one shot: for
/// bit-identical inputs all three sums coincide and `sqrt(s * s) == s` under
/// round-to-nearest, so identical series correlate at exactly 1.0.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64, PcdError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(PcdError::LengthMismatch(format!(
            "pearson needs two equal-length series of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PcdError::ZeroVariance(if sxx == 0.0 {
            "first"
        } else {
            "second"
        }));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Root mean squared Euclidean distance between paired 2-D positions.
pub fn rmse(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, PcdError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PcdError::LengthMismatch(format!(
            "rmse needs two equal-length non-empty series, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2))
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}
