use crate::error::{ensure_len, Result};

/// `½·ln(2π)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Log-density of a diagonal Gaussian:
/// `Σ_d −log_std_d − ½ln(2π) − ½((x_d − mean_d)/exp(log_std_d))²`.
pub fn gaussian_log_density(mean: &[f64], log_std: &[f64], x: &[f64]) -> Result<f64> {
    ensure_len("log_std", log_std.len(), mean.len())?;
    ensure_len("x", x.len(), mean.len())?;
    Ok(mean
        .iter()
        .zip(log_std)
        .zip(x)
        .map(|((&m, &ls), &xi)| {
            let z = (xi - m) * (-ls).exp();
            -ls - HALF_LN_2PI - 0.5 * z * z
        })
        .sum())
}

/// Entropy of a diagonal Gaussian with the given log standard deviations.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + HALF_LN_2PI + 0.5).sum()
}
