//! Per-transition reward: a penalty for maximum braking on the next cycle
//! plus a penalty proportional to the corrective command's cost.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("action cost must be finite, got {0}")]
pub struct NonFiniteCost(pub f64);

/// `-lambda1 * sigma_next - lambda2 * cost`.
pub fn compute_reward(
    sigma_next: u8,
    cost: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64, NonFiniteCost> {
    if !cost.is_finite() {
        return Err(NonFiniteCost(cost));
    }
    Ok(-lambda1 * f64::from(sigma_next) - lambda2 * cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(compute_reward(1, 0.5, 35.0, 10.0), Ok(-40.0));
        assert_eq!(compute_reward(0, 0.0, 35.0, 10.0), Ok(0.0));
        // 10 * 0.34 is not exactly representable; one ulp off 3.4.
        assert!((compute_reward(0, 0.34, 35.0, 10.0).unwrap() + 3.4).abs() < 1e-15);
        assert!(compute_reward(0, f64::INFINITY, 35.0, 10.0).is_err());
    }
}
