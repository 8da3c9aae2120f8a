use crate::error::{invalid, Result};

/// Weights of the distance-based reward used by the reacher task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Quadratic weight.
    pub omega: f64,
    /// Lorentzian weight.
    pub v: f64,
    /// Lorentzian offset, strictly positive.
    pub alpha: f64,
    pub ctrl_penalty: f64,
    pub vel_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            omega: 1.0,
            v: 1.0,
            alpha: 1e-5,
            ctrl_penalty: 1e-3,
            vel_penalty: 1e-3,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(invalid("lorentzian offset alpha must be positive"));
        }
        if [self.omega, self.v, self.ctrl_penalty, self.vel_penalty]
            .iter()
            .any(|w| !(*w >= 0.0))
        {
            return Err(invalid("reward weights must be non-negative"));
        }
        Ok(())
    }
}

/// `r(d) = −ω·d² − v·ln(d² + α)`
pub fn lorentzian_reward(d: f64, rp: &RewardParams) -> f64 {
    let d2 = d * d;
    -rp.omega * d2 - rp.v * (d2 + rp.alpha).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let rp = RewardParams::default();
        assert!((lorentzian_reward(0.0, &rp) - 11.512_925_464_970_229).abs() < 1e-9);
        assert!((lorentzian_reward(1.0, &rp) - (-1.0 - 1.00001f64.ln())).abs() < 1e-12);
        assert!((lorentzian_reward(1.0, &rp) + 1.000_010).abs() < 1e-6);
        let quad = RewardParams { v: 0.0, ..rp };
        assert_eq!(lorentzian_reward(2.0, &quad), -4.0);
    }

    #[test]
    fn strictly_decreasing_on_grid() {
        let rp = RewardParams::default();
        let mut prev = lorentzian_reward(1e-4, &rp);
        for i in 1..2000 {
            let d = 1e-4 + i as f64 * 1e-3;
            let r = lorentzian_reward(d, &rp);
            assert!(r < prev, "not decreasing at d={d}");
            prev = r;
        }
    }

    #[test]
    fn validation() {
        assert!(RewardParams::default().validate().is_ok());
        assert!(RewardParams { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(RewardParams { omega: -1.0, ..Default::default() }.validate().is_err());
    }
}
