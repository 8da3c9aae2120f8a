use crate::envs::{collect_rollout, Env, Pacing};
use crate::error::{invalid, Result};
use crate::workers::{derive_seed, streams};

/// Mean and population std of the scripted reference controller's return,
/// over the same episode seeds `evaluate_policy` uses for `seed`.
pub fn reference_return(env: &dyn Env, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(invalid("calibration needs at least one episode"));
    }
    let mut returns = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut act = |s: &[f64]| Ok(env.reference_action(s));
        let r = collect_rollout(env, &mut act, Pacing::Unpaced, derive_seed(seed, streams::EVAL, i as u64))?;
        returns.push(r.trajectory.return_undiscounted);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// "90% of the reference": within 10% of `|reference|` below it, which also
/// reads correctly for the negative returns of cost-shaped tasks.
pub fn solved_threshold(reference: f64) -> f64 {
    reference - 0.1 * reference.abs()
}

/// Episodes and seed used to calibrate the solved threshold.
pub const CALIBRATION_EPISODES: usize = 100;
pub const CALIBRATION_SEED: u64 = 0;

/// Solved threshold for `env` from the reference controller.
pub fn calibrated_threshold(env: &dyn Env) -> Result<f64> {
    Ok(solved_threshold(reference_return(env, CALIBRATION_EPISODES, CALIBRATION_SEED)?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;

    #[test]
    fn threshold_is_ninety_percent() {
        assert_eq!(solved_threshold(100.0), 90.0);
        assert_eq!(solved_threshold(-100.0), -110.0);
        assert_eq!(solved_threshold(0.0), 0.0);
    }

    #[test]
    fn pendulum_reference_clears_its_threshold() {
        let env = make_env("pendulum", None, 200).unwrap();
        let (mean, std) = reference_return(env.as_ref(), 100, 0).unwrap();
        assert!(mean < 0.0 && std >= 0.0);
        // An independent evaluation window still clears the threshold.
        let (other, _) = reference_return(env.as_ref(), 20, 7).unwrap();
        assert!(other > solved_threshold(mean), "{other} vs {mean}");
    }

    #[test]
    fn reference_is_deterministic() {
        let env = make_env("point_mass", None, 50).unwrap();
        assert_eq!(reference_return(env.as_ref(), 3, 5).unwrap(), reference_return(env.as_ref(), 3, 5).unwrap());
        assert!(reference_return(env.as_ref(), 0, 5).is_err());
    }
}
