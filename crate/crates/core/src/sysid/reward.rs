//! Identification rewards. Both are negated distances, so 0 is a perfect match.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{fit_sinusoid, wrap_angle, MetricsError, SinusoidFit};
use crate::sim::Trajectory;

/// Reward assigned to failed rollouts and unusable fits.
pub const REWARD_FLOOR: f64 = -1.0e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("trajectory mismatch: {0}")]
    Mismatch(String),
    #[error("joint {joint}: {reason}")]
    Fit { joint: usize, reason: String },
}

impl From<MetricsError> for RewardError {
    fn from(e: MetricsError) -> Self {
        RewardError::Mismatch(e.to_string())
    }
}

fn check_pair(reference: &Trajectory, candidate: &Trajectory) -> Result<(), RewardError> {
    if reference.len() != candidate.len() || reference.is_empty() {
        return Err(RewardError::Mismatch(format!(
            "{} vs {} samples",
            reference.len(),
            candidate.len()
        )));
    }
    if (reference.sample_period - candidate.sample_period).abs() > 1e-9 * reference.sample_period {
        return Err(RewardError::Mismatch(format!(
            "sample periods {} vs {}",
            reference.sample_period, candidate.sample_period
        )));
    }
    if reference.joint_count != candidate.joint_count {
        return Err(RewardError::Mismatch(format!(
            "{} vs {} joints",
            reference.joint_count, candidate.joint_count
        )));
    }
    Ok(())
}

/// Negative distance between the final planar head positions.
pub fn reward_external(reference: &Trajectory, candidate: &Trajectory) -> Result<f64, RewardError> {
    check_pair(reference, candidate)?;
    let [xr, yr] = reference.final_xy();
    let [xc, yc] = candidate.final_xy();
    Ok(-(xr - xc).hypot(yr - yc))
}

/// Which joint statistics the internal reward compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InternalReward {
    /// Squared differences of fitted amplitude, frequency and phase.
    #[default]
    Cpg,
    /// Negative L² norm of the joint-angle differences over all samples.
    TrajectoryL2,
}

/// Fitted CPG variables of every joint of a trajectory.
pub fn fit_joints(traj: &Trajectory, frequency_hz: f64) -> Result<Vec<SinusoidFit>, RewardError> {
    let t = traj.times();
    (0..traj.joint_count)
        .map(|j| {
            let fit = fit_sinusoid(&t, &traj.joint_series(j), frequency_hz).map_err(|e| RewardError::Fit {
                joint: j,
                reason: e.to_string(),
            })?;
            if fit.degenerate {
                return Err(RewardError::Fit {
                    joint: j,
                    reason: "flat signal".into(),
                });
            }
            Ok(fit)
        })
        .collect()
}

/// `-Σ_j [(φ_d - φ_a)² + (ω_d - ω_a)² + (A_d - A_a)²]` with wrapped phase differences.
pub fn cpg_distance(desired: &[SinusoidFit], actual: &[SinusoidFit]) -> f64 {
    -desired
        .iter()
        .zip(actual)
        .map(|(d, a)| {
            wrap_angle(d.phase - a.phase).powi(2) + (d.omega - a.omega).powi(2) + (d.amplitude - a.amplitude).powi(2)
        })
        .sum::<f64>()
}

/// Internal reward with the desired CPG variables fitted from the reference
/// recording's achieved joints.
pub fn reward_internal(reference: &Trajectory, candidate: &Trajectory, frequency_hz: f64) -> Result<f64, RewardError> {
    check_pair(reference, candidate)?;
    let desired = fit_joints(reference, frequency_hz)?;
    let actual = fit_joints(candidate, frequency_hz)?;
    Ok(cpg_distance(&desired, &actual))
}

pub fn reward_trajectory_l2(reference: &Trajectory, candidate: &Trajectory) -> Result<f64, RewardError> {
    check_pair(reference, candidate)?;
    let sum: f64 = reference
        .samples
        .iter()
        .zip(&candidate.samples)
        .flat_map(|(r, c)| r.joints.iter().zip(&c.joints).map(|(a, b)| (a - b).powi(2)))
        .sum();
    Ok(-sum.sqrt())
}

/// `R_t = r_t + γ·R_{t+1}`.
pub fn rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (k, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[k] = acc;
    }
    out
}

/// Generalized advantage estimates for one episode that terminates after
/// its last step. `values[k]` is the estimate for the state before step `k`.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for k in (0..rewards.len()).rev() {
        let next = if k + 1 < values.len() { values[k + 1] } else { 0.0 };
        let delta = rewards[k] + gamma * next - values[k];
        acc = delta + gamma * lambda * acc;
        out[k] = acc;
    }
    out
}

/// Shifts and scales to zero mean and unit population variance. A batch with
/// no spread becomes all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        adv.iter_mut().for_each(|a| *a = 0.0);
    } else {
        adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
}
