//! PPO-clip over a diagonal Gaussian policy with a learned value baseline.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nn::{Adam, Mlp};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub episodes_per_iteration: usize,
    pub episode_length: usize,
    pub entropy_coef: f64,
    pub max_iterations: usize,
    /// A step reward within this distance of 0 counts as a converged match.
    pub convergence_tol: f64,
    /// Stop after this many iterations without best-reward improvement; 0 disables.
    pub patience: usize,
    pub hidden_sizes: Vec<usize>,
    pub init_log_std: f64,
    /// Bound on each applied normalized parameter change.
    pub action_limit: f64,
    /// Global gradient-norm clip per minibatch; 0 disables.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 10,
            minibatch_size: 64,
            episodes_per_iteration: 16,
            episode_length: 8,
            entropy_coef: 0.0,
            max_iterations: 10,
            convergence_tol: 1e-9,
            patience: 0,
            hidden_sizes: vec![64, 64],
            init_log_std: 0.05f64.ln(),
            action_limit: 0.1,
            max_grad_norm: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpoError {
    #[error("invalid PPO configuration: {0}")]
    Config(String),
    #[error("non-finite gradient in {what} at epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },
    #[error("empty batch")]
    EmptyBatch,
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.into()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.episode_length < 1 {
            return bad("episode_length must be at least 1");
        }
        if self.episodes_per_iteration < 1 || self.minibatch_size < 1 || self.epochs < 1 {
            return bad("episodes_per_iteration, minibatch_size and epochs must be at least 1");
        }
        if !(self.action_limit > 0.0) {
            return bad("action_limit must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.max_grad_norm >= 0.0 && self.convergence_tol >= 0.0) {
            return bad("entropy_coef, max_grad_norm and convergence_tol must be non-negative");
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Policy and value networks plus their optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub policy: Mlp,
    /// State-independent log standard deviation per action dimension.
    pub log_std: Vec<f64>,
    /// Sees the state plus the normalized episode time.
    pub value: Mlp,
    policy_opt: Adam,
    value_opt: Adam,
}

impl PolicyParams {
    pub fn new(dim: usize, config: &PpoConfig, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[rng::tag::POLICY_INIT]);
        let mut sizes = vec![dim];
        sizes.extend(&config.hidden_sizes);
        sizes.push(dim);
        let policy = Mlp::new(&sizes, 0.01, &mut r);
        sizes[0] = dim + 1;
        *sizes.last_mut().unwrap() = 1;
        let value = Mlp::new(&sizes, 1.0, &mut r);
        let policy_opt = Adam::new(policy.params.len() + dim, config.learning_rate);
        let value_opt = Adam::new(value.params.len(), config.learning_rate);
        Self {
            policy,
            log_std: vec![config.init_log_std; dim],
            value,
            policy_opt,
            value_opt,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, state: &[f64]) -> Vec<f64> {
        self.policy.forward(state)
    }

    pub fn value_of(&self, state: &[f64], time_fraction: f64) -> f64 {
        let mut input = state.to_vec();
        input.push(time_fraction);
        self.value.forward(&input)[0]
    }

    /// Draws a raw action and returns it with its log-probability.
    pub fn sample<R: Rng>(&self, state: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let mean = self.mean(state);
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let logp = gaussian_log_prob(&action, &mean, &self.log_std);
        (action, logp)
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> f64 {
        gaussian_log_prob(action, &self.mean(state), &self.log_std)
    }

    pub fn is_finite(&self) -> bool {
        self.policy.params.iter().chain(&self.log_std).chain(&self.value.params).all(|v| v.is_finite())
    }
}

pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// One environment step as stored in the on-policy buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Raw policy sample; the applied change is this clamped to the action limit.
    pub action: Vec<f64>,
    pub applied: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    /// Step index divided by the episode length.
    pub time_fraction: f64,
}

/// A transition with its advantage and value target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub transition: Transition,
    pub advantage: f64,
    pub return_: f64,
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage)
}

/// Whether the clipped branch is the binding one, which zeroes the gradient.
pub fn is_clipped(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    (advantage > 0.0 && ratio > 1.0 + epsilon) || (advantage < 0.0 && ratio < 1.0 - epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean ratio over the batch before the first gradient step.
    pub initial_mean_ratio: f64,
    /// Mean ratio over every minibatch evaluation.
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Mean clipped surrogate over every minibatch evaluation.
    pub surrogate: f64,
    pub value_loss: f64,
}

fn clip_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Runs `epochs` passes of shuffled minibatch gradient steps on the clipped
/// surrogate and the value regression.
pub fn ppo_update(
    params: &mut PolicyParams,
    batch: &[Sample],
    config: &PpoConfig,
    seed: u64,
    iteration: u64,
) -> Result<UpdateStats, PpoError> {
    if batch.is_empty() {
        return Err(PpoError::EmptyBatch);
    }
    let eps = config.clip_epsilon;
    let dim = params.dim();
    let initial_mean_ratio = batch
        .iter()
        .map(|s| (params.log_prob(&s.transition.state, &s.transition.action) - s.transition.log_prob).exp())
        .sum::<f64>()
        / batch.len() as f64;

    let mut order: Vec<usize> = (0..batch.len()).collect();
    let (mut ratio_sum, mut clipped, mut surrogate_sum, mut value_loss_sum, mut evaluated) = (0.0, 0usize, 0.0, 0.0, 0usize);
    let n_policy = params.policy.params.len();

    for epoch in 0..config.epochs {
        let mut r = rng::stream(seed, &[rng::tag::MINIBATCH, iteration, epoch as u64]);
        order.shuffle(&mut r);
        for chunk in order.chunks(config.minibatch_size) {
            let m = chunk.len() as f64;
            let mut pgrad = vec![0.0; n_policy + dim];
            let mut vgrad = vec![0.0; params.value.params.len()];
            for &k in chunk {
                let s = &batch[k];
                let tr = &s.transition;
                let (mean, cache) = params.policy.forward_cached(&tr.state);
                let logp = gaussian_log_prob(&tr.action, &mean, &params.log_std);
                let ratio = (logp - tr.log_prob).exp();
                let a = s.advantage;
                ratio_sum += ratio;
                surrogate_sum += clipped_objective(ratio, a, eps);
                evaluated += 1;
                // loss = -surrogate/m - entropy_coef·entropy
                let dlogp = if is_clipped(ratio, a, eps) {
                    clipped += 1;
                    0.0
                } else {
                    -ratio * a / m
                };
                if dlogp != 0.0 {
                    let mut grad_mean = vec![0.0; dim];
                    for d in 0..dim {
                        let var = (2.0 * params.log_std[d]).exp();
                        let diff = tr.action[d] - mean[d];
                        grad_mean[d] = dlogp * diff / var;
                        pgrad[n_policy + d] += dlogp * (diff * diff / var - 1.0);
                    }
                    params.policy.backward(&cache, &grad_mean, &mut pgrad[..n_policy]);
                }

                let mut input = tr.state.clone();
                input.push(tr.time_fraction);
                let (v, vcache) = params.value.forward_cached(&input);
                let err = v[0] - s.return_;
                value_loss_sum += err * err;
                params.value.backward(&vcache, &[2.0 * err / m], &mut vgrad);
            }
            for d in 0..dim {
                pgrad[n_policy + d] -= config.entropy_coef;
            }
            if pgrad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFinite { what: "policy", epoch });
            }
            if vgrad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFinite { what: "value", epoch });
            }
            clip_norm(&mut pgrad, config.max_grad_norm);
            clip_norm(&mut vgrad, config.max_grad_norm);
            let mut flat: Vec<f64> = params.policy.params.iter().chain(&params.log_std).copied().collect();
            params.policy_opt.step(&mut flat, &pgrad);
            params.policy.params.copy_from_slice(&flat[..n_policy]);
            params.log_std.copy_from_slice(&flat[n_policy..]);
            params.value_opt.step(&mut params.value.params, &vgrad);
        }
    }
    if !params.is_finite() {
        return Err(PpoError::NonFinite {
            what: "parameters",
            epoch: config.epochs,
        });
    }
    let e = evaluated as f64;
    Ok(UpdateStats {
        initial_mean_ratio,
        mean_ratio: ratio_sum / e,
        clip_fraction: clipped as f64 / e,
        surrogate: surrogate_sum / e,
        value_loss: value_loss_sum / e,
    })
}
