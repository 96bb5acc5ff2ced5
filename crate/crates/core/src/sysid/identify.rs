//! The identification loop.
//!
//! The agent's state is the vector of free normalized parameters and its
//! action a bounded change to them. Each environment step applies the change,
//! scores the new parameters and rewards the agent with that score. Every
//! iteration starts its episodes from the best parameters seen so far, and the
//! loop returns those best parameters rather than the policy's last position.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::ppo::{ppo_update, PolicyParams, PpoConfig, PpoError, Sample, Transition};
use super::reward::{
    cpg_distance, fit_joints, gae, normalize_advantages, reward_external, reward_trajectory_l2, rewards_to_go,
    InternalReward, REWARD_FLOOR,
};
use crate::gait::GaitParams;
use crate::metrics::SinusoidFit;
use crate::model::{ModelError, ParamSpace, RobotModel, TunableParams};
use crate::rng;
use crate::sim::{rollout, RolloutConfig, Trajectory};

/// A scored search problem over `[-1, 1]^dim`.
pub trait Environment: Sync {
    fn dim(&self) -> usize;

    /// Where the search starts.
    fn initial_state(&self) -> Vec<f64>;

    fn evaluate(&self, state: &[f64]) -> Evaluation;

    /// Human-readable form of a state for the training log.
    fn snapshot(&self, state: &[f64]) -> Value {
        Value::from(state.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub reward: f64,
    /// Sub-evaluations that failed and were scored at the reward floor.
    pub failures: usize,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: String,
    pub iteration: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    pub initial_ratio: f64,
    pub value_loss: f64,
    pub mean_std: f64,
    pub failures: usize,
    pub params_snapshot: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_state: Vec<f64>,
    pub best_reward: f64,
    pub initial_reward: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

struct Episode {
    transitions: Vec<Transition>,
    failures: usize,
}

fn run_episode<E: Environment>(
    env: &E,
    policy: &PolicyParams,
    start: &[f64],
    config: &PpoConfig,
    seed: u64,
    iteration: u64,
    episode: u64,
) -> Episode {
    let mut r = rng::stream(seed, &[rng::tag::EPISODE, iteration, episode]);
    let t_len = config.episode_length as f64;
    let mut state = start.to_vec();
    let mut transitions = Vec::with_capacity(config.episode_length);
    let mut failures = 0;
    for t in 0..config.episode_length {
        let time_fraction = t as f64 / t_len;
        let (action, log_prob) = policy.sample(&state, &mut r);
        let value = policy.value_of(&state, time_fraction);
        let applied: Vec<f64> = action
            .iter()
            .map(|a| a.clamp(-config.action_limit, config.action_limit))
            .collect();
        let next_state: Vec<f64> = state
            .iter()
            .zip(&applied)
            .map(|(s, a)| (s + a).clamp(-1.0, 1.0))
            .collect();
        let eval = env.evaluate(&next_state);
        failures += eval.failures;
        let done = eval.reward >= -config.convergence_tol;
        transitions.push(Transition {
            state: std::mem::replace(&mut state, next_state.clone()),
            action,
            applied,
            reward: eval.reward,
            next_state,
            log_prob,
            value,
            time_fraction,
        });
        if done {
            break;
        }
    }
    Episode { transitions, failures }
}

/// Trains a fresh policy on `env`, calling `on_record` after every iteration.
pub fn train<E: Environment>(
    env: &E,
    config: &PpoConfig,
    seed: u64,
    phase: &str,
    mut on_record: impl FnMut(&IterationRecord),
) -> Result<TrainOutcome, PpoError> {
    config.validate()?;
    let dim = env.dim();
    let mut policy = PolicyParams::new(dim, config, seed);
    let mut best_state = env.initial_state();
    let initial = env.evaluate(&best_state);
    let initial_reward = if initial.reward.is_finite() {
        initial.reward
    } else {
        REWARD_FLOOR
    };
    let mut best_reward = initial_reward;
    let mut records = Vec::new();
    let mut converged = best_reward >= -config.convergence_tol;
    let mut stale = 0;

    let mut iteration = 0;
    while !converged && iteration < config.max_iterations {
        let start = best_state.clone();
        let episodes: Vec<Episode> = (0..config.episodes_per_iteration as u64)
            .into_par_iter()
            .map(|e| run_episode(env, &policy, &start, config, seed, iteration as u64, e))
            .collect();

        let previous_best = best_reward;
        let mut batch = Vec::new();
        let mut reward_sum = 0.0;
        let mut failures = 0;
        for ep in &episodes {
            failures += ep.failures;
            let rewards: Vec<f64> = ep.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = ep.transitions.iter().map(|t| t.value).collect();
            let adv = gae(&rewards, &values, config.gamma, config.gae_lambda);
            let rtg = rewards_to_go(&rewards, config.gamma);
            for ((tr, a), g) in ep.transitions.iter().zip(adv).zip(rtg) {
                reward_sum += tr.reward;
                if tr.reward > best_reward {
                    best_reward = tr.reward;
                    best_state = tr.next_state.clone();
                }
                batch.push(Sample {
                    transition: tr.clone(),
                    advantage: a,
                    return_: g,
                });
            }
        }
        let mut adv: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
        normalize_advantages(&mut adv);
        for (s, a) in batch.iter_mut().zip(adv) {
            s.advantage = a;
        }
        let stats = ppo_update(&mut policy, &batch, config, seed, iteration as u64)?;

        let record = IterationRecord {
            phase: phase.to_string(),
            iteration,
            mean_reward: reward_sum / batch.len() as f64,
            best_reward,
            clip_fraction: stats.clip_fraction,
            mean_ratio: stats.mean_ratio,
            initial_ratio: stats.initial_mean_ratio,
            value_loss: stats.value_loss,
            mean_std: policy.log_std.iter().map(|l| l.exp()).sum::<f64>() / dim as f64,
            failures,
            params_snapshot: env.snapshot(&best_state),
        };
        on_record(&record);
        records.push(record);

        converged = best_reward >= -config.convergence_tol;
        stale = if best_reward > previous_best { 0 } else { stale + 1 };
        if config.patience > 0 && stale >= config.patience {
            break;
        }
        iteration += 1;
    }
    Ok(TrainOutcome {
        best_state,
        best_reward,
        initial_reward,
        records,
        converged,
    })
}

/// Which parameters are free and which reward scores them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Actuator parameters against joint tracking.
    Internal,
    /// Stribeck parameters against final head position.
    External,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Internal => "internal",
            Phase::External => "external",
        }
    }

    pub fn free_indices(self, space: &ParamSpace) -> Vec<usize> {
        match self {
            Phase::Internal => space.actuator_indices(),
            Phase::External => space.stribeck_indices(),
        }
    }
}

/// A recorded trajectory and the gait that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecording {
    pub name: String,
    pub gait: GaitParams,
    pub trajectory: Trajectory,
}

#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error("{0}")]
    Config(String),
}

/// Simulation-backed environment for one identification phase.
pub struct SimEnvironment<'a> {
    model: &'a RobotModel,
    space: &'a ParamSpace,
    references: &'a [ReferenceRecording],
    rollout_config: &'a RolloutConfig,
    phase: Phase,
    internal_reward: InternalReward,
    base: Vec<f64>,
    free: Vec<usize>,
    reference_fits: Vec<Vec<SinusoidFit>>,
}

impl<'a> SimEnvironment<'a> {
    pub fn new(
        model: &'a RobotModel,
        space: &'a ParamSpace,
        start: &TunableParams,
        references: &'a [ReferenceRecording],
        rollout_config: &'a RolloutConfig,
        phase: Phase,
        internal_reward: InternalReward,
    ) -> Result<Self, IdentifyError> {
        if references.is_empty() {
            return Err(IdentifyError::Config("at least one reference trajectory is required".into()));
        }
        rollout_config
            .validate()
            .map_err(|e| IdentifyError::Config(e.to_string()))?;
        let expected = rollout_config.sample_count();
        for r in references {
            if r.trajectory.len() != expected || r.trajectory.joint_count != model.joint_count {
                return Err(IdentifyError::Config(format!(
                    "reference {} has {} samples of {} joints; the rollout configuration produces {} samples of {}",
                    r.name,
                    r.trajectory.len(),
                    r.trajectory.joint_count,
                    expected,
                    model.joint_count
                )));
            }
            if (r.trajectory.sample_period * rollout_config.record_rate_hz - 1.0).abs() > 1e-6 {
                return Err(IdentifyError::Config(format!(
                    "reference {} is sampled every {} s but rollouts record at {} Hz",
                    r.name, r.trajectory.sample_period, rollout_config.record_rate_hz
                )));
            }
            r.gait.validate(model.joint_count)?;
        }
        let base = space.normalize(start)?;
        let reference_fits = if phase == Phase::Internal && internal_reward == InternalReward::Cpg {
            references
                .iter()
                .map(|r| {
                    fit_joints(&r.trajectory, r.gait.frequency_hz)
                        .map_err(|e| IdentifyError::Config(format!("reference {}: {e}", r.name)))
                })
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            model,
            space,
            references,
            rollout_config,
            phase,
            internal_reward,
            base,
            free: phase.free_indices(space),
            reference_fits,
        })
    }

    /// Full normalized vector with the free coordinates replaced.
    pub fn full_state(&self, free: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (&i, &v) in self.free.iter().zip(free) {
            x[i] = v;
        }
        x
    }

    pub fn params(&self, free: &[f64]) -> Result<TunableParams, ModelError> {
        self.space.denormalize(&self.full_state(free))
    }

    fn score(&self, params: &TunableParams, index: usize) -> Option<f64> {
        let r = &self.references[index];
        let traj = rollout(self.model, params, &r.gait, self.rollout_config).ok()?;
        let reward = match (self.phase, self.internal_reward) {
            (Phase::External, _) => reward_external(&r.trajectory, &traj).ok()?,
            (Phase::Internal, InternalReward::TrajectoryL2) => reward_trajectory_l2(&r.trajectory, &traj).ok()?,
            (Phase::Internal, InternalReward::Cpg) => {
                let actual = fit_joints(&traj, r.gait.frequency_hz).ok()?;
                cpg_distance(&self.reference_fits[index], &actual)
            }
        };
        reward.is_finite().then_some(reward)
    }
}

impl Environment for SimEnvironment<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.base[i]).collect()
    }

    fn evaluate(&self, state: &[f64]) -> Evaluation {
        let Ok(params) = self.params(state) else {
            return Evaluation {
                reward: REWARD_FLOOR * self.references.len() as f64,
                failures: self.references.len(),
            };
        };
        let mut reward = 0.0;
        let mut failures = 0;
        for k in 0..self.references.len() {
            match self.score(&params, k) {
                Some(r) => reward += r,
                None => {
                    reward += REWARD_FLOOR;
                    failures += 1;
                }
            }
        }
        Evaluation { reward, failures }
    }

    fn snapshot(&self, state: &[f64]) -> Value {
        match self.params(state) {
            Ok(p) => serde_json::from_str(&p.to_json()).unwrap_or(Value::Null),
            Err(_) => Value::Null,
        }
    }
}

/// Result of one identification phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub phase: Phase,
    pub params: TunableParams,
    pub best_reward: f64,
    pub initial_reward: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

/// Everything that stays fixed across the phases of one identification run.
#[derive(Debug, Clone)]
pub struct IdentifyRequest<'a> {
    pub model: &'a RobotModel,
    pub space: &'a ParamSpace,
    pub references: &'a [ReferenceRecording],
    pub rollout: &'a RolloutConfig,
    pub ppo: &'a PpoConfig,
    pub internal_reward: InternalReward,
    pub seed: u64,
}

/// Identifies the free parameters of `phase`, starting from `start`.
pub fn identify(
    request: &IdentifyRequest<'_>,
    phase: Phase,
    start: &TunableParams,
    on_record: impl FnMut(&IterationRecord),
) -> Result<PhaseOutcome, IdentifyError> {
    let env = SimEnvironment::new(
        request.model,
        request.space,
        start,
        request.references,
        request.rollout,
        phase,
        request.internal_reward,
    )?;
    let seed = rng::derive_seed(request.seed, &[rng::tag::PHASE, phase as u64]);
    let outcome = train(&env, request.ppo, seed, phase.name(), on_record)?;
    Ok(PhaseOutcome {
        phase,
        params: env.params(&outcome.best_state)?,
        best_reward: outcome.best_reward,
        initial_reward: outcome.initial_reward,
        records: outcome.records,
        converged: outcome.converged,
    })
}

/// Runs the phases in order, each starting from the previous one's result.
pub fn identify_phases(
    request: &IdentifyRequest<'_>,
    phases: &[Phase],
    start: &TunableParams,
    mut on_record: impl FnMut(&IterationRecord),
) -> Result<Vec<PhaseOutcome>, IdentifyError> {
    let mut current = start.clone();
    let mut out = Vec::with_capacity(phases.len());
    for &phase in phases {
        let outcome = identify(request, phase, &current, &mut on_record)?;
        current = outcome.params.clone();
        out.push(outcome);
    }
    Ok(out)
}
