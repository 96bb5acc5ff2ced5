//! PPO-driven identification of actuator and friction parameters.

pub mod identify;
pub mod nn;
pub mod ppo;
pub mod reward;

pub use identify::{
    identify, identify_phases, train, Environment, Evaluation, IdentifyError, IdentifyRequest, IterationRecord,
    Phase, PhaseOutcome, ReferenceRecording, SimEnvironment, TrainOutcome,
};
pub use ppo::{PolicyParams, PpoConfig, PpoError, Transition};
pub use reward::{reward_external, reward_internal, rewards_to_go, InternalReward, REWARD_FLOOR};
