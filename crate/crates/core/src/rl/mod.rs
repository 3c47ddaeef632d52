//! Return-seeking allocator: TD3 with a softmax actor, replay memory and rewards.

mod buffer;
mod reward;
mod td3;

pub use buffer::{ReplayBuffer, Transition};
pub use reward::{episode_reward, jensen_shannon, per_step_reward, EpisodeReward, RewardConfig};
pub use td3::{AgentCheckpoint, TargetSample, Td3Agent, Td3Config, UpdateDiagnostics};
