//! DQN xApps: stand-alone training and the team-learning baseline.

mod dqn;
mod replay;
mod team;
mod xapp;

pub use dqn::{
    evaluate_greedy, evaluate_random, greedy_actions, select_action, td_loss_and_grad, td_train_step,
    train_teacher, DqnConfig, EpisodeRecord, TrainedXApp, TrainingCurve,
};
pub use replay::{ReplayBuffer, Transition};
pub use team::{peer_features, train_team, train_team_from, with_peer, TeamOptions, TeamOutcome};
pub use xapp::{write_slot, XAppSpec, DISTILLED, XAPP1, XAPP2};
