//! Team-learning baseline: two xApps trained together in one environment,
//! each observing the other's most recent action. This is an
//! approximation of team learning built from its one-line description
//! (xApps get feedback on each other's actions); it is not a port of any
//! particular published implementation.

use rand::Rng;

use super::dqn::{greedy_actions, select_action, DqnConfig, EpisodeRecord, Learner, TrainingCurve};
use super::replay::Transition;
use super::xapp::XAppSpec;
use crate::env::CellularEnv;
use crate::error::{Error, Result};
use crate::mitigation::{detect_direct, resolve_direct, Arbiter, MitigationPolicy};
use crate::nn::{HeadLayout, QNet};

/// Peer actions as features: index / (width - 1), 0 for width-1 heads.
pub fn peer_features(layout: &HeadLayout, actions: &[usize]) -> Vec<f64> {
    layout
        .heads()
        .iter()
        .zip(actions)
        .map(|(h, &a)| if h.width > 1 { a as f64 / (h.width - 1) as f64 } else { 0.0 })
        .collect()
}

pub fn with_peer(base: &[f64], peer_layout: &HeadLayout, peer_actions: &[usize]) -> Vec<f64> {
    let mut v = base.to_vec();
    v.extend(peer_features(peer_layout, peer_actions));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeamOptions {
    /// Run proposals through the full arbiter (priority + rollback). When
    /// off, direct conflicts are still settled by priority but nothing is
    /// rolled back.
    pub mitigation: bool,
    /// Frozen members act greedily and are never updated.
    pub frozen: [bool; 2],
}

impl Default for TeamOptions {
    fn default() -> Self {
        Self {
            mitigation: true,
            frozen: [false, false],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TeamOutcome {
    pub specs: [XAppSpec; 2],
    pub nets: [QNet; 2],
    pub curves: [TrainingCurve; 2],
}

pub fn train_team<R: Rng + ?Sized>(
    env: &mut CellularEnv,
    specs: [&XAppSpec; 2],
    cfg: &DqnConfig,
    policy: &MitigationPolicy,
    opts: TeamOptions,
    rng: &mut R,
) -> Result<TeamOutcome> {
    let base = env.observation_len();
    let nets = [0, 1].map(|k| {
        let peer = specs[1 - k].layout.len();
        QNet::init(cfg.layer_spec(base + peer), specs[k].layout.clone(), rng)
    });
    let [a, b] = nets;
    train_team_from(env, specs, [a?, b?], cfg, policy, opts, rng)
}

/// [`train_team`] starting from given networks.
pub fn train_team_from<R: Rng + ?Sized>(
    env: &mut CellularEnv,
    specs: [&XAppSpec; 2],
    nets: [QNet; 2],
    cfg: &DqnConfig,
    policy: &MitigationPolicy,
    opts: TeamOptions,
    rng: &mut R,
) -> Result<TeamOutcome> {
    cfg.validate()?;
    if specs[0].name == specs[1].name {
        return Err(Error::InvalidArgument("team members need distinct xApp names".into()));
    }
    let base = env.observation_len();
    for k in 0..2 {
        let want = base + specs[1 - k].layout.len();
        if nets[k].input_width() != want {
            return Err(Error::Dimension {
                context: "team member input",
                expected: want,
                got: nets[k].input_width(),
            });
        }
    }
    let params = env.params().clone();
    let [n0, n1] = nets;
    let mut learners = [Learner::new(n0, cfg), Learner::new(n1, cfg)];
    let mut arbiter = Arbiter::new(policy.clone()).without_log();
    let mut curves: [TrainingCurve; 2] = [Vec::new(), Vec::new()];

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut obs = env.reset(rng).features();
        arbiter.reset(env);
        let mut last: [Vec<usize>; 2] = [0, 1].map(|k| vec![0; specs[k].layout.len()]);
        let mut total = 0.0;
        for t in 0..params.episode_len {
            let inputs: [Vec<f64>; 2] = [0, 1].map(|k| with_peer(&obs, &specs[1 - k].layout, &last[1 - k]));
            let mut actions: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
            for k in 0..2 {
                actions[k] = if opts.frozen[k] {
                    greedy_actions(&learners[k].net, &inputs[k])?
                } else {
                    select_action(&learners[k].net, &inputs[k], epsilon, rng)?
                };
            }
            let step = env.state().step_index;
            let proposals = [
                specs[0].proposal(&actions[0], step)?,
                specs[1].proposal(&actions[1], step)?,
            ];
            let out = if opts.mitigation {
                arbiter.arbitrate(&proposals, env, rng)?.1
            } else {
                let current = env.controls();
                let conflicts = detect_direct(&proposals);
                let (merged, _) =
                    resolve_direct(&proposals, &conflicts, &policy.priority, Some(&current), &params)?;
                env.step(&merged, rng)?
            };
            let next = out.observation.features();
            total += out.reward;
            let done = t + 1 == params.episode_len;
            for k in 0..2 {
                if opts.frozen[k] {
                    continue;
                }
                let next_input = with_peer(&next, &specs[1 - k].layout, &actions[1 - k]);
                learners[k].observe(
                    Transition {
                        observation: inputs[k].clone(),
                        actions: actions[k].clone(),
                        reward: out.reward,
                        next_observation: next_input,
                        done,
                        teacher_q: None,
                        source: k as u16,
                    },
                    cfg,
                    rng,
                )?;
            }
            obs = next;
            last = actions;
        }
        for curve in &mut curves {
            curve.push(EpisodeRecord {
                episode,
                mean_reward: total / params.episode_len as f64,
                epsilon,
            });
        }
    }
    let [l0, l1] = learners;
    Ok(TeamOutcome {
        specs: [specs[0].clone(), specs[1].clone()],
        nets: [l0.net, l1.net],
        curves,
    })
}
