//! Multi-headed DQN: epsilon-greedy selection, TD updates and the
//! stand-alone (stage-1) training loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use super::xapp::XAppSpec;
use crate::env::CellularEnv;
use crate::error::{Error, Result};
use crate::nn::{argmax, Gradients, LayerSpec, QNet};
use crate::parallel::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard target-network copy period, in environment steps.
    pub target_sync_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which epsilon anneals linearly.
    pub epsilon_decay_fraction: f64,
    /// Environment steps between gradient updates.
    pub train_interval: usize,
    /// Transitions collected before the first update.
    pub warmup_steps: usize,
    /// Global L2 gradient-norm cap applied before each SGD step.
    pub grad_clip: Option<f64>,
    pub hidden: Vec<usize>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            gamma: 0.95,
            lr: 0.01,
            batch_size: 32,
            buffer_capacity: 50_000,
            target_sync_steps: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            train_interval: 4,
            warmup_steps: 500,
            grad_clip: Some(10.0),
            hidden: vec![50, 100],
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training: {m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.lr >= 0.0) {
            return bad("lr must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive");
        }
        if self.target_sync_steps == 0 || self.train_interval == 0 {
            return bad("target_sync_steps and train_interval must be positive");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon values must lie in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad("epsilon_decay_fraction must lie in [0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// Exploration rate for `episode`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = (self.epsilon_decay_fraction * self.episodes as f64).round();
        let progress = if span <= 0.0 {
            1.0
        } else {
            (episode as f64 / span).min(1.0)
        };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress
    }

    pub fn layer_spec(&self, input: usize) -> LayerSpec {
        LayerSpec {
            input,
            hidden: self.hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    pub epsilon: f64,
}

pub type TrainingCurve = Vec<EpisodeRecord>;

/// Argmax of every head.
pub fn greedy_actions(net: &QNet, input: &[f64]) -> Result<Vec<usize>> {
    Ok(net.q_values(input)?.iter().map(|q| argmax(q)).collect())
}

/// Per head independently: a uniform index with probability `epsilon`,
/// otherwise the head's argmax (ties to the lowest index).
pub fn select_action<R: Rng + ?Sized>(
    net: &QNet,
    input: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let q = net.q_values(input)?;
    Ok(q
        .iter()
        .map(|head| {
            if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..head.len())
            } else {
                argmax(head)
            }
        })
        .collect())
}

fn check_batch(net: &QNet, batch: &[&Transition]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    for t in batch {
        net.layout().check_actions(&t.actions)?;
    }
    Ok(())
}

/// Per-sample contribution to the batch-mean TD loss and its output
/// gradients.
fn td_sample(
    net: &QNet,
    target: &QNet,
    t: &Transition,
    gamma: f64,
    scale: f64,
) -> Result<crate::nn::SampleGrad> {
    let pass = net.forward(&t.observation)?;
    let bootstrap = if t.done {
        None
    } else {
        Some(target.q_values(&t.next_observation)?)
    };
    let mut loss = 0.0;
    let mut head_grads = Vec::with_capacity(pass.q.len());
    for (h, (q, &a)) in pass.q.iter().zip(&t.actions).enumerate() {
        let next_max = bootstrap
            .as_ref()
            .map_or(0.0, |b| b[h].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let y = t.reward + gamma * next_max;
        let err = q[a] - y;
        loss += err * err;
        let mut g = vec![0.0; q.len()];
        g[a] = 2.0 * err * scale;
        head_grads.push(Some(g));
    }
    Ok((loss * scale, pass, head_grads))
}

/// Mean over the batch of the squared TD error summed over heads, with
/// per-head targets `r + gamma * max_a Q_target(s', a)`, and its gradient.
pub fn td_loss_and_grad(
    net: &QNet,
    target: &QNet,
    batch: &[&Transition],
    gamma: f64,
    exec: Execution,
) -> Result<(f64, Gradients)> {
    check_batch(net, batch)?;
    let scale = 1.0 / batch.len() as f64;
    let mut acc = net.zero_gradients();
    let mut loss = 0.0;
    if exec.is_parallel() {
        let parts = parallel::try_map(exec, batch, |t| {
            let (l, pass, hg) = td_sample(net, target, t, gamma, scale)?;
            Ok((l, net.backward(&pass, &hg)?))
        })?;
        for (l, g) in parts {
            loss += l;
            acc.add_assign(&g);
        }
    } else {
        for t in batch {
            let (l, pass, hg) = td_sample(net, target, t, gamma, scale)?;
            loss += l;
            net.backward_into(&mut acc, &pass, &hg)?;
        }
    }
    Ok((loss, acc))
}

/// One SGD step on the TD loss; returns the pre-update loss.
pub fn td_train_step(
    net: &mut QNet,
    target: &QNet,
    batch: &[&Transition],
    gamma: f64,
    lr: f64,
    grad_clip: Option<f64>,
) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1)")));
    }
    let (loss, mut grads) = td_loss_and_grad(net, target, batch, gamma, Execution::Sequential)?;
    if let Some(c) = grad_clip {
        grads.clip_norm(c);
    }
    net.sgd_step(&grads, lr)?;
    Ok(loss)
}

/// Online learner state shared by the stand-alone and team trainers.
pub(crate) struct Learner {
    pub net: QNet,
    target: QNet,
    buffer: ReplayBuffer,
    steps: usize,
}

impl Learner {
    pub fn new(net: QNet, cfg: &DqnConfig) -> Self {
        Self {
            target: net.clone(),
            net,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            steps: 0,
        }
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, cfg: &DqnConfig, rng: &mut R) -> Result<()> {
        self.buffer.push(t);
        self.steps += 1;
        let ready = self.buffer.len() >= cfg.batch_size.max(cfg.warmup_steps);
        if ready && self.steps.is_multiple_of(cfg.train_interval) {
            let batch = self.buffer.sample(cfg.batch_size, rng);
            td_train_step(&mut self.net, &self.target, &batch, cfg.gamma, cfg.lr, cfg.grad_clip)?;
        }
        if self.steps.is_multiple_of(cfg.target_sync_steps) {
            self.target.copy_from(&self.net)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedXApp {
    pub spec: XAppSpec,
    pub net: QNet,
    pub curve: TrainingCurve,
}

/// Train one xApp alone in `env`. Slots it does not control use the
/// stand-alone defaults (default cell power, equal RB split).
pub fn train_teacher<R: Rng + ?Sized>(
    env: &mut CellularEnv,
    spec: &XAppSpec,
    cfg: &DqnConfig,
    rng: &mut R,
) -> Result<TrainedXApp> {
    cfg.validate()?;
    let params = env.params().clone();
    let net = QNet::init(cfg.layer_spec(env.observation_len()), spec.layout.clone(), rng)?;
    let mut learner = Learner::new(net, cfg);
    let mut curve = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut obs = env.reset(rng).features();
        let mut total = 0.0;
        for t in 0..params.episode_len {
            let actions = select_action(&learner.net, &obs, epsilon, rng)?;
            let joint = spec.decode_standalone(&actions, &params, &env.state().serving)?;
            let out = env.step(&joint, rng)?;
            let next = out.observation.features();
            total += out.reward;
            learner.observe(
                Transition {
                    observation: obs,
                    actions,
                    reward: out.reward,
                    next_observation: next.clone(),
                    done: t + 1 == params.episode_len,
                    teacher_q: None,
                    source: 0,
                },
                cfg,
                rng,
            )?;
            obs = next;
        }
        curve.push(EpisodeRecord {
            episode,
            mean_reward: total / params.episode_len as f64,
            epsilon,
        });
    }
    Ok(TrainedXApp {
        spec: spec.clone(),
        net: learner.net,
        curve,
    })
}

/// Mean per-step reward of greedy play over `episodes` episodes.
pub fn evaluate_greedy<R: Rng + ?Sized>(
    env: &mut CellularEnv,
    spec: &XAppSpec,
    net: &QNet,
    episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    let params = env.params().clone();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset(rng).features();
        for _ in 0..params.episode_len {
            let a = greedy_actions(net, &obs)?;
            let joint = spec.decode_standalone(&a, &params, &env.state().serving)?;
            let out = env.step(&joint, rng)?;
            total += out.reward;
            obs = out.observation.features();
        }
    }
    Ok(total / (episodes * params.episode_len) as f64)
}

/// Mean per-step reward of a uniformly random policy.
pub fn evaluate_random<R: Rng + ?Sized>(
    env: &mut CellularEnv,
    spec: &XAppSpec,
    episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    let params = env.params().clone();
    let mut total = 0.0;
    for _ in 0..episodes {
        env.reset(rng);
        for _ in 0..params.episode_len {
            let a: Vec<usize> = spec.layout.heads().iter().map(|h| rng.gen_range(0..h.width)).collect();
            let joint = spec.decode_standalone(&a, &params, &env.state().serving)?;
            total += env.step(&joint, rng)?.reward;
        }
    }
    Ok(total / (episodes * params.episode_len) as f64)
}
