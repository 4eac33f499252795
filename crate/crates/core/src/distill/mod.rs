//! Policy distillation: collect teacher experience, train a student on
//! per-head softened KL targets, and evaluate deployed schemes.

mod buffer;
mod eval;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Transition, XAppSpec};
use crate::env::CellularEnv;
use crate::error::{Error, Result};
use crate::nn::{argmax, kl_loss, Gradients, HeadRole, QNet};
use crate::parallel::{self, Execution};

pub use buffer::{ExperienceBuffer, SourceInfo, BUFFER_MAGIC, BUFFER_VERSION};
pub use eval::{evaluate, evaluate_logged, Deployment, EvalRun, PfSummary};

/// A policy that can fill the distillation buffer.
#[derive(Debug, Clone)]
pub enum Teacher {
    /// Trained Q-network; stores its Q-vectors.
    Network { spec: XAppSpec, net: QNet },
    /// Strongest cell, largest RB option, highest power. Stores one-hot
    /// pseudo-Q vectors (1 at the chosen index, 0 elsewhere).
    Heuristic { spec: XAppSpec },
}

impl Teacher {
    pub fn spec(&self) -> &XAppSpec {
        match self {
            Teacher::Network { spec, .. } | Teacher::Heuristic { spec } => spec,
        }
    }

    /// Greedy per-head actions and the per-head Q-vectors behind them.
    pub fn act(&self, env: &CellularEnv, features: &[f64]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        match self {
            Teacher::Network { net, .. } => {
                let q = net.q_values(features)?;
                let a = q.iter().map(|h| argmax(h)).collect();
                Ok((a, q))
            }
            Teacher::Heuristic { spec } => {
                let mut actions = Vec::with_capacity(spec.layout.len());
                let mut q = Vec::with_capacity(spec.layout.len());
                for h in spec.layout.heads() {
                    let a = match h.role {
                        HeadRole::Handover { user } => 1 + argmax(&env.state().gains[user]),
                        HeadRole::Rb { .. } | HeadRole::Power { .. } => h.width - 1,
                    };
                    let mut v = vec![0.0; h.width];
                    v[a] = 1.0;
                    actions.push(a);
                    q.push(v);
                }
                Ok((actions, q))
            }
        }
    }

    fn check_input(&self, width: usize) -> Result<()> {
        match self {
            Teacher::Network { net, .. } if net.input_width() != width => Err(Error::Dimension {
                context: "teacher input width",
                expected: width,
                got: net.input_width(),
            }),
            Teacher::Network { spec, net } if net.layout() != &spec.layout => {
                Err(Error::Layout(format!("teacher {} net does not match its spec", spec.name)))
            }
            _ => Ok(()),
        }
    }
}

/// Deploy each teacher alone (greedy, stand-alone defaults for slots it
/// does not own) and record `steps / teachers` transitions from each; the
/// first `steps % teachers` teachers record one extra. Q-vectors and
/// actions are captured before the action is applied. Episodes restart
/// every `episode_len` steps.
pub fn collect_experience<R: Rng + ?Sized>(
    teachers: &[Teacher],
    env: &mut CellularEnv,
    steps: usize,
    rng: &mut R,
) -> Result<ExperienceBuffer> {
    if teachers.is_empty() {
        return Err(Error::InvalidArgument("collection needs at least one teacher".into()));
    }
    let width = env.observation_len();
    for t in teachers {
        t.check_input(width)?;
    }
    let sources = teachers
        .iter()
        .map(|t| SourceInfo {
            name: t.spec().name.clone(),
            layout: t.spec().layout.clone(),
        })
        .collect();
    let mut buffer = ExperienceBuffer::new(sources, width);
    let params = env.params().clone();
    let n = teachers.len();
    for (k, teacher) in teachers.iter().enumerate() {
        let quota = steps / n + usize::from(k < steps % n);
        let source = u16::try_from(k).map_err(|_| Error::InvalidArgument("too many teachers".into()))?;
        let mut obs = env.reset(rng).features();
        let mut t_in_episode = 0;
        for _ in 0..quota {
            if t_in_episode == params.episode_len {
                obs = env.reset(rng).features();
                t_in_episode = 0;
            }
            let (actions, q) = teacher.act(env, &obs)?;
            let joint = teacher.spec().decode_standalone(&actions, &params, &env.state().serving)?;
            let out = env.step(&joint, rng)?;
            let next = out.observation.features();
            t_in_episode += 1;
            buffer.transitions.push(Transition {
                observation: obs,
                actions,
                reward: out.reward,
                next_observation: next.clone(),
                done: t_in_episode == params.episode_len,
                teacher_q: Some(q),
                source,
            });
            obs = next;
        }
    }
    Ok(buffer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub temperature: f64,
    pub epochs: usize,
    /// Transitions collected in total across teachers.
    pub buffer_steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Fraction of the buffer held out for the agreement measurement.
    pub holdout_fraction: f64,
    pub hidden: Vec<usize>,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            temperature: 20.0,
            epochs: 150,
            buffer_steps: 10_000,
            lr: 0.2,
            batch_size: 32,
            holdout_fraction: 0.1,
            hidden: vec![50, 100],
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("distill: {m}")));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.lr >= 0.0) || self.batch_size == 0 {
            return bad("lr must be non-negative and batch_size positive");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must lie in [0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Student head index for every head of every source.
pub fn routes(student: &QNet, buffer: &ExperienceBuffer) -> Result<Vec<Vec<usize>>> {
    buffer
        .sources
        .iter()
        .map(|s| student.layout().routing_from(&s.layout))
        .collect()
}

fn kl_sample(
    student: &QNet,
    t: &Transition,
    route: &[usize],
    tau: f64,
    scale: f64,
) -> Result<crate::nn::SampleGrad> {
    let pass = student.forward(&t.observation)?;
    let teacher_q = t
        .teacher_q
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("transition has no teacher Q-values".into()))?;
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; pass.q.len()];
    let mut loss = 0.0;
    for (q_t, &h) in teacher_q.iter().zip(route) {
        let (l, mut g) = kl_loss(q_t, &pass.q[h], tau)?;
        loss += l;
        g.iter_mut().for_each(|v| *v *= scale);
        grads[h] = Some(g);
    }
    Ok((loss * scale, pass, grads))
}

/// Batch-mean KL loss over matched heads and its gradient. Heads a
/// transition's source does not own receive no gradient from it.
pub fn kl_loss_and_grad(
    student: &QNet,
    batch: &[&Transition],
    routes: &[Vec<usize>],
    tau: f64,
    exec: Execution,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty distillation batch".into()));
    }
    let route_of = |t: &Transition| {
        routes
            .get(t.source as usize)
            .ok_or_else(|| Error::Layout(format!("no route for source {}", t.source)))
    };
    let scale = 1.0 / batch.len() as f64;
    let mut acc = student.zero_gradients();
    let mut loss = 0.0;
    if exec.is_parallel() {
        let parts = parallel::try_map(exec, batch, |t| {
            let (l, pass, hg) = kl_sample(student, t, route_of(t)?, tau, scale)?;
            Ok((l, student.backward(&pass, &hg)?))
        })?;
        for (l, g) in parts {
            loss += l;
            acc.add_assign(&g);
        }
    } else {
        for t in batch {
            let (l, pass, hg) = kl_sample(student, t, route_of(t)?, tau, scale)?;
            loss += l;
            student.backward_into(&mut acc, &pass, &hg)?;
        }
    }
    Ok((loss, acc))
}

/// Argmax agreement of one student head with the teachers that own it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadAgreement {
    pub head: String,
    pub matches: usize,
    pub total: usize,
}

impl HeadAgreement {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.matches as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Agreement {
    /// Student heads covered by at least one source, in student order.
    pub heads: Vec<HeadAgreement>,
}

impl Agreement {
    /// Unweighted mean of the per-head ratios.
    pub fn mean(&self) -> f64 {
        let covered: Vec<f64> = self.heads.iter().filter(|h| h.total > 0).map(|h| h.ratio()).collect();
        covered.iter().sum::<f64>() / covered.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.heads
            .iter()
            .filter(|h| h.total > 0)
            .map(|h| h.ratio())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-head argmax agreement between `student` and the stored teacher
/// Q-vectors on `transitions`.
pub fn head_agreement(
    student: &QNet,
    transitions: &[&Transition],
    routes: &[Vec<usize>],
) -> Result<Agreement> {
    let layout = student.layout();
    let mut matches = vec![0usize; layout.len()];
    let mut total = vec![0usize; layout.len()];
    for t in transitions {
        let q_s = student.q_values(&t.observation)?;
        let q_t = t
            .teacher_q
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("transition has no teacher Q-values".into()))?;
        let route = routes
            .get(t.source as usize)
            .ok_or_else(|| Error::Layout(format!("no route for source {}", t.source)))?;
        for (qt, &h) in q_t.iter().zip(route) {
            total[h] += 1;
            if argmax(qt) == argmax(&q_s[h]) {
                matches[h] += 1;
            }
        }
    }
    Ok(Agreement {
        heads: layout
            .heads()
            .iter()
            .enumerate()
            .filter(|(h, _)| total[*h] > 0)
            .map(|(h, spec)| HeadAgreement {
                head: spec.name.clone(),
                matches: matches[h],
                total: total[h],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillReport {
    /// Mean per-sample KL loss of each epoch, measured before each batch's
    /// update.
    pub epoch_loss: Vec<f64>,
    /// Held-out agreement of the untrained student.
    pub before: Agreement,
    pub after: Agreement,
    pub train_len: usize,
    pub holdout_len: usize,
}

/// Split `n` indices into (train, holdout) after a seeded shuffle.
pub fn holdout_split<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let held = ((n as f64) * fraction).round() as usize;
    let train = idx.split_off(held.min(n));
    (train, idx)
}

/// Train `student` on the buffer with minibatch SGD on the per-head KL
/// loss at temperature `cfg.temperature`, sampling uniformly over the
/// union of all sources.
pub fn distill<R: Rng + ?Sized>(
    buffer: &ExperienceBuffer,
    student: &mut QNet,
    cfg: &DistillConfig,
    exec: Execution,
    rng: &mut R,
) -> Result<DistillReport> {
    cfg.validate()?;
    buffer.validate()?;
    if student.input_width() != buffer.obs_width {
        return Err(Error::Dimension {
            context: "student input width",
            expected: buffer.obs_width,
            got: student.input_width(),
        });
    }
    let routes = routes(student, buffer)?;
    let (mut train, holdout) = holdout_split(buffer.len(), cfg.holdout_fraction, rng);
    let held: Vec<&Transition> = holdout.iter().map(|&i| &buffer.transitions[i]).collect();
    let before = head_agreement(student, &held, &routes)?;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        if train.is_empty() {
            break;
        }
        train.shuffle(rng);
        let mut sum = 0.0;
        for chunk in train.chunks(cfg.batch_size) {
            let batch: Vec<&Transition> = chunk.iter().map(|&i| &buffer.transitions[i]).collect();
            let (loss, grads) = kl_loss_and_grad(student, &batch, &routes, cfg.temperature, exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("distillation loss"));
            }
            sum += loss * batch.len() as f64;
            student.sgd_step(&grads, cfg.lr)?;
        }
        epoch_loss.push(sum / train.len() as f64);
    }
    let after = head_agreement(student, &held, &routes)?;
    Ok(DistillReport {
        epoch_loss,
        before,
        after,
        train_len: train.len(),
        holdout_len: held.len(),
    })
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// True if no entry exceeds its predecessor by more than `tol`.
pub fn is_non_increasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + tol)
}
