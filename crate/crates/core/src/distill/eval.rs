//! Greedy deployment of trained xApps for the comparison runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{greedy_actions, with_peer, XAppSpec};
use crate::env::CellularEnv;
use crate::error::{Error, Result};
use crate::mitigation::{Arbiter, ArbitrationRecord, InterruptCounts, MitigationPolicy};
use crate::nn::QNet;

/// What gets deployed in an evaluation run.
#[derive(Debug, Clone)]
pub enum Deployment {
    /// Independently trained xApps acting on the plain observation.
    Individual { members: Vec<(XAppSpec, QNet)> },
    /// Team-trained pair; each input carries the peer's previous actions.
    Team { members: [(XAppSpec, QNet); 2] },
}

impl Deployment {
    pub fn single(spec: XAppSpec, net: QNet) -> Self {
        Deployment::Individual {
            members: vec![(spec, net)],
        }
    }

    fn members(&self) -> &[(XAppSpec, QNet)] {
        match self {
            Deployment::Individual { members } => members,
            Deployment::Team { members } => members,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl PfSummary {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Raw outcome of an evaluation run; rates and serving cells are stored
/// step-major (`[step * users + user]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub steps: usize,
    pub num_users: usize,
    pub rates_mbps: Vec<f64>,
    pub serving: Vec<Option<usize>>,
    pub pf: Vec<f64>,
    pub interrupts: InterruptCounts,
    /// Per-step arbitration log, when requested.
    pub arbitration: Option<Vec<ArbitrationRecord>>,
}

impl EvalRun {
    /// Lowest user rate of every step.
    pub fn step_min_rates(&self) -> Vec<f64> {
        self.rates_mbps
            .chunks(self.num_users.max(1))
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn pf_summary(&self) -> PfSummary {
        PfSummary::of(&self.pf)
    }
}

/// Run the deployment greedily for `steps` steps, restarting episodes every
/// `episode_len` steps. Proposals always pass through an arbiter so direct
/// conflicts are settled by `policy.priority`; with `mitigation` off the
/// arbiter never rolls back, which for a single xApp is plain application.
pub fn evaluate<R: Rng + ?Sized>(
    deployment: &Deployment,
    env: &mut CellularEnv,
    steps: usize,
    policy: &MitigationPolicy,
    mitigation: bool,
    rng: &mut R,
) -> Result<EvalRun> {
    evaluate_logged(deployment, env, steps, policy, mitigation, false, rng)
}

/// [`evaluate`], optionally keeping the arbiter's per-step log.
pub fn evaluate_logged<R: Rng + ?Sized>(
    deployment: &Deployment,
    env: &mut CellularEnv,
    steps: usize,
    policy: &MitigationPolicy,
    mitigation: bool,
    keep_log: bool,
    rng: &mut R,
) -> Result<EvalRun> {
    let members = deployment.members();
    if members.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one xApp".into()));
    }
    let base = env.observation_len();
    for (k, (spec, net)) in members.iter().enumerate() {
        if net.layout() != &spec.layout {
            return Err(Error::Layout(format!("{} net does not match its spec", spec.name)));
        }
        let want = match deployment {
            Deployment::Individual { .. } => base,
            Deployment::Team { members } => base + members[1 - k].0.layout.len(),
        };
        if net.input_width() != want {
            return Err(Error::Dimension {
                context: "deployed xApp input width",
                expected: want,
                got: net.input_width(),
            });
        }
    }
    // Members absent from the configured order rank below it; a lone
    // proposer never needs a rank anyway.
    let mut priority = policy.priority.clone();
    for (spec, _) in members {
        if !priority.contains(&spec.name) {
            priority.push(spec.name.clone());
        }
    }
    let policy = MitigationPolicy {
        priority,
        rollback: policy.rollback && mitigation,
        ..policy.clone()
    };
    policy.validate()?;
    let params = env.params().clone();
    let k = params.num_users;
    let mut arbiter = Arbiter::new(policy);
    if !keep_log {
        arbiter = arbiter.without_log();
    }
    let mut run = EvalRun {
        steps,
        num_users: k,
        rates_mbps: Vec::with_capacity(steps * k),
        serving: Vec::with_capacity(steps * k),
        pf: Vec::with_capacity(steps),
        interrupts: InterruptCounts::default(),
        arbitration: None,
    };
    let fresh_last = || -> Vec<Vec<usize>> { members.iter().map(|(s, _)| vec![0; s.layout.len()]).collect() };
    let mut last = fresh_last();
    let mut obs = Vec::new();
    for t in 0..steps {
        if t % params.episode_len == 0 {
            obs = env.reset(rng).features();
            arbiter.reset(env);
            last = fresh_last();
        }
        let step = env.state().step_index;
        let mut proposals = Vec::with_capacity(members.len());
        let mut chosen = Vec::with_capacity(members.len());
        for (i, (spec, net)) in members.iter().enumerate() {
            let a = match deployment {
                Deployment::Individual { .. } => greedy_actions(net, &obs)?,
                Deployment::Team { members } => {
                    let peer = 1 - i;
                    greedy_actions(net, &with_peer(&obs, &members[peer].0.layout, &last[peer]))?
                }
            };
            proposals.push(spec.proposal(&a, step)?);
            chosen.push(a);
        }
        let (_, out) = arbiter.arbitrate(&proposals, env, rng)?;
        run.rates_mbps.extend_from_slice(&out.metrics.rates_mbps);
        run.serving.extend_from_slice(&out.metrics.serving);
        run.pf.push(out.reward);
        obs = out.observation.features();
        last = chosen;
    }
    run.interrupts = arbiter.counts();
    if keep_log {
        run.arbitration = Some(arbiter.log().to_vec());
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvParams;
    use crate::nn::LayerSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(spec: &XAppSpec, input: usize, seed: u64) -> QNet {
        QNet::init(
            LayerSpec { input, hidden: vec![6] },
            spec.layout.clone(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    fn params() -> EnvParams {
        EnvParams {
            episode_len: 7,
            ..EnvParams::default()
        }
    }

    #[test]
    fn single_xapp_is_deterministic_and_conflict_free() {
        let p = params();
        let spec = XAppSpec::distilled(&p);
        let d = Deployment::single(spec.clone(), net(&spec, p.observation_len(), 1));
        let run = |mitigation| {
            let mut env = CellularEnv::new(p.clone()).unwrap();
            evaluate(&d, &mut env, 30, &MitigationPolicy::default(), mitigation, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
        };
        let (a, b) = (run(true), run(true));
        assert_eq!(a, b);
        assert_eq!(a.rates_mbps.len(), 30 * p.num_users);
        assert_eq!(a.interrupts.direct_conflicts, 0);
        assert_eq!(a.interrupts.losers_discarded, 0);
        assert_eq!(run(false).interrupts.total(), 0);
    }

    #[test]
    fn two_xapps_report_conflicts() {
        let p = params();
        let (s1, s2) = (XAppSpec::xapp1(&p), XAppSpec::xapp2(&p));
        let w = p.observation_len();
        let d = Deployment::Individual {
            members: vec![(s1.clone(), net(&s1, w, 3)), (s2.clone(), net(&s2, w, 4))],
        };
        let mut env = CellularEnv::new(p.clone()).unwrap();
        let r = evaluate(&d, &mut env, 40, &MitigationPolicy::default(), true, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(r.pf.len(), 40);
        assert_eq!(r.interrupts.direct_conflicts, r.interrupts.losers_discarded);
    }

    #[test]
    fn team_input_width_checked() {
        let p = params();
        let (s1, s2) = (XAppSpec::xapp1(&p), XAppSpec::xapp2(&p));
        let w = p.observation_len();
        let ok = Deployment::Team {
            members: [(s1.clone(), net(&s1, w + s2.layout.len(), 1)), (s2.clone(), net(&s2, w + s1.layout.len(), 2))],
        };
        let bad = Deployment::Team {
            members: [(s1.clone(), net(&s1, w, 1)), (s2.clone(), net(&s2, w, 2))],
        };
        let mut env = CellularEnv::new(p).unwrap();
        let pol = MitigationPolicy::default();
        assert!(evaluate(&ok, &mut env, 10, &pol, true, &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
        assert!(matches!(
            evaluate(&bad, &mut env, 10, &pol, true, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn pf_summary_basics() {
        let s = PfSummary::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
    }
}
