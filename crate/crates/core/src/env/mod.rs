//! Discrete-time downlink simulator: B base stations, K mobile users.
//!
//! One [`CellularEnv::step`] applies a [`JointAction`], moves the users,
//! recomputes channel gains and SINR, derives Shannon rates under the
//! applied RB allocation and cell powers, and returns the
//! proportional-fairness reward.

mod mobility;
mod params;
pub mod propagation;
pub mod radio;

use rand::Rng;

use crate::error::{ensure_len, Error, Result};

pub use mobility::{move_users, Walker};
pub use params::{dbm_to_watts, EnvParams};

/// Complete control setting for one step: serving BS per user (`None` is
/// the disconnect action), requested RB count per user, and transmit power
/// per BS.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub serving: Vec<Option<usize>>,
    pub rb_request: Vec<u32>,
    pub power_dbm: Vec<f64>,
}

impl JointAction {
    /// Controls used for slots no xApp owns: default cell power and an equal
    /// RB split, keeping the given serving cells.
    pub fn baseline(params: &EnvParams, serving: &[Option<usize>]) -> Self {
        Self {
            serving: serving.to_vec(),
            rb_request: vec![params.static_rb_split(); params.num_users],
            power_dbm: vec![params.default_power_dbm; params.num_bs],
        }
    }
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub positions: Vec<[f64; 2]>,
    pub serving: Vec<Option<usize>>,
    /// `gains[i][j]`: linear gain from BS `j` to user `i`.
    pub gains: Vec<Vec<f64>>,
    pub power_dbm: Vec<f64>,
    pub rb_request: Vec<u32>,
    /// RB counts after per-cell capacity enforcement.
    pub rb_alloc: Vec<u32>,
    /// `sinr[i][j]`: linear SINR of user `i` towards BS `j`.
    pub sinr: Vec<Vec<f64>>,
    pub rates_mbps: Vec<f64>,
    pub utilities: Vec<f64>,
    pub step_index: usize,
}

/// Flat state vector `[one-hot serving, SINR matrix, utilities]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub num_users: usize,
    pub num_bs: usize,
}

impl Observation {
    fn from_state(state: &NetworkState, num_bs: usize) -> Self {
        let k = state.positions.len();
        let mut values = Vec::with_capacity(k * (num_bs + 1) + k * num_bs + k);
        for s in &state.serving {
            let hot = s.map_or(0, |j| j + 1);
            values.extend((0..=num_bs).map(|slot| if slot == hot { 1.0 } else { 0.0 }));
        }
        for row in &state.sinr {
            values.extend_from_slice(row);
        }
        values.extend_from_slice(&state.utilities);
        Self {
            values,
            num_users: k,
            num_bs,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Network input features. SINR spans several decades, so it is fed as
    /// `ln(1 + sinr) / 10`; utilities are divided by 10. Same length as the
    /// raw vector.
    pub fn features(&self) -> Vec<f64> {
        let (k, b) = (self.num_users, self.num_bs);
        let hot_end = k * (b + 1);
        let sinr_end = hot_end + k * b;
        let mut out = self.values.clone();
        for v in &mut out[hot_end..sinr_end] {
            *v = v.ln_1p() / 10.0;
        }
        for v in &mut out[sinr_end..] {
            *v /= 10.0;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub serving: Vec<Option<usize>>,
    pub rb_alloc: Vec<u32>,
    pub rates_mbps: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub metrics: StepMetrics,
}

/// Scale every over-subscribed cell's requests to
/// `floor(req * total_rbs / total_requested)`; disconnected users get 0.
pub fn enforce_capacity(
    serving: &[Option<usize>],
    requests: &[u32],
    num_bs: usize,
    total_rbs: u32,
) -> Vec<u32> {
    let mut demand = vec![0u64; num_bs];
    for (s, &r) in serving.iter().zip(requests) {
        if let Some(j) = s {
            demand[*j] += r as u64;
        }
    }
    serving
        .iter()
        .zip(requests)
        .map(|(s, &r)| match s {
            None => 0,
            Some(j) if demand[*j] > total_rbs as u64 => {
                (r as u64 * total_rbs as u64 / demand[*j]) as u32
            }
            Some(_) => r,
        })
        .collect()
}

/// Write `action` into `state` as the pending controls: serving cells, RB
/// requests (capacity-enforced into `rb_alloc`) and cell powers.
pub fn apply_action(state: &mut NetworkState, action: &JointAction, params: &EnvParams) -> Result<()> {
    ensure_len("handover actions", params.num_users, action.serving.len())?;
    ensure_len("RB actions", params.num_users, action.rb_request.len())?;
    ensure_len("power actions", params.num_bs, action.power_dbm.len())?;
    if let Some(j) = action.serving.iter().flatten().find(|&&j| j >= params.num_bs) {
        return Err(Error::InvalidArgument(format!("serving BS {j} out of range")));
    }
    let lo = params.power_levels_dbm[0];
    let hi = *params.power_levels_dbm.last().unwrap();
    if let Some(p) = action.power_dbm.iter().find(|p| !(lo..=hi).contains(*p)) {
        return Err(Error::InvalidArgument(format!(
            "cell power {p} dBm outside [{lo}, {hi}]"
        )));
    }
    state.serving.clone_from(&action.serving);
    state.rb_request.clone_from(&action.rb_request);
    state.power_dbm.clone_from(&action.power_dbm);
    state.rb_alloc = enforce_capacity(
        &state.serving,
        &state.rb_request,
        params.num_bs,
        params.total_rbs,
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CellularEnv {
    params: EnvParams,
    sites: Vec<[f64; 2]>,
    noise_w: f64,
    walkers: Vec<Walker>,
    state: NetworkState,
}

impl CellularEnv {
    /// Build an environment. Users start at their configured positions (or
    /// the area center) until the first [`reset`](Self::reset).
    pub fn new(params: EnvParams) -> Result<Self> {
        params.validate()?;
        let sites = params.bs_sites();
        let noise_w = params.noise_power_w();
        let (k, b) = (params.num_users, params.num_bs);
        let positions = params
            .user_positions
            .clone()
            .unwrap_or_else(|| vec![[params.area_m[0] / 2.0, params.area_m[1] / 2.0]; k]);
        let walkers = positions
            .iter()
            .map(|&p| Walker {
                position: p,
                waypoint: p,
                speed: 0.0,
            })
            .collect();
        let state = NetworkState {
            positions,
            serving: vec![None; k],
            gains: vec![vec![0.0; b]; k],
            power_dbm: vec![params.default_power_dbm; b],
            rb_request: vec![params.static_rb_split(); k],
            rb_alloc: vec![0; k],
            sinr: vec![vec![0.0; b]; k],
            rates_mbps: vec![0.0; k],
            utilities: vec![0.0; k],
            step_index: 0,
        };
        let mut env = Self {
            params,
            sites,
            noise_w,
            walkers,
            state,
        };
        env.attach_strongest();
        Ok(env)
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn bs_sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise_w
    }

    /// Start a new episode: place users (fixed or uniform), draw their
    /// waypoints and speeds, attach each to its strongest cell and apply
    /// the baseline controls.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let params = &self.params;
        self.walkers = (0..params.num_users)
            .map(|i| {
                let start = match &params.user_positions {
                    Some(fixed) => fixed[i],
                    None => mobility::random_point(params, rng),
                };
                Walker::spawn(start, params, rng)
            })
            .collect();
        self.state.positions = self.walkers.iter().map(|w| w.position).collect();
        self.state.step_index = 0;
        self.attach_strongest();
        self.observation()
    }

    fn attach_strongest(&mut self) {
        self.refresh_gains();
        let serving: Vec<Option<usize>> = self
            .state
            .gains
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &g) in row.iter().enumerate() {
                    if g > row[best] {
                        best = j;
                    }
                }
                Some(best)
            })
            .collect();
        let baseline = JointAction::baseline(&self.params, &serving);
        apply_action(&mut self.state, &baseline, &self.params)
            .expect("baseline controls are valid by construction");
        self.refresh_link_state();
    }

    /// Teleport users (mobility targets are left in place) and recompute the
    /// link state under the current controls.
    pub fn set_positions(&mut self, positions: &[[f64; 2]]) -> Result<()> {
        ensure_len("user positions", self.params.num_users, positions.len())?;
        if positions.iter().any(|p| !self.params.contains(*p)) {
            return Err(Error::InvalidArgument("position outside area".into()));
        }
        for (w, p) in self.walkers.iter_mut().zip(positions) {
            w.position = *p;
        }
        self.state.positions = positions.to_vec();
        self.refresh_gains();
        self.refresh_link_state();
        Ok(())
    }

    pub fn observation(&self) -> Observation {
        Observation::from_state(&self.state, self.params.num_bs)
    }

    pub fn observation_len(&self) -> usize {
        self.params.observation_len()
    }

    /// Controls currently in effect.
    pub fn controls(&self) -> JointAction {
        JointAction {
            serving: self.state.serving.clone(),
            rb_request: self.state.rb_request.clone(),
            power_dbm: self.state.power_dbm.clone(),
        }
    }

    pub fn reward(&self) -> f64 {
        radio::proportional_fairness(&self.state.rates_mbps, self.params.rate_floor_mbps)
    }

    /// Apply `action`, move users, and recompute gains, SINR, rates,
    /// utilities and the PF reward.
    pub fn step<R: Rng + ?Sized>(&mut self, action: &JointAction, rng: &mut R) -> Result<StepOutcome> {
        apply_action(&mut self.state, action, &self.params)?;
        move_users(&mut self.walkers, &self.params, rng);
        self.state.positions = self.walkers.iter().map(|w| w.position).collect();
        self.state.step_index += 1;
        self.refresh_gains();
        self.refresh_link_state();
        Ok(self.outcome())
    }

    /// Re-apply `action` at the current positions without advancing time.
    pub fn reapply(&mut self, action: &JointAction) -> Result<StepOutcome> {
        apply_action(&mut self.state, action, &self.params)?;
        self.refresh_link_state();
        Ok(self.outcome())
    }

    fn outcome(&self) -> StepOutcome {
        let reward = self.reward();
        StepOutcome {
            observation: self.observation(),
            reward,
            metrics: StepMetrics {
                step: self.state.step_index,
                serving: self.state.serving.clone(),
                rb_alloc: self.state.rb_alloc.clone(),
                rates_mbps: self.state.rates_mbps.clone(),
                reward,
            },
        }
    }

    fn refresh_gains(&mut self) {
        let params = &self.params;
        let sites = &self.sites;
        self.state.gains = self
            .state
            .positions
            .iter()
            .map(|&u| {
                sites
                    .iter()
                    .map(|&s| propagation::channel_gain(s, u, params))
                    .collect()
            })
            .collect();
    }

    fn refresh_link_state(&mut self) {
        let powers_w: Vec<f64> = self.state.power_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
        let noise = self.noise_w;
        let b = self.params.num_bs;
        self.state.sinr = self
            .state
            .gains
            .iter()
            .map(|g| (0..b).map(|j| radio::sinr(g, &powers_w, j, noise)).collect())
            .collect();
        let sigma = self.params.rb_bandwidth_hz();
        self.state.rates_mbps = (0..self.params.num_users)
            .map(|i| match self.state.serving[i] {
                Some(j) => radio::data_rate_bps(self.state.rb_alloc[i], self.state.sinr[i][j], sigma) / 1e6,
                None => 0.0,
            })
            .collect();
        self.state.utilities = self
            .state
            .rates_mbps
            .iter()
            .map(|&r| radio::utility(r, &self.params))
            .collect();
    }
}
