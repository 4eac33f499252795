use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and discretization constants of the simulated downlink.
///
/// Defaults follow the 5G NR 100 MHz profile: 273 resource blocks of
/// 360 kHz each with an 845 kHz guard band on either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    pub num_bs: usize,
    pub num_users: usize,
    /// Width and height of the service area in meters.
    pub area_m: [f64; 2],
    pub channel_bandwidth_mhz: f64,
    pub guard_bandwidth_khz: f64,
    pub rb_bandwidth_khz: f64,
    pub total_rbs: u32,
    /// Thermal noise density; integrated over the full channel unless
    /// `noise_power_dbm` overrides it.
    pub noise_density_dbm_hz: f64,
    pub noise_power_dbm: Option<f64>,
    /// Selectable transmit power levels, strictly increasing, in dBm.
    pub power_levels_dbm: Vec<f64>,
    /// Selectable per-user RB counts, strictly increasing.
    pub rb_options: Vec<u32>,
    /// Power used for cells whose power nobody controls.
    pub default_power_dbm: f64,
    /// Utility base `w`.
    pub utility_scale: f64,
    /// Utility clip `[L, U]` applied to `ln(r) / ln(w)`.
    pub utility_clip: [f64; 2],
    pub carrier_freq_mhz: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub ue_speed_range: [f64; 2],
    pub step_duration_s: f64,
    pub episode_len: usize,
    /// Rates are floored here (Mbps) before any logarithm.
    pub rate_floor_mbps: f64,
    /// Explicit BS sites; evenly spaced on a ring around the center when unset.
    pub bs_positions: Option<Vec<[f64; 2]>>,
    /// Fixed user start positions; uniformly drawn on every reset when unset.
    pub user_positions: Option<Vec<[f64; 2]>>,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            num_bs: 3,
            num_users: 5,
            area_m: [250.0, 250.0],
            channel_bandwidth_mhz: 100.0,
            guard_bandwidth_khz: 845.0,
            rb_bandwidth_khz: 360.0,
            total_rbs: 273,
            noise_density_dbm_hz: -174.0,
            noise_power_dbm: None,
            power_levels_dbm: vec![25.0, 27.5, 30.0, 32.5, 35.0],
            rb_options: vec![1, 16, 45, 91, 136],
            default_power_dbm: 30.0,
            utility_scale: 10.0,
            utility_clip: [-1.0, 1.0],
            carrier_freq_mhz: 900.0,
            bs_height_m: 50.0,
            ue_height_m: 1.5,
            ue_speed_range: [1.0, 2.0],
            step_duration_s: 1.0,
            episode_len: 100,
            rate_floor_mbps: 1e-3,
            bs_positions: None,
            user_positions: None,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_bs == 0 || self.num_users == 0 {
            return fail("num_bs and num_users must be at least 1".into());
        }
        if !(self.area_m[0] > 0.0 && self.area_m[1] > 0.0) {
            return fail(format!("area must be positive, got {:?}", self.area_m));
        }
        if !(self.rb_bandwidth_khz > 0.0) || self.total_rbs == 0 {
            return fail("RB bandwidth and total RB count must be positive".into());
        }
        if self.power_levels_dbm.is_empty() || !strictly_increasing(&self.power_levels_dbm) {
            return fail("power_levels_dbm must be non-empty and strictly increasing".into());
        }
        if let Some(p) = self
            .power_levels_dbm
            .iter()
            .find(|p| !(25.0..=35.0).contains(*p))
        {
            return fail(format!("power level {p} dBm outside [25, 35] dBm"));
        }
        let rbs: Vec<f64> = self.rb_options.iter().map(|&r| r as f64).collect();
        if rbs.is_empty() || !strictly_increasing(&rbs) {
            return fail("rb_options must be non-empty and strictly increasing".into());
        }
        if self.rb_options.last().copied().unwrap_or(0) > self.total_rbs {
            return fail("max rb_options exceeds total_rbs".into());
        }
        if !(self.utility_clip[0] < self.utility_clip[1]) {
            return fail("utility_clip must satisfy L < U".into());
        }
        if !(self.utility_scale > 1.0) {
            return fail("utility_scale w must exceed 1".into());
        }
        if !(self.rate_floor_mbps > 0.0) {
            return fail("rate_floor_mbps must be positive".into());
        }
        let [vmin, vmax] = self.ue_speed_range;
        if !(vmin >= 0.0 && vmin <= vmax) {
            return fail(format!("invalid ue_speed_range {:?}", self.ue_speed_range));
        }
        if !(self.step_duration_s > 0.0) || self.episode_len == 0 {
            return fail("step duration and episode length must be positive".into());
        }
        if !(self.carrier_freq_mhz > 0.0 && self.bs_height_m > 0.0 && self.ue_height_m > 0.0) {
            return fail("carrier frequency and antenna heights must be positive".into());
        }
        if let Some(sites) = &self.bs_positions {
            if sites.len() != self.num_bs {
                return fail(format!(
                    "bs_positions lists {} sites for {} base stations",
                    sites.len(),
                    self.num_bs
                ));
            }
        }
        if let Some(users) = &self.user_positions {
            if users.len() != self.num_users {
                return fail(format!(
                    "user_positions lists {} entries for {} users",
                    users.len(),
                    self.num_users
                ));
            }
            if users.iter().any(|p| !self.contains(*p)) {
                return fail("user_positions must lie inside the area".into());
            }
        }
        Ok(())
    }

    pub fn rb_bandwidth_hz(&self) -> f64 {
        self.rb_bandwidth_khz * 1e3
    }

    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_power_dbm.unwrap_or_else(|| {
            self.noise_density_dbm_hz + 10.0 * (self.channel_bandwidth_mhz * 1e6).log10()
        });
        dbm_to_watts(dbm)
    }

    pub fn bs_sites(&self) -> Vec<[f64; 2]> {
        if let Some(sites) = &self.bs_positions {
            return sites.clone();
        }
        let center = [self.area_m[0] / 2.0, self.area_m[1] / 2.0];
        if self.num_bs == 1 {
            return vec![center];
        }
        let radius = 0.3 * self.area_m[0].min(self.area_m[1]);
        (0..self.num_bs)
            .map(|j| {
                let theta = std::f64::consts::FRAC_PI_2
                    + 2.0 * std::f64::consts::PI * j as f64 / self.num_bs as f64;
                [center[0] + radius * theta.cos(), center[1] + radius * theta.sin()]
            })
            .collect()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0.0..=self.area_m[0]).contains(&p[0]) && (0.0..=self.area_m[1]).contains(&p[1])
    }

    /// Handover head width: disconnect plus one slot per BS.
    pub fn handover_width(&self) -> usize {
        self.num_bs + 1
    }

    /// Equal RB share used when nobody controls allocation.
    pub fn static_rb_split(&self) -> u32 {
        self.total_rbs / self.num_users as u32
    }

    /// Observation length: one-hot serving (K x (B+1)), SINR (K x B), utility (K).
    pub fn observation_len(&self) -> usize {
        let (k, b) = (self.num_users, self.num_bs);
        k * (b + 1) + k * b + k
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}
