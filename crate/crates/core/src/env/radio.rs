//! Link-level formulas: SINR, Shannon rate, utility and the
//! proportional-fairness reward.

use super::params::EnvParams;

/// SINR of a user towards BS `bs`, treating every other BS's configured
/// power as interference.
///
/// `gains[k]` is the user's linear gain to BS `k` and `powers_w[k]` the
/// transmit power of BS `k` in watts.
pub fn sinr(gains: &[f64], powers_w: &[f64], bs: usize, noise_w: f64) -> f64 {
    debug_assert_eq!(gains.len(), powers_w.len());
    if gains[bs] == 0.0 {
        return 0.0;
    }
    let interference: f64 = gains
        .iter()
        .zip(powers_w)
        .enumerate()
        .filter(|&(k, _)| k != bs)
        .map(|(_, (h, p))| h * p)
        .sum();
    powers_w[bs] * gains[bs] / (noise_w + interference)
}

/// Shannon rate in bits/s over `rbs` resource blocks of `rb_bandwidth_hz`.
pub fn data_rate_bps(rbs: u32, sinr: f64, rb_bandwidth_hz: f64) -> f64 {
    if rbs == 0 || sinr <= 0.0 {
        return 0.0;
    }
    rb_bandwidth_hz * rbs as f64 * sinr.ln_1p() / std::f64::consts::LN_2
}

/// `10 * clip(ln(r) / ln(w), L, U)` with `r` in Mbps floored at the rate floor.
pub fn utility(rate_mbps: f64, params: &EnvParams) -> f64 {
    let r = rate_mbps.max(params.rate_floor_mbps);
    let [lo, hi] = params.utility_clip;
    10.0 * (r.ln() / params.utility_scale.ln()).clamp(lo, hi)
}

/// Sum of natural-log rates (Mbps), each floored at `floor_mbps`.
pub fn proportional_fairness(rates_mbps: &[f64], floor_mbps: f64) -> f64 {
    rates_mbps.iter().map(|r| r.max(floor_mbps).ln()).sum()
}
