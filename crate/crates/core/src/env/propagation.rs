//! Large-scale propagation: urban Okumura-Hata path loss, no fast fading.

use super::params::EnvParams;

/// Distances below this many meters are treated as this distance.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Urban Hata median path loss in dB (small/medium city mobile correction).
///
/// `distance_m` is the horizontal BS-to-user distance.
pub fn hata_urban_db(distance_m: f64, freq_mhz: f64, bs_height_m: f64, ue_height_m: f64) -> f64 {
    let log_f = freq_mhz.log10();
    let mobile_correction = (1.1 * log_f - 0.7) * ue_height_m - (1.56 * log_f - 0.8);
    69.55 + 26.16 * log_f - 13.82 * bs_height_m.log10() - mobile_correction
        + (44.9 - 6.55 * bs_height_m.log10()) * (distance_m / 1000.0).log10()
}

/// Path loss for the configured carrier and antenna heights.
///
/// Distance is clamped below at [`MIN_DISTANCE_M`]; the loss is floored at
/// 0 dB so the resulting gain never exceeds unity.
pub fn path_loss(distance_m: f64, params: &EnvParams) -> f64 {
    let d = if distance_m.is_nan() {
        MIN_DISTANCE_M
    } else {
        distance_m.max(MIN_DISTANCE_M)
    };
    hata_urban_db(
        d,
        params.carrier_freq_mhz,
        params.bs_height_m,
        params.ue_height_m,
    )
    .max(0.0)
}

pub fn gain_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Linear channel gain between a BS site and a user position.
pub fn channel_gain(bs_site: [f64; 2], user: [f64; 2], params: &EnvParams) -> f64 {
    gain_from_loss_db(path_loss(distance(bs_site, user), params))
}
