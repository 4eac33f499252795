//! Random-waypoint mobility inside the rectangular service area.

use rand::Rng;

use super::params::EnvParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Walker {
    pub position: [f64; 2],
    pub waypoint: [f64; 2],
    pub speed: f64,
}

pub fn random_point<R: Rng + ?Sized>(params: &EnvParams, rng: &mut R) -> [f64; 2] {
    [
        rng.gen::<f64>() * params.area_m[0],
        rng.gen::<f64>() * params.area_m[1],
    ]
}

pub fn random_speed<R: Rng + ?Sized>(params: &EnvParams, rng: &mut R) -> f64 {
    let [lo, hi] = params.ue_speed_range;
    lo + (hi - lo) * rng.gen::<f64>()
}

impl Walker {
    pub fn spawn<R: Rng + ?Sized>(position: [f64; 2], params: &EnvParams, rng: &mut R) -> Self {
        Self {
            position,
            waypoint: random_point(params, rng),
            speed: random_speed(params, rng),
        }
    }

    /// Advance one step. On reaching the waypoint a fresh waypoint and speed
    /// are drawn; the remaining travel budget is dropped.
    pub fn advance<R: Rng + ?Sized>(&mut self, params: &EnvParams, rng: &mut R) {
        let budget = self.speed * params.step_duration_s;
        let dx = self.waypoint[0] - self.position[0];
        let dy = self.waypoint[1] - self.position[1];
        let remaining = dx.hypot(dy);
        if remaining <= budget {
            self.position = self.waypoint;
            self.waypoint = random_point(params, rng);
            self.speed = random_speed(params, rng);
        } else if budget > 0.0 {
            let f = budget / remaining;
            self.position = [self.position[0] + f * dx, self.position[1] + f * dy];
        }
        // Waypoints lie in the (convex) area, so this only trims rounding.
        self.position[0] = self.position[0].clamp(0.0, params.area_m[0]);
        self.position[1] = self.position[1].clamp(0.0, params.area_m[1]);
    }
}

/// Move every walker one step.
pub fn move_users<R: Rng + ?Sized>(walkers: &mut [Walker], params: &EnvParams, rng: &mut R) {
    for w in walkers {
        w.advance(params, rng);
    }
}
