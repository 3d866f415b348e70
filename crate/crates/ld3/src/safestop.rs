//! Lateral steering law and the post-alarm safe-stop controller.
//!
//! The same speed-scaled proportional law serves ordinary lane keeping and
//! the safe stop; what changes after an alarm is the deviation source (lane
//! detection instead of the compromised localizer) and the braking command.

use crate::vehicle::ControlCmd;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeStopConfig {
    /// Braking deceleration, m/s^2, applied as negative acceleration.
    pub decel: f64,
    /// Lateral feedback gain on the deviation term.
    pub k_lat: f64,
    /// Heading feedback gain.
    pub k_head: f64,
    /// Front-wheel angle saturation, radians.
    pub steering_limit: f64,
}

impl Default for SafeStopConfig {
    fn default() -> Self {
        Self {
            decel: 3.0,
            k_lat: 2.2,
            k_head: 2.8,
            steering_limit: 0.5,
        }
    }
}

impl SafeStopConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("decel", self.decel),
            ("k_lat", self.k_lat),
            ("k_head", self.k_head),
            ("steering_limit", self.steering_limit),
        ] {
            if !(v > 0.0) {
                return Err(format!("safestop {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Speed floor in the steering law so the deviation term stays bounded near
/// standstill.
pub const V_FLOOR: f64 = 1.0;

/// Proportional steering on lateral deviation and heading error, saturated at
/// the steering limit. Positive deviation (left of centerline) steers right.
pub fn lateral_steering(dev: f64, heading_err: f64, speed: f64, cfg: &SafeStopConfig) -> f64 {
    let raw = -cfg.k_lat * dev / speed.max(V_FLOOR) - cfg.k_head * heading_err;
    raw.clamp(-cfg.steering_limit, cfg.steering_limit)
}

/// Post-alarm command: brake at the configured deceleration (never past
/// standstill within one step of length `dt`) while steering back to the lane
/// center using the LD-derived deviation. A vehicle at rest commands zeros,
/// making rest a fixed point.
pub fn safe_stop_control(
    d_ld: f64,
    heading_err: f64,
    speed: f64,
    dt: f64,
    cfg: &SafeStopConfig,
) -> ControlCmd {
    if speed <= 0.0 {
        return ControlCmd::new(0.0, 0.0);
    }
    let accel = -cfg.decel.min(speed / dt);
    let steering = lateral_steering(d_ld, heading_err, speed, cfg);
    ControlCmd::new(steering, accel)
}
