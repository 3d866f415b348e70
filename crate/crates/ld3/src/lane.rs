//! Lane-detection output modeling and its conversion to a signed lateral
//! deviation from the lane centerline.
//!
//! Detected lane lines are bird's-eye-view polynomials in the vehicle frame
//! (x forward, y positive left). The value at x = 0 is the lateral offset of
//! the line next to the vehicle, so its absolute value is the distance to
//! that line. Combining the closer line with the mapped lane width gives the
//! vehicle's signed deviation: `lw/2 - d_left` when the left line is used,
//! `d_right - lw/2` when the right line is used, falling back to the last
//! known deviation when neither line is usable.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::map::{Pose2D, SemanticMap};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LaneError {
    #[error("lane width must be positive, got {0}")]
    InvalidLaneWidth(f64),
}

/// A detected lane line as a polynomial y(x), coefficients lowest degree
/// first, capped at cubic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePoly {
    pub coeffs: [f64; 4],
}

impl LanePoly {
    pub fn new(coeffs: [f64; 4]) -> Self {
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "lane polynomial coefficients must be finite: {coeffs:?}"
        );
        Self { coeffs }
    }

    /// A constant-offset line (straight and parallel to the vehicle axis).
    pub fn constant(c0: f64) -> Self {
        Self::new([c0, 0.0, 0.0, 0.0])
    }

    /// Horner evaluation at longitudinal distance `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Lateral offset of the line at the vehicle (x = 0).
    pub fn offset_at_vehicle(&self) -> f64 {
        self.coeffs[0]
    }
}

/// One lane-detection sample: either line may be missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdOutput {
    pub left: Option<LanePoly>,
    pub right: Option<LanePoly>,
    pub timestamp: f64,
}

impl LdOutput {
    pub fn empty(timestamp: f64) -> Self {
        Self {
            left: None,
            right: None,
            timestamp,
        }
    }
}

/// Converts an LD sample to the signed lateral deviation from the lane
/// centerline (positive = left).
///
/// The line with the smaller distance to the vehicle wins, since a
/// mis-detected line (e.g. at a lane split) sits much farther away than the
/// correct one. With no usable line — both missing, or both at exactly the
/// same distance so neither strict comparison holds — the previous deviation
/// `last_d` is reused.
pub fn ld_dev(ld: &LdOutput, lw_map: f64, last_d: f64) -> Result<f64, LaneError> {
    if !(lw_map > 0.0) {
        return Err(LaneError::InvalidLaneWidth(lw_map));
    }
    let d_left = ld.left.map_or(f64::INFINITY, |p| p.eval(0.0).abs());
    let d_right = ld.right.map_or(f64::INFINITY, |p| p.eval(0.0).abs());
    let dev = if ld.left.is_some() && d_left < d_right {
        lw_map / 2.0 - d_left
    } else if ld.right.is_some() && d_right < d_left {
        d_right - lw_map / 2.0
    } else {
        last_d
    };
    Ok(dev)
}

/// Noise model for the synthetic LD sensor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdNoiseConfig {
    /// Gaussian noise on each line's constant term, meters.
    pub lateral_sigma: f64,
    /// Probability that a given line is missing from a sample.
    pub dropout_prob: f64,
    /// Probability that one line is mis-detected a full lane width farther out.
    pub wrong_line_prob: f64,
    pub seed: u64,
}

impl Default for LdNoiseConfig {
    fn default() -> Self {
        Self {
            lateral_sigma: 0.05,
            dropout_prob: 0.05,
            wrong_line_prob: 0.02,
            seed: 0,
        }
    }
}

impl LdNoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            lateral_sigma: 0.0,
            dropout_prob: 0.0,
            wrong_line_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("dropout_prob", self.dropout_prob),
            ("wrong_line_prob", self.wrong_line_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.lateral_sigma >= 0.0) {
            return Err(format!(
                "lateral_sigma must be >= 0, got {}",
                self.lateral_sigma
            ));
        }
        Ok(())
    }
}

/// Synthetic LD sensor: reconstructs what an ideal detector would report at
/// the true pose, then corrupts it per the noise config.
///
/// The vehicle at deviation `dev` (positive left) sees the left line at
/// lateral offset `lw/2 - dev` and the right line at `-(lw/2 + dev)`.
/// Intersections carry no lane markings, so both lines are absent there; the
/// same applies off-map, where there is nothing to detect. A mis-detected
/// line is displaced one lane width away from the vehicle, which keeps it the
/// farther of the two lines. All random draws happen up front in a fixed
/// order, so sample streams stay aligned across noise configs sharing a seed.
pub fn simulate_ld(
    true_pose: Pose2D,
    map: &SemanticMap,
    cfg: &LdNoiseConfig,
    rng: &mut impl Rng,
) -> LdOutput {
    simulate_ld_at(true_pose, map, cfg, rng, 0.0)
}

/// [`simulate_ld`] with an explicit timestamp for the emitted sample.
pub fn simulate_ld_at(
    true_pose: Pose2D,
    map: &SemanticMap,
    cfg: &LdNoiseConfig,
    rng: &mut impl Rng,
    timestamp: f64,
) -> LdOutput {
    // fixed draw schedule
    let noise_l: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.lateral_sigma;
    let noise_r: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.lateral_sigma;
    let drop_l = rng.gen::<f64>() < cfg.dropout_prob;
    let drop_r = rng.gen::<f64>() < cfg.dropout_prob;
    let wrong = rng.gen::<f64>() < cfg.wrong_line_prob;
    let wrong_left = rng.gen::<bool>();

    let in_intersection = match map.is_intersection(true_pose) {
        Ok(flag) => flag,
        Err(_) => return LdOutput::empty(timestamp),
    };
    if in_intersection {
        return LdOutput::empty(timestamp);
    }
    let (dev, lw) = match (map.lane_dev(true_pose), map.lane_width(true_pose)) {
        (Ok(dev), Ok(lw)) => (dev, lw),
        _ => return LdOutput::empty(timestamp),
    };

    let mut left_c0 = lw / 2.0 - dev + noise_l;
    let mut right_c0 = -(lw / 2.0 + dev) + noise_r;
    if wrong {
        // one lane width farther out, away from the vehicle
        if wrong_left {
            left_c0 += lw;
        } else {
            right_c0 -= lw;
        }
    }
    LdOutput {
        left: (!drop_l).then(|| LanePoly::constant(left_c0)),
        right: (!drop_r).then(|| LanePoly::constant(right_c0)),
        timestamp,
    }
}
