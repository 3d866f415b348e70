//! Position sensors feeding the fusion filter, and the GPS spoofer that
//! attacks them.

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::vehicle::VehicleState;

/// Reported covariances are floored at this variance so a noiseless sensor
/// still produces an invertible innovation.
const MIN_VARIANCE: f64 = 1e-12;

/// Spoof offsets are capped here to keep long runs finite; an attack that has
/// grown anywhere near this magnitude took over the filter long ago.
pub const MAX_SPOOF_OFFSET: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    Gps,
    Lidar,
}

/// A 2-D position fix with its reported uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub position: (f64, f64),
    pub uncertainty: Matrix2<f64>,
    pub timestamp: f64,
}

/// GPS receiver stand-in: isotropic Gaussian noise, reported covariance equal
/// to the generating one.
pub fn simulate_gps(
    true_state: &VehicleState,
    sigma: f64,
    timestamp: f64,
    rng: &mut impl Rng,
) -> Measurement {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    Measurement {
        kind: MeasurementKind::Gps,
        position: (true_state.x + sigma * nx, true_state.y + sigma * ny),
        uncertainty: Matrix2::identity() * (sigma * sigma).max(MIN_VARIANCE),
        timestamp,
    }
}

/// GPS noise model with optional multipath excursions: occasional epochs
/// where the fix carries a large extra bias that persists for a few epochs,
/// the way urban consumer GNSS misbehaves. The reported covariance does not
/// flag the excursion; the receiver does not know it is wrong.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpsNoiseConfig {
    pub sigma: f64,
    /// Per-epoch probability that a multipath excursion begins.
    pub multipath_prob: f64,
    /// Scale of the excursion bias, per axis.
    pub multipath_sigma: f64,
    /// Per-epoch probability an ongoing excursion continues.
    pub multipath_continue: f64,
}

impl Default for GpsNoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            multipath_prob: 0.0,
            multipath_sigma: 8.0,
            multipath_continue: 0.5,
        }
    }
}

/// Stateful GPS source: Gaussian noise plus the multipath excursion process.
#[derive(Debug, Clone)]
pub struct GpsSimulator {
    cfg: GpsNoiseConfig,
    excursion: Option<(f64, f64)>,
}

impl GpsSimulator {
    pub fn new(cfg: GpsNoiseConfig) -> Self {
        Self {
            cfg,
            excursion: None,
        }
    }

    pub fn sample(
        &mut self,
        true_state: &VehicleState,
        timestamp: f64,
        rng: &mut impl Rng,
    ) -> Measurement {
        // fixed draw order keeps streams aligned across configs
        let keep = rng.gen::<f64>() < self.cfg.multipath_continue;
        let start = rng.gen::<f64>() < self.cfg.multipath_prob;
        let bx: f64 = rng.sample::<f64, _>(StandardNormal) * self.cfg.multipath_sigma;
        let by: f64 = rng.sample::<f64, _>(StandardNormal) * self.cfg.multipath_sigma;
        self.excursion = match self.excursion {
            Some(bias) if keep => Some(bias),
            _ if start => Some((bx, by)),
            _ => None,
        };
        let mut m = simulate_gps(true_state, self.cfg.sigma, timestamp, rng);
        if let Some((ex, ey)) = self.excursion {
            m.position.0 += ex;
            m.position.1 += ey;
        }
        m
    }
}

/// LiDAR locator noise model. Occasional epochs report an inflated
/// covariance, which exercises the fusion weighting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarNoiseConfig {
    pub sigma: f64,
    pub inflate_prob: f64,
    pub inflate_factor: f64,
}

impl Default for LidarNoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            inflate_prob: 0.02,
            inflate_factor: 25.0,
        }
    }
}

/// LiDAR locator stand-in. Position noise is Gaussian at `sigma`; with
/// probability `inflate_prob` the epoch reports its covariance scaled by
/// `inflate_factor`.
pub fn simulate_lidar_locator(
    true_state: &VehicleState,
    cfg: &LidarNoiseConfig,
    timestamp: f64,
    rng: &mut impl Rng,
) -> Measurement {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let inflated = rng.gen::<f64>() < cfg.inflate_prob;
    let base = (cfg.sigma * cfg.sigma).max(MIN_VARIANCE);
    let var = if inflated {
        base * cfg.inflate_factor
    } else {
        base
    };
    Measurement {
        kind: MeasurementKind::Lidar,
        position: (true_state.x + cfg.sigma * nx, true_state.y + cfg.sigma * ny),
        uncertainty: Matrix2::identity() * var,
        timestamp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpoofDirection {
    Left,
    Right,
}

/// GPS spoofer configuration and progression. The injected lateral offset is
/// `d * f^cycle`, doubling-style growth that drags the fusion filter once it
/// overcomes the other sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackState {
    /// Initial spoof offset, meters. Must be positive.
    pub d: f64,
    /// Per-cycle multiplier. Must be >= 1; `f = 1` is a constant offset.
    pub f: f64,
    pub cycle: u32,
    pub direction: SpoofDirection,
    pub active: bool,
}

impl AttackState {
    pub fn new(d: f64, f: f64, direction: SpoofDirection) -> Self {
        assert!(d > 0.0, "spoof offset d must be positive");
        assert!(f >= 1.0, "spoof multiplier f must be >= 1");
        Self {
            d,
            f,
            cycle: 0,
            direction,
            active: false,
        }
    }

    /// Offset magnitude the next spoofed epoch will inject.
    pub fn current_offset(&self) -> f64 {
        (self.d * self.f.powi(self.cycle as i32)).min(MAX_SPOOF_OFFSET)
    }
}

/// Applies the spoofer to a GPS fix. The offset is perpendicular to
/// `lane_heading`, toward the configured side; the reported uncertainty is
/// untouched so the fix stays exactly as trustworthy-looking as a real one.
/// Each spoofed epoch advances the cycle. An inactive attack passes the
/// measurement through unchanged.
pub fn spoof_gps(true_gps: &Measurement, a: &mut AttackState, lane_heading: f64) -> Measurement {
    if !a.active {
        return *true_gps;
    }
    let offset = a.current_offset();
    a.cycle += 1;
    // left normal of the lane direction
    let (nx, ny) = (-lane_heading.sin(), lane_heading.cos());
    let sign = match a.direction {
        SpoofDirection::Left => 1.0,
        SpoofDirection::Right => -1.0,
    };
    Measurement {
        position: (
            true_gps.position.0 + sign * offset * nx,
            true_gps.position.1 + sign * offset * ny,
        ),
        ..*true_gps
    }
}
