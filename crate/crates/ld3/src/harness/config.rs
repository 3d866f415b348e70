//! Scenario configuration: a TOML file of `key = value` sections mapping
//! directly onto the structs below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::lane::LdNoiseConfig;
use crate::map::SemanticMap;
use crate::safestop::SafeStopConfig;
use crate::sensors::{GpsNoiseConfig, LidarNoiseConfig, SpoofDirection};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub map: MapSpec,
    /// Simulated run length, seconds.
    pub duration: f64,
    pub seed: u64,
    /// Stop the run early once the true pose deviates this far laterally;
    /// used to cut attacked runs off at the point the attack has won.
    pub stop_at_true_dev: Option<f64>,
    /// When false the detector still runs and scores, but control never
    /// hands over to the safe stop.
    pub intervene: bool,
    pub detector_enabled: bool,
    pub rates: Rates,
    pub noise: NoiseConfig,
    pub ld: LdNoiseConfig,
    pub attack: Option<AttackConfig>,
    pub detector: DetectorConfig,
    pub safestop: SafeStopConfig,
    pub control: ControlConfig,
    pub initial: InitialState,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::default(),
            duration: 60.0,
            seed: 0,
            stop_at_true_dev: None,
            intervene: true,
            detector_enabled: true,
            rates: Rates::default(),
            noise: NoiseConfig::default(),
            ld: LdNoiseConfig::default(),
            attack: None,
            detector: DetectorConfig::default(),
            safestop: SafeStopConfig::default(),
            control: ControlConfig::default(),
            initial: InitialState::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Straight {
        length: f64,
        width: f64,
    },
    Curved {
        radius: f64,
        arc_length: f64,
        width: f64,
    },
    File {
        path: String,
    },
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Straight {
            length: 2000.0,
            width: 3.5,
        }
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<SemanticMap, HarnessError> {
        let map = match self {
            MapSpec::Straight { length, width } => SemanticMap::straight(*length, *width)?,
            MapSpec::Curved {
                radius,
                arc_length,
                width,
            } => SemanticMap::arc(*radius, *arc_length, *width)?,
            MapSpec::File { path } => SemanticMap::load(path)?,
        };
        Ok(map)
    }
}

/// Sensor and loop rates, Hz. A rate of zero disables that sensor; the
/// control loop, GPS, and LD must all run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub control: f64,
    pub gps: f64,
    pub lidar: f64,
    pub ld: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            control: 100.0,
            gps: 10.0,
            lidar: 5.0,
            ld: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub gps: GpsNoiseConfig,
    pub lidar: LidarNoiseConfig,
    /// Actuator noise: the executed command differs from the issued one.
    pub actuator_steering_sigma: f64,
    pub actuator_accel_sigma: f64,
    /// EKF process-noise intensities, variance per second per state.
    pub q_pos: f64,
    pub q_heading: f64,
    pub q_speed: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gps: GpsNoiseConfig::default(),
            lidar: LidarNoiseConfig::default(),
            actuator_steering_sigma: 0.004,
            actuator_accel_sigma: 0.05,
            q_pos: 5e-3,
            q_heading: 5e-4,
            q_speed: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub d: f64,
    pub f: f64,
    pub direction: SpoofDirection,
    pub start_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Cruise speed target; defaults to the initial speed.
    pub target_speed: Option<f64>,
    pub kp_speed: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    /// Sinusoidal modulation of the speed target, for drives that need
    /// longitudinal excitation (system identification).
    pub speed_amplitude: f64,
    pub speed_period: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            target_speed: None,
            kp_speed: 0.8,
            accel_min: -5.0,
            accel_max: 2.5,
            speed_amplitude: 0.0,
            speed_period: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            x: 5.0,
            y: 0.0,
            heading: 0.0,
            speed: 15.0,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        if !(self.duration > 0.0) {
            return err(format!("duration must be positive, got {}", self.duration));
        }
        for (name, rate) in [
            ("control", self.rates.control),
            ("gps", self.rates.gps),
            ("ld", self.rates.ld),
        ] {
            if !(rate > 0.0) {
                return err(format!("rates.{name} must be positive, got {rate}"));
            }
        }
        // the loop steps at the control rate, so sensors cannot run faster
        for (name, rate) in [
            ("gps", self.rates.gps),
            ("lidar", self.rates.lidar),
            ("ld", self.rates.ld),
        ] {
            if rate > self.rates.control {
                return err(format!(
                    "rates.{name} ({rate}) cannot exceed rates.control ({})",
                    self.rates.control
                ));
            }
        }
        if !(self.rates.lidar >= 0.0) {
            return err(format!(
                "rates.lidar must be >= 0, got {}",
                self.rates.lidar
            ));
        }
        if !(self.noise.gps.sigma >= 0.0) {
            return err(format!(
                "noise.gps.sigma must be >= 0, got {}",
                self.noise.gps.sigma
            ));
        }
        for (name, p) in [
            ("multipath_prob", self.noise.gps.multipath_prob),
            ("multipath_continue", self.noise.gps.multipath_continue),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("noise.gps.{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, q) in [
            ("q_pos", self.noise.q_pos),
            ("q_heading", self.noise.q_heading),
            ("q_speed", self.noise.q_speed),
        ] {
            if !(q > 0.0) {
                return err(format!("noise.{name} must be positive, got {q}"));
            }
        }
        self.ld.validate().map_err(HarnessError::Config)?;
        self.detector.validate().map_err(HarnessError::Config)?;
        self.safestop.validate().map_err(HarnessError::Config)?;
        if let Some(a) = &self.attack {
            if !(a.d > 0.0) {
                return err(format!("attack.d must be positive, got {}", a.d));
            }
            if !(a.f >= 1.0) {
                return err(format!("attack.f must be >= 1, got {}", a.f));
            }
            if !(a.start_time >= 0.0 && a.start_time < self.duration) {
                return err(format!(
                    "attack.start_time must lie in [0, duration), got {}",
                    a.start_time
                ));
            }
        }
        if !(self.initial.speed >= 0.0) {
            return err(format!(
                "initial.speed must be >= 0, got {}",
                self.initial.speed
            ));
        }
        Ok(())
    }

    pub fn target_speed(&self) -> f64 {
        self.control.target_speed.unwrap_or(self.initial.speed)
    }
}
