//! Closed-loop study of GPS spoofing against multi-sensor-fusion (MSF)
//! localization in autonomous driving, and of a lane-detection-based defense.
//!
//! The crate simulates a victim vehicle (kinematic bicycle model), its
//! sensors (GPS, LiDAR locator, lane detection), the EKF localizer the
//! spoofer drags sideways, the lane-detection consistency detector with its
//! in-lane safe-stop controller, a physics-model + CUSUM baseline detector,
//! and a point-cloud lab for probing how LiDAR localization depends on lane
//! line markings.
//!
//! Modules:
//! - [`map`]: semantic map with lane-deviation / width / heading queries
//! - [`lane`]: lane-line polynomials, deviation conversion, synthetic LD sensor
//! - [`vehicle`], [`msf`], [`sensors`]: vehicle dynamics, EKF fusion, sensor
//!   models and the GPS spoofer
//! - [`detector`], [`safestop`]: the defense
//! - [`savior`], [`roc`]: the baseline detector and ROC scoring
//! - [`pcdlab`]: point-cloud experiments (ground RANSAC, marking edits,
//!   locator similarity metrics)
//! - [`harness`]: scenario configs, the closed-loop simulation, sweeps,
//!   traces and plots

pub mod angle;
pub mod detector;
pub mod harness;
pub mod lane;
pub mod map;
pub mod msf;
pub mod pcdlab;
pub mod roc;
pub mod safestop;
pub mod savior;
pub mod sensors;
pub mod vehicle;
