//! Physics-model baseline detector: residuals between GPS fixes and the
//! EKF-predicted position, fed to a two-sided CUSUM change detector.

use crate::msf::MsfState;
use crate::sensors::Measurement;

/// Euclidean distance between the predicted position and a GPS fix.
pub fn savior_residual(pred: &MsfState, gps: &Measurement) -> f64 {
    let dx = pred.mean[0] - gps.position.0;
    let dy = pred.mean[1] - gps.position.1;
    (dx * dx + dy * dy).sqrt()
}

/// Two-sided CUSUM state. Both statistics are non-negative; the alarm latches
/// once either reaches the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumState {
    pub s_pos: f64,
    pub s_neg: f64,
    /// Drift allowance subtracted from each deviation before accumulating.
    pub drift: f64,
    /// Alarm threshold on either statistic.
    pub threshold: f64,
    pub alarmed: bool,
}

impl CusumState {
    pub fn new(drift: f64, threshold: f64) -> Self {
        Self {
            s_pos: 0.0,
            s_neg: 0.0,
            drift,
            threshold,
            alarmed: false,
        }
    }

    pub fn score(&self) -> f64 {
        self.s_pos.max(self.s_neg)
    }
}

/// One CUSUM update with deviation `e = residual - expected`:
///
/// ```text
/// s_pos' = max(0, s_pos + e - drift)
/// s_neg' = max(0, s_neg - e - drift)
/// ```
///
/// The alarm fires when either statistic reaches the threshold.
pub fn cusum_step(cs: &CusumState, residual: f64, expected: f64) -> CusumState {
    let e = residual - expected;
    let s_pos = (cs.s_pos + e - cs.drift).max(0.0);
    let s_neg = (cs.s_neg - e - cs.drift).max(0.0);
    let alarmed = cs.alarmed || s_pos >= cs.threshold || s_neg >= cs.threshold;
    CusumState {
        s_pos,
        s_neg,
        alarmed,
        ..*cs
    }
}

/// CUSUM parameters derived from a benign residual series: the expected value
/// is the calibration mean, the drift allowance is one calibration standard
/// deviation, and the threshold is ten drifts. The drift is floored at a tiny
/// positive value so a noiseless calibration still yields a usable detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumParams {
    pub expected: f64,
    pub drift: f64,
    pub threshold: f64,
}

impl CusumParams {
    pub fn calibrate(residuals: &[f64]) -> Self {
        assert!(
            !residuals.is_empty(),
            "calibration needs at least one residual"
        );
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let var = residuals
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / n;
        let drift = var.sqrt().max(1e-6);
        Self {
            expected: mean,
            drift,
            threshold: 10.0 * drift,
        }
    }

    pub fn detector(&self) -> CusumState {
        CusumState::new(self.drift, self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::MeasurementKind;
    use crate::vehicle::VehicleState;
    use nalgebra::{Matrix2, Matrix4};

    fn pred_at(x: f64, y: f64) -> MsfState {
        MsfState::new(VehicleState::new(x, y, 0.0, 5.0), Matrix4::identity())
    }

    fn gps_at(x: f64, y: f64) -> Measurement {
        Measurement {
            kind: MeasurementKind::Gps,
            position: (x, y),
            uncertainty: Matrix2::identity() * 0.25,
            timestamp: 0.0,
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(savior_residual(&pred_at(1.0, 2.0), &gps_at(1.0, 2.0)), 0.0);
        assert_eq!(savior_residual(&pred_at(0.0, 0.0), &gps_at(3.0, 4.0)), 5.0);
        // translation invariance
        let a = savior_residual(&pred_at(0.3, -0.7), &gps_at(1.3, 0.4));
        let b = savior_residual(&pred_at(10.3, 99.3), &gps_at(11.3, 100.4));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn matched_residuals_keep_statistics_at_zero() {
        let mut cs = CusumState::new(0.5, 10.0);
        for _ in 0..1000 {
            cs = cusum_step(&cs, 1.0, 1.0);
            assert_eq!(cs.s_pos, 0.0);
            assert_eq!(cs.s_neg, 0.0);
        }
        assert!(!cs.alarmed);
    }

    #[test]
    fn unit_excess_alarms_at_step_matching_threshold() {
        // e = drift + 1 every step, so s_pos(k) = k; threshold 10 -> step 10
        let b = 0.7;
        let mut cs = CusumState::new(b, 10.0);
        let mut alarm_step = None;
        for k in 1..=20 {
            cs = cusum_step(&cs, b + 1.0, 0.0);
            assert!((cs.s_pos - k as f64).abs() < 1e-12 || cs.alarmed);
            if cs.alarmed && alarm_step.is_none() {
                alarm_step = Some(k);
            }
        }
        assert_eq!(alarm_step, Some(10));
    }

    #[test]
    fn spike_decays_by_drift_per_step() {
        let b = 0.25;
        let mut cs = CusumState::new(b, 100.0);
        cs = cusum_step(&cs, 8.0 + b, 0.0); // spike: s_pos = 8
        assert!((cs.s_pos - 8.0).abs() < 1e-12);
        for k in 1..=5 {
            cs = cusum_step(&cs, 0.0, 0.0);
            assert!((cs.s_pos - (8.0 - k as f64 * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn statistics_stay_non_negative_and_bounded_deviations_never_alarm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let b = 0.5;
        let mut cs = CusumState::new(b, 3.0);
        for _ in 0..20_000 {
            // |e| <= drift: within the allowance
            let e = rng.gen_range(-b..=b);
            cs = cusum_step(&cs, e, 0.0);
            assert!(cs.s_pos >= 0.0 && cs.s_neg >= 0.0);
        }
        assert!(!cs.alarmed);
    }

    #[test]
    fn negative_shift_trips_the_other_side() {
        let mut cs = CusumState::new(0.1, 5.0);
        for _ in 0..10 {
            cs = cusum_step(&cs, -1.0, 0.0);
        }
        assert!(cs.alarmed);
        assert!(cs.s_neg >= 5.0);
        assert_eq!(cs.s_pos, 0.0);
    }

    #[test]
    fn vanishing_threshold_alarms_on_any_excess() {
        // degenerate h -> 0+: the first sample beyond the allowance trips it
        let mut cs = CusumState::new(0.1, 1e-12);
        cs = cusum_step(&cs, 0.2, 0.0);
        assert!(cs.alarmed);
    }

    #[test]
    fn alarm_latches() {
        let mut cs = CusumState::new(0.1, 1.0);
        cs = cusum_step(&cs, 5.0, 0.0);
        assert!(cs.alarmed);
        for _ in 0..100 {
            cs = cusum_step(&cs, 0.0, 0.0);
            assert!(cs.alarmed);
        }
    }

    #[test]
    fn calibration_matches_series_moments() {
        let residuals = [1.0, 2.0, 3.0, 4.0];
        let p = CusumParams::calibrate(&residuals);
        assert!((p.expected - 2.5).abs() < 1e-12);
        let var = (1.5f64.powi(2) + 0.5f64.powi(2) + 0.5f64.powi(2) + 1.5f64.powi(2)) / 4.0;
        assert!((p.drift - var.sqrt()).abs() < 1e-12);
        assert!((p.threshold - 10.0 * p.drift).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Statistics never go negative, and deviations within the drift
            /// allowance never alarm.
            #[test]
            fn statistics_non_negative_and_allowance_is_safe(
                drift in 0.05f64..2.0,
                threshold in 0.5f64..20.0,
                steps in proptest::collection::vec(-1.0f64..1.0, 1..400),
            ) {
                let mut cs = CusumState::new(drift, threshold);
                for frac in steps {
                    cs = cusum_step(&cs, frac * drift, 0.0);
                    prop_assert!(cs.s_pos >= 0.0);
                    prop_assert!(cs.s_neg >= 0.0);
                }
                prop_assert!(!cs.alarmed);
            }
        }
    }

    #[test]
    fn zero_variance_calibration_still_usable() {
        let p = CusumParams::calibrate(&[0.5, 0.5, 0.5]);
        assert!(p.drift > 0.0);
        let mut cs = p.detector();
        for _ in 0..100 {
            cs = cusum_step(&cs, 0.5, p.expected);
        }
        assert!(!cs.alarmed, "flat benign residuals must not alarm");
    }
}
