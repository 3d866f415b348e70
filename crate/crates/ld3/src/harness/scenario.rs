//! The closed-loop run: truth propagation, sensor epochs, fusion, attack,
//! detection, and the control handoff from lane keeping to the safe stop.

use std::collections::VecDeque;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::angle::wrap_angle;
use crate::detector::{ld3_step, DetectorState};
use crate::lane::{ld_dev, simulate_ld_at};
use crate::map::Pose2D;
use crate::msf::MsfState;
use crate::safestop::{lateral_steering, safe_stop_control};
use crate::savior::{cusum_step, savior_residual, CusumParams, CusumState};
use crate::sensors::{simulate_lidar_locator, spoof_gps, AttackState, GpsSimulator};
use crate::vehicle::{bicycle_step, BicycleCoeffs, ControlCmd, VehicleState};

use super::config::ScenarioConfig;
use super::trace::{CtrlSource, TraceRow};
use super::HarnessError;

/// Outcome of one scenario run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub alarmed: bool,
    pub alarm_time: Option<f64>,
    /// Alarm time minus attack start; present only for attacked runs that
    /// alarmed.
    pub detection_latency: Option<f64>,
    /// Peak |lateral deviation| of the TRUE pose over the run.
    pub max_true_lateral_dev: f64,
    pub final_speed: f64,
    pub final_lateral_dev: f64,
    /// Peak per-sample detector disagreement (counted samples only).
    pub max_delta: f64,
    /// Peak windowed disagreement: the largest v such that the disagreement
    /// exceeded v for a full confirmation window. Sweeping a threshold over
    /// this statistic reproduces the detector's decision rule exactly.
    pub max_windowed_delta: f64,
    pub saw_off_map: bool,
    /// Set when `stop_at_true_dev` cut the run short.
    pub ended_early_at: Option<f64>,
    pub savior: Option<SaviorRunStats>,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct SaviorRunStats {
    pub max_score: f64,
    pub alarm_time: Option<f64>,
    pub detection_latency: Option<f64>,
}

/// The baseline detector run alongside a scenario: its own EKF driven by the
/// issued control commands, updated only by (possibly spoofed) GPS, with the
/// pre-update residual feeding a CUSUM detector.
#[derive(Debug, Clone)]
pub struct SaviorMonitor {
    coeffs: BicycleCoeffs,
    q_per_s: Matrix4<f64>,
    state: MsfState,
    params: Option<CusumParams>,
    cusum: Option<CusumState>,
    pub residuals: Vec<(f64, f64)>,
    pub max_score: f64,
    pub alarm_time: Option<f64>,
}

impl SaviorMonitor {
    /// Residual-collection mode: no CUSUM, used to gather calibration data.
    pub fn collector(coeffs: BicycleCoeffs, cfg: &ScenarioConfig) -> Self {
        Self::build(coeffs, cfg, None)
    }

    /// Detection mode with calibrated CUSUM parameters.
    pub fn detector(coeffs: BicycleCoeffs, cfg: &ScenarioConfig, params: CusumParams) -> Self {
        Self::build(coeffs, cfg, Some(params))
    }

    fn build(coeffs: BicycleCoeffs, cfg: &ScenarioConfig, params: Option<CusumParams>) -> Self {
        let init = VehicleState::new(
            cfg.initial.x,
            cfg.initial.y,
            cfg.initial.heading,
            cfg.initial.speed,
        );
        Self {
            coeffs,
            q_per_s: process_noise_per_s(cfg),
            state: MsfState::new(init, initial_covariance()),
            cusum: params.as_ref().map(|p| p.detector()),
            params,
            residuals: Vec::new(),
            max_score: 0.0,
            alarm_time: None,
        }
    }

    fn predict(&mut self, cmd: ControlCmd, dt: f64) {
        let q = self.q_per_s * dt;
        self.state = self.state.predict(cmd, dt, &self.coeffs, &q);
    }

    fn on_gps(&mut self, t: f64, m: &crate::sensors::Measurement) {
        let r = savior_residual(&self.state, m);
        self.residuals.push((t, r));
        if let (Some(params), Some(cusum)) = (&self.params, self.cusum.as_mut()) {
            *cusum = cusum_step(cusum, r, params.expected);
            self.max_score = self.max_score.max(cusum.score());
            if cusum.alarmed && self.alarm_time.is_none() {
                self.alarm_time = Some(t);
            }
        }
        // reported sensor covariances are floored positive, so the update
        // cannot go singular
        self.state = self.state.update(m).expect("GPS covariance is SPD");
    }
}

fn process_noise_per_s(cfg: &ScenarioConfig) -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(
        cfg.noise.q_pos,
        cfg.noise.q_pos,
        cfg.noise.q_heading,
        cfg.noise.q_speed,
    ))
}

fn initial_covariance() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(0.25, 0.25, 0.01, 0.25))
}

fn pose_of(msf: &MsfState) -> Pose2D {
    Pose2D::new(msf.mean[0], msf.mean[1], msf.mean[2])
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, HarnessError> {
    run_scenario_with_monitor(cfg, None)
}

/// Runs the scenario, optionally driving a [`SaviorMonitor`] with the same
/// commands and GPS stream the victim sees.
pub fn run_scenario_with_monitor(
    cfg: &ScenarioConfig,
    mut monitor: Option<&mut SaviorMonitor>,
) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let map = cfg.map.build()?;
    let dt = 1.0 / cfg.rates.control;
    let steps = (cfg.duration * cfg.rates.control).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let true_coeffs = BicycleCoeffs::default();
    let mut truth = VehicleState::new(
        cfg.initial.x,
        cfg.initial.y,
        cfg.initial.heading,
        cfg.initial.speed,
    );
    let mut msf = MsfState::new(truth, initial_covariance());
    let q_step = process_noise_per_s(cfg) * dt;

    let init_pose = Pose2D::new(truth.x, truth.y, truth.heading);
    let mut ctrl_lw = map
        .lane_width(init_pose)
        .map_err(|_| HarnessError::Config("initial pose is not on the map".into()))?;
    let mut ctrl_lane_heading = map.lane_point(init_pose)?.heading;
    let mut ctrl_d_ld = 0.0;
    let mut ctrl_heading_err = wrap_angle(truth.heading - ctrl_lane_heading);
    let mut attacker_lane_heading = ctrl_lane_heading;
    let mut last_cmd = ControlCmd::default();

    let mut attack = cfg
        .attack
        .as_ref()
        .map(|a| AttackState::new(a.d, a.f, a.direction));
    let mut det = DetectorState::new();
    let mut gps_sim = GpsSimulator::new(cfg.noise.gps);
    let target_speed = cfg.target_speed();

    let (mut gps_n, mut lidar_n, mut ld_n) = (1u64, 1u64, 1u64);
    let due = |n: u64, rate: f64, t: f64| rate > 0.0 && (n as f64) / rate <= t + 1e-9;

    let mut rows: Vec<TraceRow> = Vec::with_capacity(steps as usize);
    let mut max_true_dev = map.lane_dev_unbounded(init_pose).abs();
    let mut max_delta = 0.0f64;
    let mut max_windowed_delta = 0.0f64;
    let mut delta_window: VecDeque<f64> =
        VecDeque::with_capacity(cfg.detector.confirm_window as usize);
    let mut ended_early_at = None;

    for k in 0..steps {
        let t_next = (k + 1) as f64 * dt;

        // control command from current beliefs
        let (cmd, source) = if det.alarmed && cfg.intervene {
            // near standstill the position-derived speed estimate is too
            // noisy to decide "stopped"; hold the brakes through that band
            let v_est = msf.mean[3].max(0.0);
            let cmd = if v_est < 0.5 {
                ControlCmd::new(0.0, -cfg.safestop.decel)
            } else {
                safe_stop_control(ctrl_d_ld, ctrl_heading_err, v_est, dt, &cfg.safestop)
            };
            (cmd, CtrlSource::Ld)
        } else {
            let pose = pose_of(&msf);
            match (map.lane_dev(pose), map.lane_point(pose)) {
                (Ok(dev), Ok(lp)) => {
                    let herr = wrap_angle(msf.mean[2] - lp.heading);
                    let steering = lateral_steering(dev, herr, msf.mean[3], &cfg.safestop);
                    let target = target_speed
                        + cfg.control.speed_amplitude
                            * (std::f64::consts::TAU * t_next / cfg.control.speed_period).sin();
                    let accel = (cfg.control.kp_speed * (target - msf.mean[3]))
                        .clamp(cfg.control.accel_min, cfg.control.accel_max);
                    (ControlCmd::new(steering, accel), CtrlSource::Msf)
                }
                // believed pose off the map: hold the last command
                _ => (last_cmd, CtrlSource::Msf),
            }
        };
        last_cmd = cmd;

        // actuators execute the command imperfectly; truth integrates that
        let jit_s: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise.actuator_steering_sigma;
        let jit_a: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise.actuator_accel_sigma;
        // a held or braking vehicle at rest does not creep from actuator noise
        let accel_applied = if truth.speed == 0.0 && cmd.accel <= 0.0 {
            (cmd.accel + jit_a).min(0.0)
        } else {
            cmd.accel + jit_a
        };
        let applied = ControlCmd::new(cmd.steering + jit_s, accel_applied);
        truth = bicycle_step(truth, applied, dt, &true_coeffs);
        let true_pose = Pose2D::new(truth.x, truth.y, truth.heading);

        // filters predict on the issued command
        msf = msf.predict(cmd, dt, &true_coeffs, &q_step);
        if let Some(mon) = monitor.as_deref_mut() {
            mon.predict(cmd, dt);
        }

        // GPS epoch
        let mut row_gps = None;
        if due(gps_n, cfg.rates.gps, t_next) {
            gps_n += 1;
            let clean = gps_sim.sample(&truth, t_next, &mut rng);
            if let Ok(lp) = map.lane_point(true_pose) {
                attacker_lane_heading = lp.heading;
            }
            let mut spoofed = false;
            let meas = match (attack.as_mut(), cfg.attack.as_ref()) {
                (Some(a), Some(acfg)) if t_next + 1e-9 >= acfg.start_time => {
                    a.active = true;
                    spoofed = true;
                    spoof_gps(&clean, a, attacker_lane_heading)
                }
                _ => clean,
            };
            if let Some(mon) = monitor.as_deref_mut() {
                mon.on_gps(t_next, &meas);
            }
            // once alarmed (and allowed to act), the victim quarantines the
            // flagged GPS feed; the rest of the fusion keeps running
            if !(det.alarmed && cfg.intervene) {
                msf = msf.update(&meas)?;
            }
            row_gps = Some((meas.position.0, meas.position.1, spoofed));
        }

        // LiDAR locator epoch
        let mut row_lidar = None;
        if due(lidar_n, cfg.rates.lidar, t_next) {
            lidar_n += 1;
            let meas = simulate_lidar_locator(&truth, &cfg.noise.lidar, t_next, &mut rng);
            msf = msf.update(&meas)?;
            row_lidar = Some(meas.position);
        }

        // lane-detection epoch
        let mut row_ld = None;
        let mut row_d_ld = None;
        let mut row_d_msf = None;
        let mut row_delta = None;
        let mut row_counter = None;
        if due(ld_n, cfg.rates.ld, t_next) {
            ld_n += 1;
            let ld = simulate_ld_at(true_pose, &map, &cfg.ld, &mut rng, t_next);
            if cfg.detector_enabled {
                let (next, step) = ld3_step(&cfg.detector, &det, &ld, &msf, &map, t_next);
                det = next;
                row_d_ld = step.d_ld;
                row_d_msf = step.d_msf;
                row_delta = step.delta;
                row_counter = Some(det.consecutive_exceedances);
                if !step.frozen {
                    if let Some(delta) = step.delta {
                        max_delta = max_delta.max(delta);
                        if delta_window.len() == cfg.detector.confirm_window as usize {
                            delta_window.pop_front();
                        }
                        delta_window.push_back(delta);
                        if delta_window.len() == cfg.detector.confirm_window as usize {
                            let windowed =
                                delta_window.iter().copied().fold(f64::INFINITY, f64::min);
                            max_windowed_delta = max_windowed_delta.max(windowed);
                        }
                    }
                }
            }
            // the controller keeps its own LD-deviation memory, with the last
            // good lane width cached for when the believed pose leaves the map
            let msf_pose = pose_of(&msf);
            if let Ok(lw) = map.lane_width(msf_pose) {
                ctrl_lw = lw;
            }
            ctrl_d_ld = ld_dev(&ld, ctrl_lw, ctrl_d_ld).expect("cached lane width is positive");
            if let Ok(proj) = map.lane_point(msf_pose) {
                // lane heading at the LD-corrected pose: shift the projection
                // laterally by the LD deviation before asking the map again
                let corrected = Pose2D::new(
                    proj.x - ctrl_d_ld * proj.heading.sin(),
                    proj.y + ctrl_d_ld * proj.heading.cos(),
                    proj.heading,
                );
                ctrl_lane_heading = map
                    .lane_point(corrected)
                    .map(|lp| lp.heading)
                    .unwrap_or(proj.heading);
            }
            ctrl_heading_err = wrap_angle(msf.mean[2] - ctrl_lane_heading);
            row_ld = Some(ld);
        }

        let true_dev = map.lane_dev_unbounded(true_pose);
        max_true_dev = max_true_dev.max(true_dev.abs());

        rows.push(TraceRow {
            t: t_next,
            true_x: truth.x,
            true_y: truth.y,
            true_heading: truth.heading,
            true_speed: truth.speed,
            gps: row_gps,
            lidar: row_lidar,
            msf_x: msf.mean[0],
            msf_y: msf.mean[1],
            msf_heading: msf.mean[2],
            msf_speed: msf.mean[3],
            ld: row_ld,
            d_ld: row_d_ld,
            d_msf: row_d_msf,
            delta: row_delta,
            counter: row_counter,
            alarmed: det.alarmed,
            steering: cmd.steering,
            accel: cmd.accel,
            ctrl_source: source,
        });

        if let Some(limit) = cfg.stop_at_true_dev {
            if true_dev.abs() > limit {
                ended_early_at = Some(t_next);
                break;
            }
        }
    }

    let final_pose = Pose2D::new(truth.x, truth.y, truth.heading);
    let detection_latency = match (&cfg.attack, det.alarm_time) {
        (Some(a), Some(alarm)) => Some(alarm - a.start_time),
        _ => None,
    };
    let savior = monitor.map(|m| SaviorRunStats {
        max_score: m.max_score,
        alarm_time: m.alarm_time,
        detection_latency: match (&cfg.attack, m.alarm_time) {
            (Some(a), Some(alarm)) => Some(alarm - a.start_time),
            _ => None,
        },
    });

    Ok(RunResult {
        alarmed: det.alarmed,
        alarm_time: det.alarm_time,
        detection_latency,
        max_true_lateral_dev: max_true_dev,
        final_speed: truth.speed,
        final_lateral_dev: map.lane_dev_unbounded(final_pose),
        max_delta,
        max_windowed_delta,
        saw_off_map: det.saw_off_map,
        ended_early_at,
        savior,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::AttackConfig;
    use crate::sensors::SpoofDirection;

    fn benign_cfg(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        }
    }

    fn attacked_cfg(seed: u64, d: f64, f: f64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            attack: Some(AttackConfig {
                d,
                f,
                direction: SpoofDirection::Left,
                start_time: 10.0,
            }),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn benign_run_stays_in_lane_and_silent() {
        let res = run_scenario(&benign_cfg(1)).unwrap();
        assert!(!res.alarmed, "benign run alarmed at {:?}", res.alarm_time);
        assert!(
            res.max_true_lateral_dev < 0.3,
            "max dev {}",
            res.max_true_lateral_dev
        );
        assert!(res.final_speed > 10.0);
        assert!(!res.saw_off_map);
    }

    #[test]
    fn msf_tracks_truth_in_benign_runs() {
        let res = run_scenario(&benign_cfg(2)).unwrap();
        // steady-state position RMSE beats twice the better sensor's sigma
        let tail: Vec<&TraceRow> = res.rows.iter().filter(|r| r.t > 5.0).collect();
        let mse: f64 = tail
            .iter()
            .map(|r| (r.msf_x - r.true_x).powi(2) + (r.msf_y - r.true_y).powi(2))
            .sum::<f64>()
            / tail.len() as f64;
        let rmse = mse.sqrt();
        assert!(rmse < 0.2, "msf rmse {rmse}");
    }

    #[test]
    fn sensor_epoch_counts_match_rates() {
        let res = run_scenario(&benign_cfg(3)).unwrap();
        let gps = res.rows.iter().filter(|r| r.gps.is_some()).count() as i64;
        let lidar = res.rows.iter().filter(|r| r.lidar.is_some()).count() as i64;
        let ld = res.rows.iter().filter(|r| r.ld.is_some()).count() as i64;
        assert!((gps - 600).abs() <= 1, "gps epochs {gps}");
        assert!((lidar - 300).abs() <= 1, "lidar epochs {lidar}");
        assert!((ld - 1200).abs() <= 1, "ld epochs {ld}");
    }

    /// With all noise off, the two deviation views agree to roundoff, so
    /// even a vanishingly small threshold never alarms, straight or curved.
    #[test]
    fn zero_noise_benign_run_never_alarms_at_any_threshold() {
        for map in [
            super::super::config::MapSpec::Straight { length: 2000.0, width: 3.5 },
            super::super::config::MapSpec::Curved {
                radius: 500.0,
                arc_length: 1500.0,
                width: 3.5,
            },
        ] {
            let mut cfg = ScenarioConfig { map, seed: 99, ..ScenarioConfig::default() };
            cfg.noise.gps.sigma = 0.0;
            cfg.noise.lidar.sigma = 0.0;
            cfg.noise.lidar.inflate_prob = 0.0;
            cfg.noise.actuator_steering_sigma = 0.0;
            cfg.noise.actuator_accel_sigma = 0.0;
            cfg.ld = crate::lane::LdNoiseConfig::noiseless();
            cfg.detector.dev_threshold = 1e-9;
            let res = run_scenario(&cfg).unwrap();
            assert!(!res.alarmed, "alarmed with zero noise, max delta {}", res.max_delta);
            assert!(res.max_delta < 1e-9, "delta above roundoff: {}", res.max_delta);
        }
    }

    #[test]
    fn undefended_attack_causes_lane_departure() {
        let cfg = ScenarioConfig {
            detector_enabled: false,
            ..attacked_cfg(4, 2.0, 2.0)
        };
        let res = run_scenario(&cfg).unwrap();
        assert!(!res.alarmed);
        assert!(
            res.max_true_lateral_dev > 1.75,
            "expected lane departure, max dev {}",
            res.max_true_lateral_dev
        );
    }

    #[test]
    fn defended_attack_alarms_and_stops_in_lane() {
        let res = run_scenario(&attacked_cfg(5, 2.0, 2.0)).unwrap();
        assert!(res.alarmed);
        let latency = res.detection_latency.unwrap();
        assert!(latency >= 0.0, "alarm before attack start: {latency}");
        assert!(latency < 5.0, "detection took {latency}s");
        assert_eq!(res.final_speed, 0.0);
        assert!(
            res.final_lateral_dev.abs() <= 0.9,
            "stopped {} m off center",
            res.final_lateral_dev
        );
    }

    #[test]
    fn msf_error_grows_across_attack_cycles_once_spoof_dominates() {
        let cfg = ScenarioConfig {
            detector_enabled: false,
            stop_at_true_dev: Some(8.0),
            ..attacked_cfg(6, 2.0, 2.0)
        };
        let res = run_scenario(&cfg).unwrap();
        // lateral MSF error at GPS epochs after the spoof passes 30 m
        let mut errs = Vec::new();
        let mut offset = 2.0;
        for r in res.rows.iter().filter(|r| r.gps.is_some() && r.t >= 10.0) {
            if offset >= 30.0 {
                errs.push((r.msf_y - r.true_y).abs());
            }
            offset *= 2.0;
        }
        assert!(
            errs.len() >= 3,
            "want several dominated epochs, got {}",
            errs.len()
        );
        for w in errs.windows(2) {
            assert!(w[1] > w[0], "msf error not increasing: {errs:?}");
        }
    }

    #[test]
    fn post_alarm_rows_use_ld_control_only() {
        let res = run_scenario(&attacked_cfg(7, 2.0, 2.0)).unwrap();
        assert!(res.alarmed);
        let alarm_time = res.alarm_time.unwrap();
        // commands are issued at the start of a step; the verdict lands at its
        // end, so the handoff shows up from the row after the alarm onward
        for r in &res.rows {
            if r.t > alarm_time {
                assert_eq!(
                    r.ctrl_source,
                    CtrlSource::Ld,
                    "MSF control after alarm at t={}",
                    r.t
                );
            } else {
                assert_eq!(r.ctrl_source, CtrlSource::Msf);
            }
        }
    }

    #[test]
    fn identical_configs_give_identical_runs() {
        let a = run_scenario(&attacked_cfg(8, 1.0, 1.5)).unwrap();
        let b = run_scenario(&attacked_cfg(8, 1.0, 1.5)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.alarm_time, b.alarm_time);
    }

    #[test]
    fn stealthy_constant_offset_stays_sub_threshold() {
        let mut cfg = attacked_cfg(9, 0.405, 1.0);
        cfg.attack.as_mut().unwrap().d = 0.9 * cfg.detector.dev_threshold;
        let res = run_scenario(&cfg).unwrap();
        assert!(!res.alarmed, "stealthy attack alarmed");
        assert!(
            res.max_true_lateral_dev <= cfg.detector.dev_threshold + 0.3,
            "stealthy deviation {} exceeded bound",
            res.max_true_lateral_dev
        );
    }

    #[test]
    fn early_stop_truncates_the_run() {
        let cfg = ScenarioConfig {
            detector_enabled: false,
            stop_at_true_dev: Some(1.75),
            ..attacked_cfg(10, 2.0, 2.0)
        };
        let res = run_scenario(&cfg).unwrap();
        let t_end = res
            .ended_early_at
            .expect("undefended aggressive attack must take over");
        assert!(t_end > 10.0 && t_end < 60.0);
        assert_eq!(res.rows.last().unwrap().t, t_end);
    }

    #[test]
    fn curved_map_benign_run_is_silent() {
        let cfg = ScenarioConfig {
            map: super::super::config::MapSpec::Curved {
                radius: 400.0,
                arc_length: 1200.0,
                width: 3.5,
            },
            ..benign_cfg(11)
        };
        let res = run_scenario(&cfg).unwrap();
        assert!(!res.alarmed);
        assert!(
            res.max_true_lateral_dev < 0.5,
            "max dev {}",
            res.max_true_lateral_dev
        );
    }
}
