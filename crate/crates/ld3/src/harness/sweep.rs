//! Batch experiments: attack-parameter sweeps with TPR/FPR/latency
//! aggregation, and the head-to-head against the physics-residual baseline.

use std::fmt::Write as _;
use std::path::Path;

use crate::roc::{roc_auc, roc_points, tpr_at_zero_fpr, RunLabel};
use crate::savior::CusumParams;
use crate::vehicle::{BicycleCoeffs, ControlCmd, VehicleState};

use super::config::{AttackConfig, Rates, ScenarioConfig};
use super::scenario::{run_scenario, run_scenario_with_monitor, SaviorMonitor};
use super::HarnessError;

/// A run's true lateral deviation passing this marks the attack as having
/// taken over; baseline scoring stops there because detection any later is
/// detection of a crash that already happened.
pub const TAKEOVER_DEV: f64 = 1.75;

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// `None` for benign runs, `(d, f)` for attacked ones.
    pub attack: Option<(f64, f64)>,
    pub seed: u64,
    pub alarmed: bool,
    pub alarm_time: Option<f64>,
    pub detection_latency: Option<f64>,
    pub max_true_lateral_dev: f64,
    pub final_speed: f64,
    pub final_lateral_dev: f64,
    /// Windowed-disagreement score; sweeping a threshold over it reproduces
    /// the detector's decision rule.
    pub ld3_score: f64,
    pub savior_score: Option<f64>,
    pub savior_latency: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub d: f64,
    pub f: f64,
    pub tpr: f64,
    pub mean_latency: Option<f64>,
    pub worst_true_dev: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<GridCell>,
    pub benign: Vec<RunSummary>,
    pub tpr: f64,
    pub fpr: f64,
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
}

fn summarize(cfg: &ScenarioConfig, attack: Option<(f64, f64)>) -> Result<RunSummary, HarnessError> {
    let res = run_scenario(cfg)?;
    Ok(RunSummary {
        attack,
        seed: cfg.seed,
        alarmed: res.alarmed,
        alarm_time: res.alarm_time,
        detection_latency: res.detection_latency,
        max_true_lateral_dev: res.max_true_lateral_dev,
        final_speed: res.final_speed,
        final_lateral_dev: res.final_lateral_dev,
        ld3_score: res.max_windowed_delta,
        savior_score: None,
        savior_latency: None,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Runs `seeds` attacked variants per `(d, f)` grid point plus `benign_runs`
/// attack-free runs, and aggregates detection metrics. Per-run seeds derive
/// deterministically from the base seed.
pub fn run_sweep(
    base: &ScenarioConfig,
    grid: &[(f64, f64)],
    seeds: u32,
    benign_runs: u32,
) -> Result<SweepResult, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    let (direction, start_time) = base
        .attack
        .as_ref()
        .map(|a| (a.direction, a.start_time))
        .unwrap_or((crate::sensors::SpoofDirection::Left, 10.0));

    let mut cells = Vec::with_capacity(grid.len());
    for (ci, &(d, f)) in grid.iter().enumerate() {
        let mut runs = Vec::with_capacity(seeds as usize);
        for rep in 0..seeds {
            let cfg = ScenarioConfig {
                seed: base.seed + 10_000 * (ci as u64 + 1) + rep as u64,
                attack: Some(AttackConfig {
                    d,
                    f,
                    direction,
                    start_time,
                }),
                ..base.clone()
            };
            runs.push(summarize(&cfg, Some((d, f)))?);
        }
        let alarmed = runs.iter().filter(|r| r.alarmed).count();
        cells.push(GridCell {
            d,
            f,
            tpr: alarmed as f64 / runs.len() as f64,
            mean_latency: mean(runs.iter().filter_map(|r| r.detection_latency)),
            worst_true_dev: runs
                .iter()
                .map(|r| r.max_true_lateral_dev)
                .fold(0.0, f64::max),
            runs,
        });
    }

    let mut benign = Vec::with_capacity(benign_runs as usize);
    for rep in 0..benign_runs {
        let cfg = ScenarioConfig {
            seed: base.seed + 777_000 + rep as u64,
            attack: None,
            ..base.clone()
        };
        benign.push(summarize(&cfg, None)?);
    }

    let attacked_total: usize = cells.iter().map(|c| c.runs.len()).sum();
    let attacked_alarmed: usize = cells
        .iter()
        .map(|c| c.runs.iter().filter(|r| r.alarmed).count())
        .sum();
    let benign_alarmed = benign.iter().filter(|r| r.alarmed).count();

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for c in &cells {
        for r in &c.runs {
            scores.push(r.ld3_score);
            labels.push(RunLabel::Attacked);
        }
    }
    for r in &benign {
        scores.push(r.ld3_score);
        labels.push(RunLabel::Benign);
    }
    let roc = if benign.is_empty() || attacked_total == 0 {
        Vec::new()
    } else {
        roc_points(&scores, &labels)?
    };
    let auc = if roc.is_empty() {
        f64::NAN
    } else {
        roc_auc(&roc)
    };

    Ok(SweepResult {
        cells,
        tpr: attacked_alarmed as f64 / attacked_total as f64,
        fpr: if benign.is_empty() {
            0.0
        } else {
            benign_alarmed as f64 / benign.len() as f64
        },
        benign,
        roc,
        auc,
    })
}

/// Comparison of the baseline detector against the lane-detection one over
/// the same runs.
#[derive(Debug, Clone)]
pub struct SaviorComparison {
    pub coeffs: BicycleCoeffs,
    pub cusum: CusumParams,
    pub runs: Vec<RunSummary>,
    pub savior_roc: Vec<(f64, f64)>,
    pub savior_auc: f64,
    pub savior_tpr_at_zero_fpr: f64,
    pub ld3_roc: Vec<(f64, f64)>,
    pub ld3_auc: f64,
    pub ld3_tpr_at_zero_fpr: f64,
    pub mean_savior_latency: Option<f64>,
    pub mean_ld3_latency: Option<f64>,
}

/// Fits bicycle coefficients to a benign sensed trace, then calibrates the
/// CUSUM on the residuals of a second benign run driven with those
/// coefficients.
///
/// The fitting drive swaps in a gently curving road and a modulated speed
/// target: identification needs excitation in both steering and
/// acceleration, which a straight cruise does not provide. The residual
/// calibration run then uses the base scenario unchanged.
pub fn calibrate_savior(
    base: &ScenarioConfig,
    calib_seed: u64,
) -> Result<(BicycleCoeffs, CusumParams), HarnessError> {
    let mut fit_cfg = ScenarioConfig {
        seed: calib_seed,
        attack: None,
        stop_at_true_dev: None,
        duration: 40.0,
        map: super::config::MapSpec::Curved {
            radius: 400.0,
            arc_length: 1500.0,
            width: 3.5,
        },
        ..base.clone()
    };
    fit_cfg.control.speed_amplitude = 2.5;
    fit_cfg.control.speed_period = 7.0;
    let res = run_scenario(&fit_cfg)?;
    let dt = 1.0 / fit_cfg.rates.control;
    // pair each sensed state with the command that advances it: commands are
    // logged on the row they act on, one row after the state they acted from
    let trace: Vec<(VehicleState, ControlCmd, f64)> = res
        .rows
        .windows(2)
        .map(|w| {
            (
                VehicleState::new(w[0].msf_x, w[0].msf_y, w[0].msf_heading, w[0].msf_speed),
                ControlCmd::new(w[1].steering, w[1].accel),
                dt,
            )
        })
        .collect();
    let coeffs = crate::vehicle::fit_bicycle_coeffs(&trace, BicycleCoeffs::default().wheelbase)?;

    let cfg2 = ScenarioConfig {
        seed: calib_seed + 1,
        attack: None,
        stop_at_true_dev: None,
        ..base.clone()
    };
    let mut collector = SaviorMonitor::collector(coeffs, &cfg2);
    run_scenario_with_monitor(&cfg2, Some(&mut collector))?;
    let residuals: Vec<f64> = collector.residuals.iter().map(|(_, r)| *r).collect();
    if residuals.is_empty() {
        return Err(HarnessError::Config(
            "calibration run produced no residuals".into(),
        ));
    }
    Ok((coeffs, CusumParams::calibrate(&residuals)))
}

/// A consumer-GNSS scenario for the baseline comparison: position fixes at
/// 1 Hz with 2 m noise and a mid-grade LiDAR locator, so the victim stays
/// accurate benignly yet takes over at moderate spoof offsets. Attacked runs
/// are truncated at takeover so both detectors are scored on what they saw
/// before the attack succeeded.
pub fn savior_reference_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        rates: Rates {
            control: 100.0,
            gps: 1.0,
            lidar: 2.0,
            ld: 20.0,
        },
        intervene: false,
        stop_at_true_dev: Some(TAKEOVER_DEV),
        attack: Some(AttackConfig {
            d: 2.0,
            f: 2.0,
            direction: crate::sensors::SpoofDirection::Left,
            start_time: 10.0,
        }),
        ..ScenarioConfig::default()
    };
    cfg.noise.gps.sigma = 2.0;
    cfg.noise.gps.multipath_prob = 0.025;
    cfg.noise.gps.multipath_sigma = 12.0;
    cfg.noise.gps.multipath_continue = 0.7;
    // same deployment rule as the default threshold: about six sigma of the
    // scenario's benign disagreement noise
    cfg.detector.dev_threshold = 1.5;
    cfg.noise.lidar.sigma = 0.4;
    cfg.noise.lidar.inflate_prob = 0.0;
    cfg.noise.q_pos = 0.12;
    cfg
}

/// Runs the baseline and the lane-detection detector side by side over
/// `attacked_runs` + `benign_runs` scenarios and assembles both ROCs.
pub fn run_savior_baseline(
    base: &ScenarioConfig,
    attacked_runs: u32,
    benign_runs: u32,
) -> Result<SaviorComparison, HarnessError> {
    if base.attack.is_none() {
        return Err(HarnessError::Config(
            "baseline comparison needs an [attack] section in the base config".into(),
        ));
    }
    if attacked_runs == 0 || benign_runs == 0 {
        // a single-class set has no ROC
        return Err(HarnessError::Roc(crate::roc::RocError::OneClassOnly));
    }
    let (coeffs, params) = calibrate_savior(base, base.seed + 500_000)?;

    let mut runs = Vec::with_capacity((attacked_runs + benign_runs) as usize);
    let mut scores_savior = Vec::new();
    let mut scores_ld3 = Vec::new();
    let mut labels = Vec::new();

    for (benign, count) in [(false, attacked_runs), (true, benign_runs)] {
        for rep in 0..count {
            let cfg = ScenarioConfig {
                seed: base.seed + if benign { 2_000 } else { 1_000 } + rep as u64,
                attack: if benign { None } else { base.attack },
                intervene: false,
                ..base.clone()
            };
            let mut monitor = SaviorMonitor::detector(coeffs, &cfg, params);
            let res = run_scenario_with_monitor(&cfg, Some(&mut monitor))?;
            let savior = res.savior.expect("monitor attached");
            scores_savior.push(savior.max_score);
            scores_ld3.push(res.max_windowed_delta);
            labels.push(if benign {
                RunLabel::Benign
            } else {
                RunLabel::Attacked
            });
            runs.push(RunSummary {
                attack: cfg.attack.as_ref().map(|a| (a.d, a.f)),
                seed: cfg.seed,
                alarmed: res.alarmed,
                alarm_time: res.alarm_time,
                detection_latency: res.detection_latency,
                max_true_lateral_dev: res.max_true_lateral_dev,
                final_speed: res.final_speed,
                final_lateral_dev: res.final_lateral_dev,
                ld3_score: res.max_windowed_delta,
                savior_score: Some(savior.max_score),
                savior_latency: savior.detection_latency,
            });
        }
    }

    let savior_roc = roc_points(&scores_savior, &labels)?;
    let ld3_roc = roc_points(&scores_ld3, &labels)?;
    Ok(SaviorComparison {
        coeffs,
        cusum: params,
        savior_auc: roc_auc(&savior_roc),
        savior_tpr_at_zero_fpr: tpr_at_zero_fpr(&savior_roc),
        ld3_auc: roc_auc(&ld3_roc),
        ld3_tpr_at_zero_fpr: tpr_at_zero_fpr(&ld3_roc),
        savior_roc,
        ld3_roc,
        mean_savior_latency: mean(runs.iter().filter_map(|r| r.savior_latency)),
        mean_ld3_latency: mean(
            runs.iter()
                .filter(|r| r.attack.is_some())
                .filter_map(|r| r.detection_latency),
        ),
        runs,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

/// Per-run metrics CSV; identical inputs produce identical bytes.
pub fn metrics_csv(runs: &[&RunSummary]) -> String {
    let mut out = String::from(
        "kind,d,f,seed,alarmed,alarm_time,detection_latency,max_true_lateral_dev,\
final_speed,final_lateral_dev,ld3_score,savior_score,savior_latency\n",
    );
    for r in runs {
        let (kind, d, f) = match r.attack {
            Some((d, f)) => ("attacked", format!("{d:.9}"), format!("{f:.9}")),
            None => ("benign", String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{kind},{d},{f},{seed},{alarmed},{alarm},{lat},{dev:.9},{speed:.9},{fdev:.9},{score:.9},{sav},{savlat}",
            seed = r.seed,
            alarmed = if r.alarmed { 1 } else { 0 },
            alarm = fmt_opt(r.alarm_time),
            lat = fmt_opt(r.detection_latency),
            dev = r.max_true_lateral_dev,
            speed = r.final_speed,
            fdev = r.final_lateral_dev,
            score = r.ld3_score,
            sav = fmt_opt(r.savior_score),
            savlat = fmt_opt(r.savior_latency),
        );
    }
    out
}

/// Per-cell aggregate CSV for a sweep.
pub fn sweep_summary_csv(result: &SweepResult) -> String {
    let mut out = String::from("d,f,runs,tpr,mean_latency,worst_true_dev\n");
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{:.9},{:.9},{},{:.9},{},{:.9}",
            c.d,
            c.f,
            c.runs.len(),
            c.tpr,
            fmt_opt(c.mean_latency),
            c.worst_true_dev
        );
    }
    let _ = writeln!(
        out,
        "overall,,{},{:.9},,{:.9}",
        result.cells.iter().map(|c| c.runs.len()).sum::<usize>() + result.benign.len(),
        result.tpr,
        result
            .cells
            .iter()
            .map(|c| c.worst_true_dev)
            .fold(0.0, f64::max)
    );
    let _ = writeln!(
        out,
        "benign,,{},fpr={:.9},,",
        result.benign.len(),
        result.fpr
    );
    out
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        let _ = writeln!(out, "{fpr:.9},{tpr:.9}");
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text)?;
    Ok(())
}
