//! Spoofing detector: cross-checks the lateral deviation implied by lane
//! detection against the one implied by the fused localization pose.
//!
//! Lane detection measures where the vehicle actually sits in its lane; the
//! localizer claims where the vehicle is on the map. Under GPS spoofing the
//! localizer pose drifts sideways while the camera keeps seeing the true lane
//! geometry, so the two deviations diverge. A per-sample disagreement
//! threshold plus a consecutive-exceedance window turns that divergence into
//! a latched alarm while staying silent under ordinary sensor noise.

use crate::lane::{ld_dev, LdOutput};
use crate::map::SemanticMap;
use crate::msf::MsfState;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Per-sample |D_ld - D_msf| disagreement threshold, meters.
    pub dev_threshold: f64,
    /// Consecutive exceedances required before alarming.
    pub confirm_window: u32,
    /// Freeze the detector inside intersections, which carry no lane markings.
    pub suspend_in_intersection: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        // 0.45 m sits far above the combined LD+map noise floor under default
        // sigmas yet well below half a lane width; 5 samples at 20 Hz adds a
        // 0.25 s confirmation delay.
        Self {
            dev_threshold: 0.45,
            confirm_window: 5,
            suspend_in_intersection: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dev_threshold > 0.0) {
            return Err(format!(
                "dev_threshold must be positive, got {}",
                self.dev_threshold
            ));
        }
        if self.confirm_window < 1 {
            return Err("confirm_window must be >= 1".into());
        }
        Ok(())
    }
}

/// Detector memory carried between samples. The alarm is latched: once set it
/// never clears within a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorState {
    pub consecutive_exceedances: u32,
    /// Last computed LD deviation, reused when both lane lines are unusable.
    pub last_d: f64,
    pub alarmed: bool,
    pub alarm_time: Option<f64>,
    /// Set when the localizer pose has ever fallen outside map query range —
    /// suspicious on its own, but reported separately rather than alarmed on.
    pub saw_off_map: bool,
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            consecutive_exceedances: 0,
            last_d: 0.0,
            alarmed: false,
            alarm_time: None,
            saw_off_map: false,
        }
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Benign,
    Alarm,
}

/// Everything one detector step produces, for logging and control handoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ld3Step {
    pub verdict: Verdict,
    pub d_ld: Option<f64>,
    pub d_msf: Option<f64>,
    pub delta: Option<f64>,
    /// True when this sample did not advance the exceedance counter
    /// (intersection suspension or off-map localizer pose).
    pub frozen: bool,
}

/// Advances the detector by one lane-detection sample.
///
/// Frozen samples (inside an intersection when suspension is on, or with the
/// localizer pose off-map) leave the counter and `last_d` untouched and stay
/// benign. Otherwise the exceedance counter increments when the disagreement
/// crosses the threshold and resets to zero when it does not; the alarm
/// latches once the counter reaches the confirmation window.
pub fn ld3_step(
    cfg: &DetectorConfig,
    st: &DetectorState,
    ld: &LdOutput,
    msf: &MsfState,
    map: &SemanticMap,
    t: f64,
) -> (DetectorState, Ld3Step) {
    let mut next = *st;
    let pose = msf.as_vehicle_state();
    let pose = crate::map::Pose2D::new(pose.x, pose.y, pose.heading);

    let queries = map.is_intersection(pose).and_then(|in_intersection| {
        let lw = map.lane_width(pose)?;
        let d_msf = map.lane_dev(pose)?;
        Ok((in_intersection, lw, d_msf))
    });

    let (in_intersection, lw, d_msf) = match queries {
        Ok(q) => q,
        Err(_) => {
            next.saw_off_map = true;
            let verdict = if next.alarmed {
                Verdict::Alarm
            } else {
                Verdict::Benign
            };
            return (
                next,
                Ld3Step {
                    verdict,
                    d_ld: None,
                    d_msf: None,
                    delta: None,
                    frozen: true,
                },
            );
        }
    };

    // lw > 0 is a map invariant, so the conversion cannot fail here
    let d_ld = ld_dev(ld, lw, st.last_d).expect("map guarantees positive lane width");
    let delta = (d_ld - d_msf).abs();

    if cfg.suspend_in_intersection && in_intersection {
        let verdict = if next.alarmed {
            Verdict::Alarm
        } else {
            Verdict::Benign
        };
        return (
            next,
            Ld3Step {
                verdict,
                d_ld: Some(d_ld),
                d_msf: Some(d_msf),
                delta: Some(delta),
                frozen: true,
            },
        );
    }

    next.last_d = d_ld;
    if !next.alarmed {
        if delta > cfg.dev_threshold {
            next.consecutive_exceedances += 1;
        } else {
            next.consecutive_exceedances = 0;
        }
        if next.consecutive_exceedances >= cfg.confirm_window {
            next.alarmed = true;
            next.alarm_time = Some(t);
        }
    }

    let verdict = if next.alarmed {
        Verdict::Alarm
    } else {
        Verdict::Benign
    };
    (
        next,
        Ld3Step {
            verdict,
            d_ld: Some(d_ld),
            d_msf: Some(d_msf),
            delta: Some(delta),
            frozen: false,
        },
    )
}
