//! Kinematic bicycle model with per-equation coefficients, plus least-squares
//! identification of those coefficients from a driven trace.

use crate::angle::wrap_angle;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("trace too short: need at least {need} transitions, got {got}")]
    TraceTooShort { need: usize, got: usize },
    #[error("degenerate trace: no excitation in the {0} equation")]
    DegenerateTrace(&'static str),
}

/// Vehicle ground-truth state. Speed is clamped non-negative and heading is
/// kept wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            speed: speed.max(0.0),
        }
    }
}

/// Front-wheel steering angle (positive left) and signed acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCmd {
    pub steering: f64,
    pub accel: f64,
}

impl ControlCmd {
    pub fn new(steering: f64, accel: f64) -> Self {
        Self { steering, accel }
    }
}

/// Multipliers on the four bicycle-model equations plus the wheelbase.
/// The vanilla model is all ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub wheelbase: f64,
}

impl Default for BicycleCoeffs {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            wheelbase: 2.7,
        }
    }
}

/// One forward-Euler step of the coefficient bicycle model:
///
/// ```text
/// x'     = x + c1 * v * cos(theta) * dt
/// y'     = y + c2 * v * sin(theta) * dt
/// theta' = theta + c3 * (v / wheelbase) * tan(steering) * dt
/// v'     = max(0, v + c4 * accel * dt)
/// ```
pub fn bicycle_step(s: VehicleState, u: ControlCmd, dt: f64, c: &BicycleCoeffs) -> VehicleState {
    debug_assert!(dt > 0.0);
    VehicleState {
        x: s.x + c.c1 * s.speed * s.heading.cos() * dt,
        y: s.y + c.c2 * s.speed * s.heading.sin() * dt,
        heading: wrap_angle(s.heading + c.c3 * (s.speed / c.wheelbase) * u.steering.tan() * dt),
        speed: (s.speed + c.c4 * u.accel * dt).max(0.0),
    }
}

/// Fits `c1..c4` to a trace of `(state, command, dt)` transitions by
/// per-equation linear least squares. Each coefficient multiplies a single
/// known regressor in its own state equation, so the exact minimizer is the
/// ratio of cross- and auto-correlations; no iterative solver is needed.
///
/// The wheelbase is a known vehicle constant, not a fitted quantity.
pub fn fit_bicycle_coeffs(
    trace: &[(VehicleState, ControlCmd, f64)],
    wheelbase: f64,
) -> Result<BicycleCoeffs, FitError> {
    const MIN_TRANSITIONS: usize = 50;
    if trace.len() < MIN_TRANSITIONS + 1 {
        return Err(FitError::TraceTooShort {
            need: MIN_TRANSITIONS,
            got: trace.len().saturating_sub(1),
        });
    }
    // accumulate sum(target * regressor) and sum(regressor^2) per equation
    let mut num = [0.0f64; 4];
    let mut den = [0.0f64; 4];
    for w in trace.windows(2) {
        let (s, u, dt) = w[0];
        let (s_next, _, _) = w[1];
        let regs = [
            s.speed * s.heading.cos() * dt,
            s.speed * s.heading.sin() * dt,
            (s.speed / wheelbase) * u.steering.tan() * dt,
            u.accel * dt,
        ];
        let targets = [
            s_next.x - s.x,
            s_next.y - s.y,
            wrap_angle(s_next.heading - s.heading),
            s_next.speed - s.speed,
        ];
        for i in 0..4 {
            num[i] += targets[i] * regs[i];
            den[i] += regs[i] * regs[i];
        }
    }
    const EQ_NAMES: [&str; 4] = ["x", "y", "heading", "speed"];
    for i in 0..4 {
        if den[i] <= 1e-12 {
            return Err(FitError::DegenerateTrace(EQ_NAMES[i]));
        }
    }
    Ok(BicycleCoeffs {
        c1: num[0] / den[0],
        c2: num[1] / den[1],
        c3: num[2] / den[2],
        c4: num[3] / den[3],
        wheelbase,
    })
}
