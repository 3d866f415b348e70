//! Multi-sensor-fusion localizer: an EKF over [x, y, heading, speed] driven
//! by the coefficient bicycle model, updated with 2-D position fixes.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::angle::wrap_angle;
use crate::sensors::Measurement;
use crate::vehicle::{bicycle_step, BicycleCoeffs, ControlCmd, VehicleState};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FilterError {
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
}

/// Filter state: mean [x, y, heading, speed] and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MsfState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl MsfState {
    pub fn new(state: VehicleState, cov: Matrix4<f64>) -> Self {
        Self {
            mean: Vector4::new(state.x, state.y, state.heading, state.speed),
            cov,
        }
    }

    pub fn as_vehicle_state(&self) -> VehicleState {
        VehicleState::new(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    /// Propagates the mean through the bicycle model and the covariance
    /// through its Jacobian: `P' = F P F^T + Q`.
    pub fn predict(&self, u: ControlCmd, dt: f64, c: &BicycleCoeffs, q: &Matrix4<f64>) -> MsfState {
        let s = self.as_vehicle_state();
        let next = bicycle_step(s, u, dt, c);
        let f = bicycle_jacobian(&s, u, dt, c);
        let cov = f * self.cov * f.transpose() + q;
        MsfState {
            mean: Vector4::new(next.x, next.y, next.heading, next.speed),
            cov: symmetrize(&cov),
        }
    }

    /// Kalman update with a 2-D position measurement, in Joseph form so the
    /// covariance stays symmetric positive-definite under roundoff.
    pub fn update(&self, m: &Measurement) -> Result<MsfState, FilterError> {
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        let z = Vector2::new(m.position.0, m.position.1);
        let innovation = z - h * self.mean;
        let s: Matrix2<f64> = h * self.cov * h.transpose() + m.uncertainty;
        let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation)?;
        let k: Matrix4x2<f64> = self.cov * h.transpose() * s_inv;
        let mut mean = self.mean + k * innovation;
        mean[2] = wrap_angle(mean[2]);
        let i_kh = Matrix4::identity() - k * h;
        let cov = i_kh * self.cov * i_kh.transpose() + k * m.uncertainty * k.transpose();
        Ok(MsfState {
            mean,
            cov: symmetrize(&cov),
        })
    }
}

/// Jacobian of one bicycle-model step with respect to the state, evaluated at
/// `(s, u)`. The speed row goes flat when the next speed clamps at zero,
/// matching the step function.
pub fn bicycle_jacobian(
    s: &VehicleState,
    u: ControlCmd,
    dt: f64,
    c: &BicycleCoeffs,
) -> Matrix4<f64> {
    let (sin_h, cos_h) = s.heading.sin_cos();
    let v = s.speed;
    let dv_dv = if v + c.c4 * u.accel * dt > 0.0 {
        1.0
    } else {
        0.0
    };
    #[rustfmt::skip]
    let jac = Matrix4::new(
        1.0, 0.0, -c.c1 * v * sin_h * dt, c.c1 * cos_h * dt,
        0.0, 1.0, c.c2 * v * cos_h * dt, c.c2 * sin_h * dt,
        0.0, 0.0, 1.0, c.c3 * u.steering.tan() / c.wheelbase * dt,
        0.0, 0.0, 0.0, dv_dv,
    );
    jac
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute asymmetry, `max |P - P^T|`.
pub fn asymmetry(m: &Matrix4<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Matrix4<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}
