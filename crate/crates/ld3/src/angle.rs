//! Angle arithmetic on the half-open interval (-pi, pi].

use std::f64::consts::PI;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Shortest-path interpolation from `a` to `b` at parameter `t` in [0, 1].
pub fn interp_angle(a: f64, b: f64, t: f64) -> f64 {
    wrap_angle(a + t * wrap_angle(b - a))
}

/// Circular mean of two angles, taken along the shorter arc.
pub fn mean_angle(a: f64, b: f64) -> f64 {
    interp_angle(a, b, 0.5)
}
