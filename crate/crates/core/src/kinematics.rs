//! Constant-velocity target motion and the range/bearing measurement model.
//!
//! State layout is `[x, vx, y, vy]` (m, m/s, m, m/s).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};

pub type StateVec = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

/// Range (m) and bearing (rad).
pub type RangeBearing = Vector2<f64>;

/// `diag(I_2 ⊗ [[1, dt], [0, 1]])`. Negative `dt` maps backwards in time.
pub fn transition_matrix(dt: f64) -> Mat4 {
    let mut f = Mat4::identity();
    f[(0, 1)] = dt;
    f[(2, 3)] = dt;
    f
}

/// Continuous white-noise-acceleration discretization.
pub fn process_noise_cov(dt: f64, intensity: f64) -> Result<Mat4> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let block = Matrix2::new(dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt) * intensity;
    let mut g = Mat4::zeros();
    g.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
    g.fixed_view_mut::<2, 2>(2, 2).copy_from(&block);
    Ok(g)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Range and four-quadrant bearing of `state` seen from `radar`.
pub fn measure(state: &StateVec, radar: [f64; 2]) -> Result<RangeBearing> {
    let dx = state[0] - radar[0];
    let dy = state[2] - radar[1];
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPosition);
    }
    Ok(RangeBearing::new(dx.hypot(dy), dy.atan2(dx)))
}

/// Jacobian of [`measure`] with respect to the state at measurement time.
pub fn measurement_jacobian(state: &StateVec, radar: [f64; 2]) -> Result<Matrix2x4<f64>> {
    let dx = state[0] - radar[0];
    let dy = state[2] - radar[1];
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 {
        return Err(Error::ZeroRange);
    }
    let r = r2.sqrt();
    #[rustfmt::skip]
    let h = Matrix2x4::new(
        dx / r,   0.0, dy / r,  0.0,
        -dy / r2, 0.0, dx / r2, 0.0,
    );
    Ok(h)
}

/// Measurement of a target whose state at the fusion time is `state`, taken
/// `lag` seconds before that fusion time, together with its Jacobian with
/// respect to `state` (chain rule through `F(-lag)`).
pub fn lagged_measurement(
    state: &StateVec,
    lag: f64,
    radar: [f64; 2],
) -> Result<(RangeBearing, Matrix2x4<f64>)> {
    let back = transition_matrix(-lag);
    let earlier = back * state;
    let y = measure(&earlier, radar)?;
    let h = measurement_jacobian(&earlier, radar)? * back;
    Ok((y, h))
}
