//! Closed-form inner minimization over trace-one slack matrices.
//!
//! For symmetric positive-definite `M`,
//! `min_{Tr V = 1} Tr(V^T M V) = 1 / Tr(M^{-1})`, attained at
//! `V = M^{-1} / Tr(M^{-1})`. With `M = L~^T B L~` this turns the CRB metric
//! `1 / Tr(L B^{-1} L^T)` into a minimum of functions linear in `B`.

use nalgebra::Matrix4;

use crate::error::Result;
use crate::kinematics::Mat4;
use crate::linalg::jittered_inverse;

/// `L = diag(1, T0, 1, T0)`: puts velocity errors on a metre scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrix {
    pub lambda: Mat4,
    pub lambda_inv: Mat4,
}

impl WeightMatrix {
    pub fn new(t0: f64) -> Self {
        Self {
            lambda: Mat4::from_diagonal(&[1.0, t0, 1.0, t0].into()),
            lambda_inv: Mat4::from_diagonal(&[1.0, 1.0 / t0, 1.0, 1.0 / t0].into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackMatrix(pub Matrix4<f64>);

impl SlackMatrix {
    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// `Tr(V^T M V)`.
pub fn inner_objective(v: &Mat4, m: &Mat4) -> f64 {
    (v.transpose() * m * v).trace()
}

/// `V = (L~^T B L~)^{-1} / Tr[(L~^T B L~)^{-1}]`.
pub fn inner_v_update(b: &Mat4, weights: &WeightMatrix, jitter: f64) -> Result<SlackMatrix> {
    let m = weights.lambda_inv.transpose() * b * weights.lambda_inv;
    let (inv, _) = jittered_inverse(&m, jitter, "weighted bayesian information")?;
    let v = inv / inv.trace();
    Ok(SlackMatrix(v / v.trace()))
}
