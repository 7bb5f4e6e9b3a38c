//! Euclidean projection onto `{z : A z <= b, z >= 0}`.
//!
//! Dual active-set method (Goldfarb-Idnani with identity Hessian): start at
//! the unconstrained minimizer `z_raw`, repeatedly pick the most violated
//! constraint and raise its multiplier while keeping the active constraints
//! tight, dropping active constraints whose multipliers reach zero. Ends
//! with a KKT point (`z = z_raw - G_active^T lambda`, `lambda >= 0`) or a
//! Farkas certificate that the polyhedron is empty.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Farkas multipliers `y >= 0` with `G^T y = 0` and `h^T y < 0` over the
/// stacked system `G = [A; -I]`, `h = [b; 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub reason: String,
    /// `(row label, multiplier)` for every row with a nonzero multiplier.
    pub rows: Vec<(String, f64)>,
}

impl fmt::Display for InfeasibilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.reason)?;
        if !self.rows.is_empty() {
            write!(f, "; certificate:")?;
            for (label, y) in &self.rows {
                write!(f, " {label}*{y:.6e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub z: DVector<f64>,
    /// Active rows: `0..m` are rows of `A`, `m + i` is `z_i >= 0`.
    pub active: Vec<usize>,
    /// Multipliers of the active rows, in the original row scaling.
    pub multipliers: Vec<f64>,
}

fn row_label(row: usize, m: usize) -> String {
    if row < m {
        format!("A[{row}]")
    } else {
        format!("z[{}]>=0", row - m)
    }
}

struct Stacked {
    rows: Vec<DVector<f64>>,
    rhs: Vec<f64>,
    norms: Vec<f64>,
    m: usize,
}

impl Stacked {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let (m, n) = a.shape();
        let mut rows = Vec::with_capacity(m + n);
        let mut rhs = Vec::with_capacity(m + n);
        let mut norms = Vec::with_capacity(m + n);
        for r in 0..m {
            let row = a.row(r).transpose();
            let norm = row.norm();
            if norm > 0.0 {
                rows.push(row / norm);
                rhs.push(b[r] / norm);
            } else {
                // 0 <= b: either vacuous or infeasible; kept so certificates can name it.
                rows.push(DVector::zeros(n));
                rhs.push(b[r]);
            }
            norms.push(if norm > 0.0 { norm } else { 1.0 });
        }
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = -1.0;
            rows.push(e);
            rhs.push(0.0);
            norms.push(1.0);
        }
        Self { rows, rhs, norms, m }
    }

    fn slack(&self, row: usize, z: &DVector<f64>) -> f64 {
        self.rows[row].dot(z) - self.rhs[row]
    }
}

fn active_normals(stacked: &Stacked, active: &[usize], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, active.len());
    for (c, row) in active.iter().enumerate() {
        out.set_column(c, &stacked.rows[*row]);
    }
    out
}

/// `(N^T N)^{-1} N^T g` by least squares on the active normals.
fn dual_direction(normals: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if normals.ncols() == 0 {
        return DVector::zeros(0);
    }
    let gram = normals.transpose() * normals;
    let rhs = normals.transpose() * g;
    match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .expect("svd solve with both factors"),
    }
}

pub fn project(z_raw: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Projection> {
    let n = z_raw.len();
    assert_eq!(a.ncols(), n, "constraint matrix width must match z");
    assert_eq!(a.nrows(), b.len(), "constraint rows must match b");
    let stacked = Stacked::new(a, b);
    let total = stacked.rows.len();
    let scale = z_raw
        .amax()
        .max(stacked.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .max(1.0);
    let feas_tol = 1e-12 * scale;
    let dep_tol = 1e-10;

    let mut z = z_raw.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let max_steps = 50 * (total + n) + 100;

    for _ in 0..max_steps {
        // most violated constraint
        let violated = (0..total)
            .filter(|r| !active.contains(r))
            .map(|r| (r, stacked.slack(r, &z)))
            .filter(|(_, s)| *s > feas_tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, _)) = violated else {
            return Ok(finish(z, active, lambda, &stacked));
        };
        let mut lambda_p = 0.0;
        // raise lambda_p until p is tight, dropping blocking constraints
        loop {
            let g = &stacked.rows[p];
            let normals = active_normals(&stacked, &active, n);
            let r = dual_direction(&normals, g);
            let d = g - &normals * &r;
            let d2 = d.norm_squared();
            let slack = stacked.slack(p, &z);

            // largest dual step before an active multiplier hits zero
            let mut partial: Option<(usize, f64)> = None;
            for (idx, ri) in r.iter().enumerate() {
                if *ri > 0.0 {
                    let t = lambda[idx] / ri;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((idx, t));
                    }
                }
            }

            if d.norm() <= dep_tol {
                let Some((drop, t)) = partial else {
                    return Err(Error::Infeasible(certificate(&stacked, &active, &r, p)));
                };
                for (l, ri) in lambda.iter_mut().zip(r.iter()) {
                    *l -= t * ri;
                }
                lambda_p += t;
                active.remove(drop);
                lambda.remove(drop);
                continue;
            }

            let full = slack.max(0.0) / d2;
            let (t, blocked) = match partial {
                Some((idx, t)) if t < full => (t, Some(idx)),
                _ => (full, None),
            };
            z -= &d * t;
            for (l, ri) in lambda.iter_mut().zip(r.iter()) {
                *l -= t * ri;
            }
            lambda_p += t;
            match blocked {
                Some(idx) => {
                    active.remove(idx);
                    lambda.remove(idx);
                }
                None => {
                    active.push(p);
                    lambda.push(lambda_p);
                    break;
                }
            }
        }
    }
    Err(Error::Infeasible(InfeasibilityCertificate {
        reason: "active-set iteration limit reached without a feasible point".into(),
        rows: Vec::new(),
    }))
}

fn certificate(stacked: &Stacked, active: &[usize], r: &DVector<f64>, p: usize) -> InfeasibilityCertificate {
    let mut rows = vec![(row_label(p, stacked.m), 1.0 / stacked.norms[p])];
    for (row, ri) in active.iter().zip(r.iter()) {
        if *ri != 0.0 {
            rows.push((row_label(*row, stacked.m), -ri / stacked.norms[*row]));
        }
    }
    InfeasibilityCertificate {
        reason: format!(
            "{} is a nonpositive combination of the active constraints but cannot be satisfied",
            row_label(p, stacked.m)
        ),
        rows,
    }
}

fn finish(mut z: DVector<f64>, active: Vec<usize>, lambda: Vec<f64>, stacked: &Stacked) -> Projection {
    let m = stacked.m;
    for row in &active {
        if *row >= m {
            z[row - m] = 0.0;
        }
    }
    let multipliers = active
        .iter()
        .zip(&lambda)
        .map(|(row, l)| l / stacked.norms[*row])
        .collect();
    Projection {
        z,
        active,
        multipliers,
    }
}
