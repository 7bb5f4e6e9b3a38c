//! Composite measurements: all of an interval's raw range/bearing returns
//! for one target are fused into a single state estimate at the fusion time
//! by iterative (Gauss-Newton) weighted least squares. The Fisher
//! information of the stacked returns gives the estimate's covariance.
//!
//! Also hosts the Bayesian information recursion used by the allocator and
//! the tracker's open-loop prior chain.

use nalgebra::{Cholesky, Matrix2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{lagged_measurement, wrap_angle, Mat4, RangeBearing, StateVec};
use crate::linalg::{spd_inverse, symmetrize};
use crate::sensing::MeasCov;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEntry {
    pub radar: usize,
    pub radar_position: [f64; 2],
    pub time: f64,
    pub value: RangeBearing,
    pub cov: MeasCov,
}

/// All returns for one target in one fusion interval, in radar-major,
/// time-ascending order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StackedMeasurements {
    pub fusion_time: f64,
    pub entries: Vec<MeasurementEntry>,
}

impl StackedMeasurements {
    pub fn new(fusion_time: f64) -> Self {
        Self {
            fusion_time,
            entries: Vec::new(),
        }
    }

    /// Length of the stacked measurement vector.
    pub fn rows(&self) -> usize {
        2 * self.entries.len()
    }

    pub fn scale_covariances(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| e.cov *= c);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeMeasurement {
    pub estimate: StateVec,
    /// Inverse Fisher information at the estimate.
    pub covariance: Mat4,
    pub iterations: usize,
    pub step_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo(pub Mat4);

/// Information-form prior/posterior `B(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianInfo(pub Mat4);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlsConfig {
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Minimum eigenvalue ratio of the normal matrix.
    pub rank_tol: f64,
}

impl Default for IlsConfig {
    fn default() -> Self {
        Self {
            step_tol: 1e-8,
            max_iterations: 50,
            rank_tol: 1e-12,
        }
    }
}

/// Normal matrix and gradient of the weighted least-squares cost at `state`.
fn normal_equations(stack: &StackedMeasurements, state: &StateVec) -> Result<(Mat4, Vector4<f64>)> {
    let mut normal = Mat4::zeros();
    let mut rhs = Vector4::zeros();
    for e in &stack.entries {
        let (pred, h) = lagged_measurement(state, stack.fusion_time - e.time, e.radar_position)?;
        let w = diag_inverse(&e.cov)?;
        let resid = RangeBearing::new(e.value[0] - pred[0], wrap_angle(e.value[1] - pred[1]));
        let ht_w = h.transpose() * w;
        normal += ht_w * h;
        rhs += ht_w * resid;
    }
    Ok((symmetrize(&normal), rhs))
}

fn diag_inverse(cov: &MeasCov) -> Result<Matrix2<f64>> {
    if !(cov[(0, 0)] > 0.0 && cov[(1, 1)] > 0.0) {
        return Err(Error::SingularMatrix("measurement covariance"));
    }
    Ok(Matrix2::new(1.0 / cov[(0, 0)], 0.0, 0.0, 1.0 / cov[(1, 1)]))
}

fn check_rank(normal: &Mat4, tol: f64) -> Result<()> {
    let eig = normal.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > tol) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(())
}

/// Maximum-likelihood composite measurement by Gauss-Newton.
pub fn ils_mle(
    stack: &StackedMeasurements,
    init: &StateVec,
    config: &IlsConfig,
) -> Result<CompositeMeasurement> {
    let mut state = *init;
    let mut step_norm = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        let (normal, rhs) = normal_equations(stack, &state)?;
        check_rank(&normal, config.rank_tol)?;
        let chol = Cholesky::new(normal).ok_or(Error::RankDeficient { ratio: 0.0 })?;
        let step = chol.solve(&rhs);
        state += step;
        step_norm = step.norm();
        if !step_norm.is_finite() {
            break;
        }
        if step_norm < config.step_tol {
            let info = fim(stack, &state)?;
            check_rank(&info.0, config.rank_tol)?;
            return Ok(CompositeMeasurement {
                estimate: state,
                covariance: spd_inverse(&info.0, "fisher information")?,
                iterations: iteration,
                step_norm,
            });
        }
    }
    Err(Error::Divergence {
        iterations: config.max_iterations,
        step_norm,
    })
}

/// `J = sum_m H_m^T Sigma_m^{-1} H_m` at `eval_state`.
pub fn fim(stack: &StackedMeasurements, eval_state: &StateVec) -> Result<FisherInfo> {
    normal_equations(stack, eval_state).map(|(n, _)| FisherInfo(n))
}

/// Starting point for [`ils_mle`] when no track prediction exists: converts
/// each return to a Cartesian point and differences the two best-conditioned
/// ones (distinct radars preferred).
pub fn triangulate(stack: &StackedMeasurements) -> Option<StateVec> {
    struct Point {
        radar: usize,
        time: f64,
        pos: [f64; 2],
        var: f64,
    }
    let mut points: Vec<Point> = stack
        .entries
        .iter()
        .map(|e| {
            let (r, b) = (e.value[0], e.value[1]);
            Point {
                radar: e.radar,
                time: e.time,
                pos: [
                    e.radar_position[0] + r * b.cos(),
                    e.radar_position[1] + r * b.sin(),
                ],
                var: e.cov[(0, 0)] + r * r * e.cov[(1, 1)],
            }
        })
        .collect();
    points.sort_by(|a, b| a.var.total_cmp(&b.var));
    let first = points.first()?;
    let second = points
        .iter()
        .find(|p| p.radar != first.radar && p.time != first.time)
        .or_else(|| points.iter().find(|p| p.time != first.time));
    let (pos, vel, t) = match second {
        Some(p) => {
            let (a, b) = if first.time < p.time { (first, p) } else { (p, first) };
            let dt = b.time - a.time;
            let vel = [(b.pos[0] - a.pos[0]) / dt, (b.pos[1] - a.pos[1]) / dt];
            (b.pos, vel, b.time)
        }
        None => (first.pos, [0.0, 0.0], first.time),
    };
    let lag = stack.fusion_time - t;
    Some(StateVec::new(
        pos[0] + vel[0] * lag,
        vel[0],
        pos[1] + vel[1] * lag,
        vel[1],
    ))
}

/// Prior information `[Gamma + F B^{-1} F^T]^{-1}` carried from the previous
/// fusion time. Falls back to the Woodbury form when `prev` is singular but
/// `gamma` is not.
pub fn prior_information(prev: &BayesianInfo, f: &Mat4, gamma: &Mat4) -> Result<BayesianInfo> {
    if let Ok(cov) = spd_inverse(&prev.0, "bayesian information") {
        let predicted = f * cov * f.transpose() + gamma;
        return spd_inverse(&predicted, "predicted covariance").map(BayesianInfo);
    }
    let g_inv = spd_inverse(gamma, "process noise").map_err(|_| Error::SingularPrior)?;
    let inner = spd_inverse(&(prev.0 + f.transpose() * g_inv * f), "prior update")
        .map_err(|_| Error::SingularPrior)?;
    Ok(BayesianInfo(symmetrize(
        &(g_inv - g_inv * f * inner * f.transpose() * g_inv),
    )))
}

/// `B = sum_i w_i D_i + [Gamma + F B_prev^{-1} F^T]^{-1}`, where each
/// `w_i = P_i T_i / (interference_i + noise_i)`.
pub fn bayesian_fim<'a>(
    prev: &BayesianInfo,
    data_terms: impl IntoIterator<Item = (f64, &'a Mat4)>,
    f: &Mat4,
    gamma: &Mat4,
) -> Result<BayesianInfo> {
    let prior = prior_information(prev, f, gamma)?;
    Ok(BayesianInfo(
        data_terms
            .into_iter()
            .fold(prior.0, |acc, (w, d)| acc + d * w),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{measure, process_noise_cov, transition_matrix};
    use crate::linalg::is_psd;
    use crate::rng;
    use crate::sensing::perturb;

    const RADARS: [[f64; 2]; 3] = [[0.0, 0.0], [6000.0, 500.0], [2500.0, 7000.0]];

    fn stack_for(truth: &StateVec, cov: MeasCov, noise_seed: Option<u64>) -> StackedMeasurements {
        let fusion_time = 6.0;
        let mut stack = StackedMeasurements::new(fusion_time);
        let mut r = noise_seed.map(|s| rng::rng_for(s, &[rng::stream::TEST]));
        for (i, pos) in RADARS.iter().enumerate() {
            for t in [2.0 + 0.3 * i as f64, 4.0 + 0.3 * i as f64] {
                let at = transition_matrix(t - fusion_time) * truth;
                let value = match r.as_mut() {
                    Some(r) => perturb(&at, *pos, &cov, rng::standard_normals(r)).unwrap(),
                    None => measure(&at, *pos).unwrap(),
                };
                stack.entries.push(MeasurementEntry { radar: i, radar_position: *pos, time: t, value, cov });
            }
        }
        stack
    }

    fn truth() -> StateVec {
        StateVec::new(3000.0, 40.0, 2500.0, -25.0)
    }

    #[test]
    fn noiseless_recovery() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let stack = stack_for(&truth(), cov, None);
        let init = truth() + StateVec::new(10.0, 0.0, -10.0, 0.0);
        let cm = ils_mle(&stack, &init, &IlsConfig::default()).unwrap();
        assert!((cm.estimate - truth()).norm() < 1e-6, "{}", (cm.estimate - truth()).norm());
        assert!(is_psd(&cm.covariance, 1e-12));
    }

    #[test]
    fn single_measurement_is_rank_deficient() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let mut stack = stack_for(&truth(), cov, None);
        stack.entries.truncate(1);
        assert_eq!(stack.rows(), 2);
        let err = ils_mle(&stack, &truth(), &IlsConfig::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err}");
    }

    #[test]
    fn covariance_scale_equivariance() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let stack = stack_for(&truth(), cov, Some(3));
        let cfg = IlsConfig::default();
        let a = ils_mle(&stack, &truth(), &cfg).unwrap();
        let b = ils_mle(&stack.scale_covariances(7.5), &truth(), &cfg).unwrap();
        assert!((a.estimate - b.estimate).norm() < 1e-7);
        assert!((b.covariance - a.covariance * 7.5).abs().max() < 1e-9 * b.covariance.abs().max());
    }

    #[test]
    fn divergence_reported() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let stack = stack_for(&truth(), cov, Some(3));
        let cfg = IlsConfig { max_iterations: 1, ..IlsConfig::default() };
        let init = truth() + StateVec::new(500.0, 5.0, 500.0, 5.0);
        assert!(matches!(ils_mle(&stack, &init, &cfg), Err(Error::Divergence { iterations: 1, .. })));
    }

    #[test]
    fn triangulation_starts_close_enough() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let stack = stack_for(&truth(), cov, Some(9));
        let init = triangulate(&stack).unwrap();
        assert!((init[0] - truth()[0]).abs() < 500.0);
        let cm = ils_mle(&stack, &init, &IlsConfig::default()).unwrap();
        let from_truth = ils_mle(&stack, &truth(), &IlsConfig::default()).unwrap();
        assert!((cm.estimate - from_truth.estimate).norm() < 1e-6);
        assert!(triangulate(&StackedMeasurements::new(0.0)).is_none());
    }

    #[test]
    fn fim_examples() {
        let cov = MeasCov::new(100.0, 0.0, 0.0, 1e-5);
        let stack = stack_for(&truth(), cov, None);
        let j = fim(&stack, &truth()).unwrap().0;

        // naive per-measurement loop
        let mut naive = Mat4::zeros();
        for e in &stack.entries {
            let back = transition_matrix(e.time - stack.fusion_time);
            let h = crate::kinematics::measurement_jacobian(&(back * truth()), e.radar_position).unwrap() * back;
            let sigma_inv = e.cov.try_inverse().unwrap();
            naive += h.transpose() * sigma_inv * h;
        }
        assert!((j - naive).abs().max() <= 1e-12 * naive.abs().max());

        // doubling every radar's power halves every covariance
        let doubled = fim(&stack.scale_covariances(0.5), &truth()).unwrap().0;
        assert!((doubled - j * 2.0).abs().max() <= 1e-12 * j.abs().max());

        assert_eq!(fim(&StackedMeasurements::new(6.0), &truth()).unwrap().0, Mat4::zeros());
    }

    fn spd(seed: u64) -> Mat4 {
        let mut r = rng::rng_for(seed, &[rng::stream::TEST]);
        let a = Mat4::from_fn(|_, _| rng::standard_normals::<1>(&mut r)[0]);
        a * a.transpose() + Mat4::identity() * 0.5
    }

    #[test]
    fn bayesian_examples() {
        let prev = BayesianInfo(spd(1));
        let f = transition_matrix(6.0);
        let gamma = process_noise_cov(6.0, 0.1).unwrap();
        let d = spd(2);

        let prior_only = bayesian_fim(&prev, [(0.0, &d)], &f, &gamma).unwrap();
        assert_eq!(prior_only, prior_information(&prev, &f, &gamma).unwrap());

        let additive = bayesian_fim(&prev, [(2.0, &d)], &Mat4::identity(), &Mat4::zeros()).unwrap();
        assert!((additive.0 - (prev.0 + d * 2.0)).abs().max() < 1e-9 * additive.0.abs().max());

        // one-radar scalar substitution: P = 4, T = 0.5, interference 3*1e-1, noise 0.2
        let weight = 4.0 * 0.5 / (3.0 * 0.1 + 0.2);
        let b = bayesian_fim(&prev, [(weight, &d)], &f, &gamma).unwrap().0;
        let direct = d * 4.0 + (gamma + f * prev.0.try_inverse().unwrap() * f.transpose()).try_inverse().unwrap();
        assert!((b - direct).abs().max() < 1e-9 * direct.abs().max());
    }

    #[test]
    fn singular_prior_paths() {
        let f = transition_matrix(6.0);
        let zero = BayesianInfo(Mat4::zeros());
        assert!(matches!(prior_information(&zero, &f, &Mat4::zeros()), Err(Error::SingularPrior)));
        // zero information stays zero under any invertible process noise
        let gamma = process_noise_cov(6.0, 0.3).unwrap();
        let p = prior_information(&zero, &f, &gamma).unwrap();
        assert!(p.0.abs().max() < 1e-9 * gamma.try_inverse().unwrap().abs().max());
        // Woodbury agrees with the direct form on an invertible prior
        let prev = BayesianInfo(spd(5));
        let direct = prior_information(&prev, &f, &gamma).unwrap().0;
        let g_inv = gamma.try_inverse().unwrap();
        let inner = (prev.0 + f.transpose() * g_inv * f).try_inverse().unwrap();
        let woodbury = g_inv - g_inv * f * inner * f.transpose() * g_inv;
        assert!((direct - woodbury).abs().max() < 1e-8 * direct.abs().max());
    }
}
