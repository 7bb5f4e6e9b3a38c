//! Measurement-noise covariance as a function of allocated resources and
//! comm interference, synthetic measurement generation, and the
//! per-radar information kernels that the allocator shapes.

use nalgebra::Matrix2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kinematics::{lagged_measurement, measure, wrap_angle, Mat4, RangeBearing, StateVec};
use crate::rng;
use crate::scenario::RadarNode;

pub type MeasCov = Matrix2<f64>;

/// Resource-independent factor `C = diag(eta zeta^2 c_R, eta B^2 c_theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstKernel(pub Matrix2<f64>);

impl ConstKernel {
    pub fn new(radar: &RadarNode, rcs: f64) -> Self {
        Self(Matrix2::new(
            rcs * radar.bandwidth.powi(2) * radar.range_const,
            0.0,
            0.0,
            rcs * radar.beamwidth.powi(2) * radar.bearing_const,
        ))
    }

    pub fn inverse(&self) -> Matrix2<f64> {
        Matrix2::new(1.0 / self.0[(0, 0)], 0.0, 0.0, 1.0 / self.0[(1, 1)])
    }
}

/// Everything besides the constant kernel that sets one measurement's noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseContext<'a> {
    /// Downlink powers P_c^j.
    pub comm_power: &'a [f64],
    /// |alpha^c_{i,j}|^2 for this radar.
    pub gain_sq: &'a [f64],
    pub noise_var: f64,
    pub power: f64,
    pub dwell: f64,
}

impl NoiseContext<'_> {
    pub fn interference(&self) -> f64 {
        self.gain_sq.iter().zip(self.comm_power).map(|(g, p)| g * p).sum()
    }

    /// `(interference + noise) / (P T)`.
    pub fn scale(&self) -> Result<f64> {
        let energy = self.power * self.dwell;
        if !(energy > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        Ok((self.interference() + self.noise_var) / energy)
    }
}

pub fn meas_cov(ctx: &NoiseContext<'_>, kernel: &ConstKernel) -> Result<MeasCov> {
    Ok(kernel.0 * ctx.scale()?)
}

/// `h(state) + L * normals` with `L L^T = cov` (cov is diagonal).
pub fn perturb(
    true_state: &StateVec,
    radar: [f64; 2],
    cov: &MeasCov,
    normals: [f64; 2],
) -> Result<RangeBearing> {
    let y = measure(true_state, radar)?;
    Ok(RangeBearing::new(
        y[0] + cov[(0, 0)].sqrt() * normals[0],
        wrap_angle(y[1] + cov[(1, 1)].sqrt() * normals[1]),
    ))
}

pub fn simulate_measurement(
    true_state: &StateVec,
    radar: [f64; 2],
    cov: &MeasCov,
    seed: u64,
) -> Result<RangeBearing> {
    let mut r = rng::rng_for(seed, &[rng::stream::MEASUREMENT]);
    perturb(true_state, radar, cov, draw_pair(&mut r))
}

fn draw_pair(r: &mut impl Rng) -> [f64; 2] {
    rng::standard_normals::<2>(r)
}

/// `D = sum_m H_m^T C^{-1} H_m`, with each `H_m` the Jacobian of a
/// measurement taken at `times[m]` with respect to the state at
/// `fusion_time`, evaluated at `prior` back-propagated to `times[m]`.
pub fn info_kernel(
    times: &[f64],
    fusion_time: f64,
    prior: &StateVec,
    radar: [f64; 2],
    kernel: &ConstKernel,
) -> Result<Mat4> {
    let c_inv = kernel.inverse();
    times.iter().try_fold(Mat4::zeros(), |acc, t| {
        let (_, h) = lagged_measurement(prior, fusion_time - t, radar)?;
        Ok(acc + h.transpose() * c_inv * h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{measurement_jacobian, transition_matrix};
    use crate::scenario::Scenario;
    use proptest::prelude::*;

    fn kernel() -> ConstKernel {
        let s = Scenario::default_scenario();
        ConstKernel::new(&s.radars[0], 1.0)
    }

    #[test]
    fn cov_scaling_examples() {
        let k = kernel();
        let gains = [1.0];
        let base = NoiseContext { comm_power: &[3.0], gain_sq: &gains, noise_var: 1.0, power: 2.0, dwell: 1.0 };
        assert_eq!(meas_cov(&base, &k).unwrap(), k.0 * 2.0);

        let doubled = NoiseContext { power: 4.0, ..base };
        assert_eq!(meas_cov(&doubled, &k).unwrap(), meas_cov(&base, &k).unwrap() / 2.0);

        let unit = NoiseContext { comm_power: &[0.0], gain_sq: &[0.0], noise_var: 1.0, power: 1.0, dwell: 1.0 };
        assert_eq!(meas_cov(&unit, &k).unwrap(), k.0);

        let dead = NoiseContext { dwell: 0.0, ..base };
        assert!(matches!(meas_cov(&dead, &k), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn factorization_recovers_kernel() {
        let k = kernel();
        let ctx = NoiseContext { comm_power: &[2.0, 5.0], gain_sq: &[1e-3, 4e-4], noise_var: 2e-4, power: 7.0, dwell: 3e-3 };
        let cov = meas_cov(&ctx, &k).unwrap();
        let back = cov * (ctx.power * ctx.dwell) / (ctx.interference() + ctx.noise_var);
        assert!((back - k.0).abs().max() <= 1e-12 * k.0.abs().max());
    }

    #[test]
    fn noiseless_and_deterministic() {
        let s = StateVec::new(1200.0, 3.0, -400.0, 1.0);
        let radar = [0.0, 0.0];
        let y = simulate_measurement(&s, radar, &MeasCov::zeros(), 5).unwrap();
        assert_eq!(y, measure(&s, radar).unwrap());
        let cov = MeasCov::new(25.0, 0.0, 0.0, 1e-4);
        assert_eq!(
            simulate_measurement(&s, radar, &cov, 11).unwrap(),
            simulate_measurement(&s, radar, &cov, 11).unwrap()
        );
        assert_ne!(
            simulate_measurement(&s, radar, &cov, 11).unwrap(),
            simulate_measurement(&s, radar, &cov, 12).unwrap()
        );
    }

    #[test]
    fn sample_covariance_matches() {
        let s = StateVec::new(3000.0, 0.0, 4000.0, 0.0);
        let radar = [0.0, 0.0];
        let cov = MeasCov::new(400.0, 0.0, 0.0, 2.5e-5);
        let truth = measure(&s, radar).unwrap();
        let n = 100_000;
        let (mut m, mut sq) = (RangeBearing::zeros(), Matrix2::zeros());
        let draws: Vec<_> = (0..n)
            .map(|seed| simulate_measurement(&s, radar, &cov, seed).unwrap() - truth)
            .collect();
        for d in &draws {
            m += d;
        }
        m /= n as f64;
        for d in &draws {
            let c = d - m;
            sq += c * c.transpose();
        }
        sq /= (n - 1) as f64;
        assert!((sq[(0, 0)] / cov[(0, 0)] - 1.0).abs() < 0.03);
        assert!((sq[(1, 1)] / cov[(1, 1)] - 1.0).abs() < 0.03);
        assert!(sq[(0, 1)].abs() / (cov[(0, 0)] * cov[(1, 1)]).sqrt() < 0.03);
    }

    #[test]
    fn info_kernel_examples() {
        let k = kernel();
        let prior = StateVec::new(2500.0, 40.0, 3100.0, -20.0);
        let radar = [1000.0, 1000.0];
        assert_eq!(info_kernel(&[], 6.0, &prior, radar, &k).unwrap(), Mat4::zeros());

        let one = info_kernel(&[4.0], 6.0, &prior, radar, &k).unwrap();
        assert_eq!(one.rank(1e-9 * one.abs().max()), 2);

        // brute-force accumulation over three measurement times
        let times = [2.0, 4.0, 6.0];
        let mut brute = Mat4::zeros();
        for t in times {
            let back = transition_matrix(t - 6.0);
            let h = measurement_jacobian(&(back * prior), radar).unwrap() * back;
            for r in 0..4 {
                for c in 0..4 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        acc += h[(a, r)] * h[(a, c)] / k.0[(a, a)];
                    }
                    brute[(r, c)] += acc;
                }
            }
        }
        let d = info_kernel(&times, 6.0, &prior, radar, &k).unwrap();
        assert!((d - brute).abs().max() <= 1e-12 * brute.abs().max());
    }

    proptest! {
        #[test]
        fn cov_monotone(pc in 0.0f64..50.0, dpc in 0.01f64..10.0, p in 0.1f64..50.0, t in 1e-4f64..1e-2) {
            let k = kernel();
            let gains = [3e-5];
            let ctx = NoiseContext { comm_power: &[pc], gain_sq: &gains, noise_var: 2e-4, power: p, dwell: t };
            let base = meas_cov(&ctx, &k).unwrap();
            let more_comm = [pc + dpc];
            let louder = meas_cov(&NoiseContext { comm_power: &more_comm, ..ctx }, &k).unwrap();
            let stronger = meas_cov(&NoiseContext { power: p * 1.5, ..ctx }, &k).unwrap();
            let longer = meas_cov(&NoiseContext { dwell: t * 1.5, ..ctx }, &k).unwrap();
            for a in 0..2 {
                prop_assert!(louder[(a, a)] > base[(a, a)]);
                prop_assert!(stronger[(a, a)] < base[(a, a)]);
                prop_assert!(longer[(a, a)] < base[(a, a)]);
            }
        }

        #[test]
        fn kernel_psd_and_loewner_monotone(x in -5e3f64..5e3, y in -5e3f64..5e3, extra in 0.1f64..5.9) {
            prop_assume!(x.hypot(y) > 100.0);
            let k = kernel();
            let prior = StateVec::new(x, 10.0, y, -5.0);
            let d = info_kernel(&[1.0, 3.0], 6.0, &prior, [0.0, 0.0], &k).unwrap();
            let d_more = info_kernel(&[1.0, 3.0, extra], 6.0, &prior, [0.0, 0.0], &k).unwrap();
            prop_assert!((d - d.transpose()).abs().max() <= 1e-12 * d.abs().max());
            let tol = 1e-9 * d_more.abs().max();
            prop_assert!(d.symmetric_eigenvalues().iter().all(|e| *e >= -tol));
            prop_assert!((d_more - d).symmetric_eigenvalues().iter().all(|e| *e >= -tol));
        }
    }
}
