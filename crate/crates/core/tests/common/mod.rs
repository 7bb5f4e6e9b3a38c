#![allow(dead_code)]

use hrcn::allocator::TargetPrior;
use hrcn::harness::{planning_pass, ExperimentConfig, Policy};
use hrcn::kinematics::Mat4;
use hrcn::scenario::{build_schedule, MeasurementSchedule, Scenario};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(tag: u64) -> ChaCha8Rng {
    hrcn::rng::rng_for(tag, &[hrcn::rng::stream::TEST])
}

/// Random SPD matrix with condition number at most about `1e4`.
pub fn random_spd(r: &mut impl Rng) -> Mat4 {
    let a = Mat4::from_fn(|_, _| r.random_range(-1.0..1.0));
    let scale = 10f64.powf(r.random_range(-2.0..2.0));
    (a * a.transpose() + Mat4::identity() * 1e-2) * scale
}

/// Default scenario, its schedule and the priors of the uniform planning pass.
pub fn default_setup() -> (Scenario, MeasurementSchedule, Vec<Vec<TargetPrior>>) {
    let s = Scenario::default_scenario();
    let sched = build_schedule(&s);
    let plan = planning_pass(&s, &sched, Policy::Uniform, &ExperimentConfig::default()).unwrap();
    (s, sched, plan.priors)
}

/// One MMR, one target, one link.
pub fn single_mmr(comm_to_radar: f64, floor: f64) -> Scenario {
    let text = format!(
        r#"
[grid]
t0 = 2.0
intervals = 2
[radars.1]
kind = "mmr"
position = [0.0, 0.0]
bandwidth = 50.0
beamwidth = 0.02
noise_var = 1.0e-4
fixed_dwell = 1.0e-3
power_budget = 200.0
initial_time = [0.5]
revisit_interval = [1.0]
[comm]
links = 1
radar_to_comm_gain = [[[0.05, 0.0]]]
comm_to_radar_gain = [[[{comm_to_radar}, 0.0]]]
noise_var = 1.0e-3
throughput_floor = [{floor}]
bs_power_budget = 100.0
[targets.1]
initial_state = [3000.0, 10.0, 4000.0, -5.0]
process_noise_intensity = 0.1
rcs = [1.0]
"#
    );
    Scenario::from_toml_str(&text).unwrap()
}

use nalgebra::{DMatrix, DVector};

/// Euclidean projection onto `{A z <= b, z >= 0}` by enumerating every
/// candidate active set of at most `n` rows: each gives the projection onto
/// an affine subspace, and the nearest feasible candidate is the answer.
pub fn projection_oracle(z_raw: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = z_raw.len();
    let m = a.nrows();
    let mut g = DMatrix::zeros(m + n, n);
    let mut h = DVector::zeros(m + n);
    g.rows_mut(0, m).copy_from(a);
    h.rows_mut(0, m).copy_from(b);
    for i in 0..n {
        g[(m + i, i)] = -1.0;
    }
    let feasible = |z: &DVector<f64>| (&g * z - &h).iter().all(|v| *v <= 1e-9);
    let rows = m + n;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        if mask.count_ones() as usize > n {
            continue;
        }
        let idx: Vec<usize> = (0..rows).filter(|r| mask & (1 << r) != 0).collect();
        let z = if idx.is_empty() {
            z_raw.clone()
        } else {
            let gs = DMatrix::from_fn(idx.len(), n, |r, c| g[(idx[r], c)]);
            let hs = DVector::from_fn(idx.len(), |r, _| h[idx[r]]);
            let gram = &gs * gs.transpose();
            let Some(lu) = gram.clone().try_inverse() else { continue };
            if (&gram * &lu - DMatrix::identity(idx.len(), idx.len())).amax() > 1e-8 {
                continue;
            }
            z_raw - gs.transpose() * (lu * (&gs * z_raw - hs))
        };
        if feasible(&z) {
            let d = (&z - z_raw).norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        }
    }
    best.map(|(_, z)| z)
}

/// Random nonempty polyhedron of dimension `n` with `m` general rows.
pub fn random_polyhedron(r: &mut impl Rng, n: usize, m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
    let inside = DVector::from_fn(n, |_, _| r.random_range(0.0..1.0));
    let slack = DVector::from_fn(m, |_, _| r.random_range(0.0..0.5));
    let b = &a * inside + slack;
    (a, b)
}

/// Central-difference gradient with per-coordinate steps.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, z: &DVector<f64>, steps: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(z.len(), |i, _| {
        let mut up = z.clone();
        let mut down = z.clone();
        up[i] += steps[i];
        down[i] -= steps[i];
        (f(&up) - f(&down)) / (2.0 * steps[i])
    })
}
