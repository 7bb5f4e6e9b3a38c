mod common;

use hrcn::fusion::{fim, ils_mle, IlsConfig, MeasurementEntry, StackedMeasurements};
use hrcn::kinematics::{lagged_measurement, measure, measurement_jacobian, wrap_angle, StateVec};
use hrcn::sensing::{info_kernel, ConstKernel};
use hrcn::scenario::Scenario;
use nalgebra::{Matrix2, Matrix2x4};
use rand::Rng;

fn fd_jacobian(f: impl Fn(&StateVec) -> nalgebra::Vector2<f64>, s: &StateVec, steps: [f64; 4]) -> Matrix2x4<f64> {
    let mut h = Matrix2x4::zeros();
    for c in 0..4 {
        let mut up = *s;
        let mut down = *s;
        up[c] += steps[c];
        down[c] -= steps[c];
        let (a, b) = (f(&up), f(&down));
        h[(0, c)] = (a[0] - b[0]) / (2.0 * steps[c]);
        h[(1, c)] = wrap_angle(a[1] - b[1]) / (2.0 * steps[c]);
    }
    h
}

#[test]
fn jacobian_matches_central_differences() {
    let mut r = common::rng(1);
    for _ in 0..1000 {
        let radar = [r.random_range(-5e3..5e3), r.random_range(-5e3..5e3)];
        let s = StateVec::new(r.random_range(-1e4..1e4), r.random_range(-50.0..50.0), r.random_range(-1e4..1e4), r.random_range(-50.0..50.0));
        let range = (s[0] - radar[0]).hypot(s[2] - radar[1]);
        if range < 10.0 {
            continue;
        }
        let h = measurement_jacobian(&s, radar).unwrap();
        let step = 1e-4 * range;
        let fd = fd_jacobian(|x| measure(x, radar).unwrap(), &s, [step; 4]);
        for row in 0..2 {
            let scale = h.row(row).norm();
            assert!((h.row(row) - fd.row(row)).norm() <= 1e-6 * scale, "{s:?} row {row}");
        }
    }
}

#[test]
fn lagged_jacobian_matches_central_differences() {
    let mut r = common::rng(2);
    for _ in 0..500 {
        let radar = [0.0, 0.0];
        let s = StateVec::new(r.random_range(2e3..8e3), r.random_range(-60.0..60.0), r.random_range(2e3..8e3), r.random_range(-60.0..60.0));
        let lag = r.random_range(0.0..6.0);
        let (_, h) = lagged_measurement(&s, lag, radar).unwrap();
        let fd = fd_jacobian(|x| lagged_measurement(x, lag, radar).unwrap().0, &s, [0.5, 0.05, 0.5, 0.05]);
        for row in 0..2 {
            assert!((h.row(row) - fd.row(row)).norm() <= 1e-6 * h.row(row).norm());
        }
    }
}

#[test]
fn kernel_times_weight_is_fisher_information() {
    let s = Scenario::default_scenario();
    let radar = &s.radars[0];
    let kernel = ConstKernel::new(radar, 1.3);
    let state = StateVec::new(2500.0, 20.0, 3500.0, -10.0);
    let times = [1.0, 3.0, 5.0];
    let weight = 0.37;
    let d = info_kernel(&times, 6.0, &state, radar.position, &kernel).unwrap();
    let mut stack = StackedMeasurements::new(6.0);
    for t in times {
        stack.entries.push(MeasurementEntry {
            radar: 0,
            radar_position: radar.position,
            time: t,
            value: nalgebra::Vector2::zeros(),
            cov: kernel.0 / weight,
        });
    }
    let j = fim(&stack, &state).unwrap().0;
    assert!((j - d * weight).abs().max() <= 1e-12 * j.abs().max());
}

#[test]
fn ils_converges_from_nearby_start() {
    let truth = StateVec::new(4000.0, 30.0, 5000.0, -20.0);
    let radars = [[0.0, 0.0], [9000.0, 0.0], [4500.0, 9000.0]];
    let mut stack = StackedMeasurements::new(6.0);
    let cov = Matrix2::new(4.0, 0.0, 0.0, 1e-6);
    for (i, p) in radars.iter().enumerate() {
        for t in [2.0, 4.0] {
            let (y, _) = lagged_measurement(&truth, 6.0 - t, *p).unwrap();
            stack.entries.push(MeasurementEntry { radar: i, radar_position: *p, time: t, value: y, cov });
        }
    }
    let start = truth + StateVec::new(150.0, -8.0, -120.0, 6.0);
    let cm = ils_mle(&stack, &start, &IlsConfig::default()).unwrap();
    assert!((cm.estimate - truth).norm() < 1e-6);
}
