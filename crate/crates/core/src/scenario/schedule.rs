use serde::{Deserialize, Serialize};

use super::Scenario;

/// Measurement times per (radar, target, interval). Interval `k` (0-based)
/// collects the times in `(t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSchedule {
    radars: usize,
    targets: usize,
    intervals: usize,
    times: Vec<Vec<f64>>,
}

impl MeasurementSchedule {
    fn index(&self, radar: usize, target: usize, k: usize) -> usize {
        assert!(radar < self.radars && target < self.targets && k < self.intervals);
        (k * self.radars + radar) * self.targets + target
    }

    pub fn times(&self, radar: usize, target: usize, k: usize) -> &[f64] {
        &self.times[self.index(radar, target, k)]
    }

    /// M_{i,q,k}.
    pub fn count(&self, radar: usize, target: usize, k: usize) -> usize {
        self.times(radar, target, k).len()
    }

    pub fn num_intervals(&self) -> usize {
        self.intervals
    }

    pub fn is_empty_interval(&self, k: usize) -> bool {
        (0..self.radars).all(|i| (0..self.targets).all(|q| self.count(i, q, k) == 0))
    }
}

fn boundary_slack(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

/// Points of `first + n*stride`, n >= 0, inside `(lo, hi]`.
pub(crate) fn progression_in_window(first: f64, stride: f64, lo: f64, hi: f64) -> Vec<f64> {
    let lo = lo + boundary_slack(lo);
    let hi = hi + boundary_slack(hi);
    let mut n = if first > lo {
        0.0
    } else {
        ((lo - first) / stride).floor().max(0.0)
    };
    while first + n * stride <= lo {
        n += 1.0;
    }
    let mut out = Vec::new();
    loop {
        let t = first + n * stride;
        if t > hi {
            break;
        }
        out.push(t);
        n += 1.0;
    }
    out
}

pub fn build_schedule(scenario: &Scenario) -> MeasurementSchedule {
    let radars = scenario.num_radars();
    let targets = scenario.num_targets();
    let intervals = scenario.grid.intervals;
    let mut times = Vec::with_capacity(radars * targets * intervals);
    for k in 0..intervals {
        let lo = scenario.grid.fusion_time(k);
        let hi = scenario.grid.fusion_time(k + 1);
        for radar in &scenario.radars {
            for q in 0..targets {
                times.push(progression_in_window(
                    radar.initial_time[q],
                    radar.revisit_interval[q],
                    lo,
                    hi,
                ));
            }
        }
    }
    MeasurementSchedule {
        radars,
        targets,
        intervals,
        times,
    }
}
