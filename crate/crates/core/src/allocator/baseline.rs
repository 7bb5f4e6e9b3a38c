//! Reference allocations: even budget split and random split.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::Exp1;

use super::layout::{AllocationVector, Layout};
use super::problem::assemble_constraints;
use super::projection::InfeasibilityCertificate;
use super::solver::{coordinate_scales, project_scaled};
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{MeasurementSchedule, RadarResources, Scenario};

fn radar_budget(scenario: &Scenario, radar: usize) -> f64 {
    match scenario.radars[radar].resources {
        RadarResources::Mmr { power_budget, .. } => power_budget,
        RadarResources::Par { time_budget, .. } => time_budget,
        RadarResources::Msr { .. } => 0.0,
    }
}

/// Even split of every budget over its consumers (per measurement, so
/// `sum_q M P = budget`), ignoring the throughput floors.
pub fn even_split(scenario: &Scenario, schedule: &MeasurementSchedule, k: usize) -> DVector<f64> {
    let layout = Layout::new(scenario);
    let mut z = DVector::zeros(layout.dim());
    for &i in layout.mmr.iter().chain(&layout.par) {
        let total: usize = (0..layout.targets).map(|q| schedule.count(i, q, k)).sum();
        if total == 0 {
            continue;
        }
        let share = radar_budget(scenario, i) / total as f64;
        for q in 0..layout.targets {
            if schedule.count(i, q, k) > 0 {
                z[layout.radar_index(i, q).unwrap()] = share;
            }
        }
    }
    let per_link = scenario.comm.bs_power_budget / layout.links as f64;
    for j in 0..layout.links {
        z[layout.comm_index(j)] = per_link;
    }
    z
}

/// [`even_split`], with the radar block shrunk if needed to meet the
/// throughput floors.
pub fn baseline_uniform(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
) -> Result<AllocationVector> {
    let layout = Layout::new(scenario);
    let mut z = even_split(scenario, schedule, k);
    let per_link = scenario.comm.bs_power_budget / layout.links as f64;

    // Throughput row j: a_r . z_r - T0 Pc_j <= b_j. Scale z_r by alpha.
    let c = assemble_constraints(scenario, schedule, k)?;
    let offset = layout.comm_offset();
    let mut alpha = 1.0f64;
    for j in 0..layout.links {
        let radar_part: f64 = (0..offset).map(|idx| c.a[(j, idx)] * z[idx]).sum();
        let room = c.b[j] + scenario.grid.t0 * per_link;
        if room < 0.0 {
            return Err(Error::Infeasible(InfeasibilityCertificate {
                reason: format!(
                    "uniform downlink split leaves {} unmet even with radars silent",
                    c.labels[j]
                ),
                rows: vec![(c.labels[j].clone(), 1.0)],
            }));
        }
        if radar_part > room {
            alpha = alpha.min(room / radar_part);
        }
    }
    if alpha < 1.0 {
        for idx in 0..offset {
            z[idx] *= alpha;
        }
    }
    Ok(AllocationVector(z))
}

/// Random split of every budget: simplex-uniform shares times a utilization
/// drawn from `[0.9, 1.1]`, so budgets may be slightly exceeded. With
/// `project_feasible` the draw is projected onto the constraint set.
pub fn baseline_random(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
    seed: u64,
    project_feasible: bool,
) -> Result<AllocationVector> {
    let layout = Layout::new(scenario);
    let mut r = rng::rng_for(seed, &[rng::stream::RANDOM_POLICY, k as u64]);
    let mut z = DVector::zeros(layout.dim());
    let simplex = |r: &mut rand_chacha::ChaCha8Rng, n: usize| -> (Vec<f64>, f64) {
        let w: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        let utilization = r.random_range(0.9..=1.1);
        (w.into_iter().map(|v| v / total).collect(), utilization)
    };
    for &i in layout.mmr.iter().chain(&layout.par) {
        let consumers: Vec<usize> = (0..layout.targets)
            .filter(|q| schedule.count(i, *q, k) > 0)
            .collect();
        if consumers.is_empty() {
            continue;
        }
        let (w, u) = simplex(&mut r, consumers.len());
        for (q, share) in consumers.into_iter().zip(w) {
            let m = schedule.count(i, q, k) as f64;
            z[layout.radar_index(i, q).unwrap()] = u * radar_budget(scenario, i) * share / m;
        }
    }
    let (w, u) = simplex(&mut r, layout.links);
    for (j, share) in w.into_iter().enumerate() {
        z[layout.comm_index(j)] = u * scenario.comm.bs_power_budget * share;
    }
    if project_feasible {
        let c = assemble_constraints(scenario, schedule, k)?;
        let scales = coordinate_scales(scenario, schedule, k, &layout);
        z = project_scaled(&z, &c, &scales)?.z;
    }
    Ok(AllocationVector(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_schedule;

    #[test]
    fn uniform_splits_evenly() {
        let mut s = Scenario::default_scenario();
        s.comm.throughput_floor = vec![vec![0.0; 3]];
        s.radars[0].resources = RadarResources::Mmr { dwell: 2e-3, power_budget: 100.0 };
        // revisit 3 s from 1.5 s in (0, 6]: M = (2, 2)
        s.radars[0].initial_time = vec![1.5, 1.5];
        s.radars[0].revisit_interval = vec![3.0, 3.0];
        let sched = build_schedule(&s);
        assert_eq!((sched.count(0, 0, 0), sched.count(0, 1, 0)), (2, 2));
        let z = baseline_uniform(&s, &sched, 0).unwrap().0;
        let l = Layout::new(&s);
        assert_eq!(z[l.radar_index(0, 0).unwrap()], 25.0);
        assert_eq!(z[l.radar_index(0, 1).unwrap()], 25.0);
        for j in 0..3 {
            assert_eq!(z[l.comm_index(j)], 10.0);
        }
    }

    #[test]
    fn uniform_empty_schedule_zero_radar_block() {
        let mut s = Scenario::default_scenario();
        for r in &mut s.radars {
            r.initial_time = vec![1e6, 1e6];
        }
        let sched = build_schedule(&s);
        let z = baseline_uniform(&s, &sched, 0).unwrap().0;
        let l = Layout::new(&s);
        assert!(z.rows(0, l.comm_offset()).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_is_feasible_on_default() {
        let s = Scenario::default_scenario();
        let sched = build_schedule(&s);
        for k in 0..s.grid.intervals {
            let z = baseline_uniform(&s, &sched, k).unwrap().0;
            let c = assemble_constraints(&s, &sched, k).unwrap();
            assert!(c.is_feasible(&z, 1e-12), "k={k} violation {}", c.max_violation(&z));
        }
    }

    #[test]
    fn random_deterministic_and_projected() {
        let s = Scenario::default_scenario();
        let sched = build_schedule(&s);
        let a = baseline_random(&s, &sched, 3, 42, true).unwrap();
        assert_eq!(a, baseline_random(&s, &sched, 3, 42, true).unwrap());
        assert_ne!(a, baseline_random(&s, &sched, 3, 43, true).unwrap());
        let c = assemble_constraints(&s, &sched, 3).unwrap();
        for seed in 0..50 {
            let z = baseline_random(&s, &sched, 3, seed, true).unwrap().0;
            assert!(c.is_feasible(&z, 1e-9), "seed {seed}: {}", c.max_violation(&z));
        }
    }

    #[test]
    fn random_budget_utilization() {
        let s = Scenario::default_scenario();
        let sched = build_schedule(&s);
        let l = Layout::new(&s);
        let c = assemble_constraints(&s, &sched, 0).unwrap();
        let mmr_row = s.num_links();
        let n = 400;
        let mut mean = 0.0;
        for seed in 0..n {
            let z = baseline_random(&s, &sched, 0, seed, true).unwrap().0;
            let used: f64 = (0..l.dim()).map(|idx| c.a[(mmr_row, idx)] * z[idx]).sum();
            mean += used / c.b[mmr_row] / n as f64;
        }
        assert!(mean > 0.0 && mean <= 1.0, "{mean}");
        let raw = baseline_random(&s, &sched, 0, 1, false).unwrap().0;
        assert!(raw.iter().all(|v| *v >= 0.0));
    }
}
