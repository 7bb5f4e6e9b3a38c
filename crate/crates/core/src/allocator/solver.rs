//! Alternating descent-ascent on the maximin form of the CRB metric.
//!
//! Each iteration:
//! 1. form `B_q(z)` for every target,
//! 2. descend in the slack matrices (closed form),
//! 3. rebuild the linear-fractional outer objective,
//! 4. take a projected, budget-preconditioned gradient step in `z`,
//!    halving the step until the metric does not decrease.
//!
//! Since the slack minimizer is unique, the fractional gradient at `z` is
//! also the gradient of the metric itself, so step 4 is a projected
//! gradient step on `g`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_uniform, even_split};
use super::fractional::grad_f;
use super::layout::{AllocationVector, Layout, Slot};
use super::problem::{AllocationProblem, LinearConstraints, TargetPrior};
use super::projection::{project, Projection};
use crate::error::{Error, Result};
use crate::scenario::{MeasurementSchedule, RadarResources, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocatorConfig {
    /// Step as a fraction of each coordinate's budget.
    pub step_size: f64,
    /// Relative objective change that ends the iteration.
    pub objective_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Allowed relative constraint violation of returned allocations.
    pub projection_tol: f64,
    /// Diagonal loading for singular information matrices.
    pub jitter: f64,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            objective_tol: 1e-6,
            max_iterations: 500,
            max_halvings: 20,
            projection_tol: 1e-9,
            jitter: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub step_norm: f64,
    pub halvings: usize,
    pub active_constraints: Vec<String>,
}

impl TraceRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub z: AllocationVector,
    pub objective: f64,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub clamped_weights: usize,
}

/// Per-coordinate budget scale: the most a coordinate can take when its
/// budget goes to it alone.
pub fn coordinate_scales(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
    layout: &Layout,
) -> DVector<f64> {
    DVector::from_fn(layout.dim(), |idx, _| match layout.slot(idx) {
        Slot::MmrPower { radar, target } | Slot::ParDwell { radar, target } => {
            let budget = match scenario.radars[radar].resources {
                RadarResources::Mmr { power_budget, .. } => power_budget,
                RadarResources::Par { time_budget, .. } => time_budget,
                RadarResources::Msr { .. } => unreachable!(),
            };
            budget / schedule.count(radar, target, k).max(1) as f64
        }
        Slot::CommPower { .. } => scenario.comm.bs_power_budget,
    })
}

/// Euclidean projection in budget-normalized coordinates `u = z / scale`.
pub fn project_scaled(
    z_raw: &DVector<f64>,
    constraints: &LinearConstraints,
    scales: &DVector<f64>,
) -> Result<Projection> {
    let mut a = constraints.a.clone();
    for (c, s) in scales.iter().enumerate() {
        a.column_mut(c).scale_mut(*s);
    }
    let u_raw = z_raw.component_div(scales);
    let mut p = project(&u_raw, &a, &constraints.b)?;
    p.z.component_mul_assign(scales);
    Ok(p)
}

fn active_labels(p: &Projection, constraints: &LinearConstraints) -> Vec<String> {
    let m = constraints.labels.len();
    p.active
        .iter()
        .map(|r| {
            if *r < m {
                constraints.labels[*r].clone()
            } else {
                format!("z[{}]>=0", r - m)
            }
        })
        .collect()
}

/// Builds the interval's problem and solves it from the uniform allocation.
pub fn adam_solve(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
    priors: &[TargetPrior],
    config: &AllocatorConfig,
) -> Result<SolveOutput> {
    let problem = AllocationProblem::new(scenario, schedule, k, priors, config.jitter)?;
    let z0 = match baseline_uniform(scenario, schedule, k) {
        Ok(z) => z.0,
        // the floors are reachable, just not with an even downlink split
        Err(Error::Infeasible(_)) => even_split(scenario, schedule, k),
        Err(e) => return Err(e),
    };
    solve_problem(&problem, &z0, config)
}

pub fn solve_problem(
    problem: &AllocationProblem<'_>,
    z0: &DVector<f64>,
    config: &AllocatorConfig,
) -> Result<SolveOutput> {
    let scales = coordinate_scales(problem.scenario, problem.schedule, problem.k, &problem.layout);
    let constraints = &problem.constraints;
    let start = project_scaled(z0, constraints, &scales)?;
    let mut z = start.z.clone();
    let mut g = problem.objective_g(&z)?;
    if !g.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut trace = vec![TraceRecord {
        iteration: 0,
        objective: g,
        step_norm: 0.0,
        halvings: 0,
        active_constraints: active_labels(&start, constraints),
    }];
    let mut best = (z.clone(), g);
    let mut converged = false;
    let mut clamped = 0;

    for iteration in 1..=config.max_iterations {
        let slack = problem.slack_update(&z)?;
        let fp = problem.assemble_fractional(&slack);
        clamped += fp.clamped_weights;
        let direction = grad_f(&fp, &z).component_mul(&scales);
        let peak = direction.amax();
        if !peak.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        if peak == 0.0 {
            trace.push(TraceRecord {
                iteration,
                objective: g,
                step_norm: 0.0,
                halvings: 0,
                active_constraints: trace.last().unwrap().active_constraints.clone(),
            });
            converged = true;
            break;
        }
        let direction = direction.component_mul(&scales) / peak;

        let mut step = config.step_size;
        let mut accepted = None;
        for halvings in 0..=config.max_halvings {
            let p = project_scaled(&(&z + &direction * step), constraints, &scales)?;
            let g_new = problem.objective_g(&p.z)?;
            if !g_new.is_finite() {
                return Err(Error::NonFinite { iteration });
            }
            if g_new >= g {
                accepted = Some((p, g_new, halvings));
                break;
            }
            step *= 0.5;
        }
        let Some((p, g_new, halvings)) = accepted else {
            converged = true;
            break;
        };
        let step_norm = (&p.z - &z).component_div(&scales).norm();
        trace.push(TraceRecord {
            iteration,
            objective: g_new,
            step_norm,
            halvings,
            active_constraints: active_labels(&p, constraints),
        });
        let change = (g_new - g).abs();
        let g_old = g;
        z = p.z;
        g = g_new;
        if g > best.1 {
            best = (z.clone(), g);
        }
        if change <= config.objective_tol * g_old.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    debug_assert!(constraints.is_feasible(&best.0, config.projection_tol));
    Ok(SolveOutput {
        z: AllocationVector(best.0),
        objective: best.1,
        trace,
        converged,
        clamped_weights: clamped,
    })
}
