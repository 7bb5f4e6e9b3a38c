//! Optimized metric as a function of the throughput floor or of a common
//! budget scale, under fixed priors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{planning_pass, ExperimentConfig, Policy};
use crate::allocator::{adam_solve, solve_problem, AllocationProblem, TargetPrior};
use crate::error::{Error, Result};
use crate::scenario::{build_schedule, RadarResources, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Throughput floor of every link and interval (nats).
    Epsilon,
    /// Multiplier on every radar budget and the base-station budget.
    BudgetScale,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::BudgetScale => "budget_scale",
        }
    }

    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = base.clone();
        match self {
            SweepParam::Epsilon => {
                s.comm.throughput_floor = vec![vec![value; s.num_links()]];
            }
            SweepParam::BudgetScale => {
                for r in &mut s.radars {
                    match &mut r.resources {
                        RadarResources::Mmr { power_budget, .. } => *power_budget *= value,
                        RadarResources::Par { time_budget, .. } => *time_budget *= value,
                        RadarResources::Msr { .. } => {}
                    }
                }
                s.comm.bs_power_budget *= value;
            }
        }
        s
    }

    /// Whether the feasible set grows with the parameter.
    fn grows(self) -> bool {
        matches!(self, SweepParam::BudgetScale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// 0-based interval.
    pub k: usize,
    /// `None` when the interval is infeasible at this value.
    pub g_value: Option<f64>,
}

/// Solves each interval at every sweep value. Priors come from the optimized
/// planning pass of the unmodified scenario. Values are visited in the order
/// that enlarges the feasible set, each solve also starting from the
/// previous solution, and the better of the two starts is kept.
pub fn sweep(
    scenario: &Scenario,
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    scenario.validate()?;
    let schedule = build_schedule(scenario);
    let plan = planning_pass(scenario, &schedule, Policy::Optimized, config)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    if !param.grows() {
        order.reverse();
    }
    let scenarios: Vec<Scenario> = values.iter().map(|v| param.apply(scenario, *v)).collect();
    let mut points = vec![Vec::new(); values.len()];
    for k in 0..scenario.grid.intervals {
        let priors: &[TargetPrior] = &plan.priors[k];
        let mut warm: Option<DVector<f64>> = None;
        for &idx in &order {
            let s = &scenarios[idx];
            let g = match AllocationProblem::new(s, &schedule, k, priors, config.allocator.jitter) {
                Ok(problem) => {
                    let mut best = adam_solve(s, &schedule, k, priors, &config.allocator)?;
                    if let Some(z0) = &warm {
                        let cont = solve_problem(&problem, z0, &config.allocator)?;
                        if cont.objective > best.objective {
                            best = cont;
                        }
                    }
                    warm = Some(best.z.0);
                    Some(best.objective)
                }
                Err(Error::Infeasible(_)) => None,
                Err(e) => return Err(e),
            };
            points[idx].push(SweepPoint { value: values[idx], k, g_value: g });
        }
    }
    Ok(points.into_iter().flatten().collect())
}

pub fn sweep_csv(param: SweepParam, points: &[SweepPoint]) -> String {
    let mut out = String::from("param,value,k,g_value,feasible\n");
    for p in points {
        let g = p.g_value.map(|g| g.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", param.name(), p.value, p.k + 1, g, p.g_value.is_some()));
    }
    out
}
