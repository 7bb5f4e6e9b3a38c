//! Per-interval allocation problem: information kernels, the Bayesian CRB
//! metric, throughput, and the linear constraint system `A z <= b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fractional::{FractionalProgram, FractionalTerm};
use super::inner::{inner_objective, inner_v_update, SlackMatrix, WeightMatrix};
use super::layout::Layout;
use super::projection::InfeasibilityCertificate;
use crate::error::{Error, Result};
use crate::fusion::BayesianInfo;
use crate::kinematics::{Mat4, StateVec};
use crate::linalg::jittered_inverse;
use crate::scenario::{MeasurementSchedule, RadarResources, Scenario};
use crate::sensing::{info_kernel, ConstKernel};

/// What the allocator knows about one target before interval `k`: the
/// propagated prior information and the predicted state at `t_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPrior {
    pub info: BayesianInfo,
    pub predicted: StateVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub labels: Vec<String>,
}

impl LinearConstraints {
    /// Largest violation of `A z <= b` and `z >= 0`, relative to row scale.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let az = &self.a * z;
        let rows = (0..self.b.len()).map(|r| {
            let scale = self.a.row(r).amax().max(self.b[r].abs()).max(1.0);
            (az[r] - self.b[r]) / scale
        });
        rows.chain(z.iter().map(|v| -v)).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, z: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(z) <= tol
    }
}

/// Coefficients of the radar-interference energy seen by downlink `link`:
/// `sum_i sum_q M |a^r_{j,i}|^2 P T = coeffs^T z + fixed`.
fn interference_energy(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    layout: &Layout,
    k: usize,
    link: usize,
) -> (DVector<f64>, f64) {
    let mut coeffs = DVector::zeros(layout.dim());
    let mut fixed = 0.0;
    for (i, _) in scenario.radars.iter().enumerate() {
        let gain = scenario.comm.radar_to_comm_gain_sq[link][i];
        let factor = Layout::energy_factor(scenario, i);
        for q in 0..scenario.num_targets() {
            let m = schedule.count(i, q, k) as f64;
            match layout.radar_index(i, q) {
                Some(idx) => coeffs[idx] += m * gain * factor,
                None => fixed += m * gain * factor,
            }
        }
    }
    (coeffs, fixed)
}

/// Achieved throughput (nats) of downlink `link` under `z`.
pub fn throughput(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
    z: &DVector<f64>,
    link: usize,
) -> f64 {
    let layout = Layout::new(scenario);
    let (coeffs, fixed) = interference_energy(scenario, schedule, &layout, k, link);
    let t0 = scenario.grid.t0;
    let signal = z[layout.comm_index(link)] * t0;
    let denom = coeffs.dot(z) + fixed + scenario.comm.noise_var * t0;
    (signal / denom).ln_1p()
}

/// Rows, in order: one throughput floor per link, one power budget per MMR,
/// one time budget per PAR, the base-station power budget.
pub fn assemble_constraints(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
) -> Result<LinearConstraints> {
    let layout = Layout::new(scenario);
    let n = layout.dim();
    let t0 = scenario.grid.t0;
    let links = scenario.num_links();
    let rows = links + layout.mmr.len() + layout.par.len() + 1;
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut labels = Vec::with_capacity(rows);

    let mut min_comm = Vec::with_capacity(links);
    for j in 0..links {
        let gap = scenario.comm.floor(k, j).exp_m1();
        let (coeffs, fixed) = interference_energy(scenario, schedule, &layout, k, j);
        let mut row = coeffs * gap;
        row[layout.comm_index(j)] = -t0;
        a.set_row(j, &row.transpose());
        let floor_energy = gap * (fixed + scenario.comm.noise_var * t0);
        b[j] = -floor_energy;
        min_comm.push(floor_energy / t0);
        labels.push(format!("throughput[{j}]"));
    }
    let mut r = links;
    for &i in &layout.mmr {
        let RadarResources::Mmr { power_budget, .. } = scenario.radars[i].resources else {
            unreachable!()
        };
        for q in 0..layout.targets {
            a[(r, layout.radar_index(i, q).unwrap())] = schedule.count(i, q, k) as f64;
        }
        b[r] = power_budget;
        labels.push(format!("mmr_power_budget[{i}]"));
        r += 1;
    }
    for &i in &layout.par {
        let RadarResources::Par { time_budget, .. } = scenario.radars[i].resources else {
            unreachable!()
        };
        for q in 0..layout.targets {
            a[(r, layout.radar_index(i, q).unwrap())] = schedule.count(i, q, k) as f64;
        }
        b[r] = time_budget;
        labels.push(format!("par_time_budget[{i}]"));
        r += 1;
    }
    for j in 0..links {
        a[(r, layout.comm_index(j))] = 1.0;
    }
    b[r] = scenario.comm.bs_power_budget;
    labels.push("bs_power_budget".into());

    let needed: f64 = min_comm.iter().sum();
    if needed > scenario.comm.bs_power_budget {
        let over: Vec<String> = min_comm
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > scenario.comm.bs_power_budget)
            .map(|(j, _)| labels[j].clone())
            .collect();
        let reason = if over.is_empty() {
            format!(
                "throughput floors need {needed:.6e} W of downlink power with radars silent, budget is {:.6e} W",
                scenario.comm.bs_power_budget
            )
        } else {
            format!(
                "{} cannot be met within the base-station budget even with radars silent",
                over.join(", ")
            )
        };
        // y = 1/T0 on throughput rows, 1 on the budget row, and the radar
        // coefficients folded into the nonnegativity rows.
        let mut cert = Vec::new();
        for j in 0..links {
            cert.push((labels[j].clone(), 1.0 / t0));
        }
        cert.push((labels[rows - 1].clone(), 1.0));
        for idx in 0..layout.comm_offset() {
            let y: f64 = (0..links).map(|j| a[(j, idx)]).sum::<f64>() / t0;
            if y != 0.0 {
                cert.push((format!("z[{idx}]>=0"), y));
            }
        }
        return Err(Error::Infeasible(InfeasibilityCertificate { reason, rows: cert }));
    }
    Ok(LinearConstraints { a, b, labels })
}

/// Everything the descent-ascent solver needs for one fusion interval.
#[derive(Debug, Clone)]
pub struct AllocationProblem<'a> {
    pub scenario: &'a Scenario,
    pub schedule: &'a MeasurementSchedule,
    pub k: usize,
    pub layout: Layout,
    pub weights: WeightMatrix,
    /// `D_{i,q}`, indexed `[radar][target]`.
    pub kernels: Vec<Vec<Mat4>>,
    pub priors: Vec<TargetPrior>,
    pub constraints: LinearConstraints,
    pub jitter: f64,
}

impl<'a> AllocationProblem<'a> {
    pub fn new(
        scenario: &'a Scenario,
        schedule: &'a MeasurementSchedule,
        k: usize,
        priors: &[TargetPrior],
        jitter: f64,
    ) -> Result<Self> {
        assert_eq!(priors.len(), scenario.num_targets());
        let fusion_time = scenario.grid.fusion_time(k + 1);
        let kernels = scenario
            .radars
            .iter()
            .enumerate()
            .map(|(i, radar)| {
                priors
                    .iter()
                    .enumerate()
                    .map(|(q, prior)| {
                        let kernel = ConstKernel::new(radar, scenario.targets[q].rcs[i]);
                        info_kernel(
                            schedule.times(i, q, k),
                            fusion_time,
                            &prior.predicted,
                            radar.position,
                            &kernel,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario,
            schedule,
            k,
            layout: Layout::new(scenario),
            weights: WeightMatrix::new(scenario.grid.t0),
            kernels,
            priors: priors.to_vec(),
            constraints: assemble_constraints(scenario, schedule, k)?,
            jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// `(interference_i + noise_i)` under the downlink powers in `z`.
    pub fn radar_denominator(&self, z: &DVector<f64>, radar: usize) -> f64 {
        self.scenario
            .comm
            .interference_at_radar(radar, self.layout.comm_power(z))
            + self.scenario.radars[radar].noise_var
    }

    /// `P T / (interference + noise)` for `(radar, target)`.
    pub fn radar_weight(&self, z: &DVector<f64>, radar: usize, target: usize) -> f64 {
        self.layout.energy(self.scenario, z, radar, target) / self.radar_denominator(z, radar)
    }

    /// `B^q(z) = sum_i w_i D_{i,q} + B~^q`.
    pub fn bayesian_info(&self, z: &DVector<f64>, target: usize) -> Mat4 {
        (0..self.scenario.num_radars()).fold(self.priors[target].info.0, |acc, i| {
            acc + self.kernels[i][target] * self.radar_weight(z, i, target)
        })
    }

    /// `g(z) = sum_q 1 / Tr(L B_q^{-1} L^T)`.
    pub fn objective_g(&self, z: &DVector<f64>) -> Result<f64> {
        let l = &self.weights.lambda;
        (0..self.scenario.num_targets()).try_fold(0.0, |acc, q| {
            let (cov, _) = jittered_inverse(&self.bayesian_info(z, q), self.jitter, "bayesian information")?;
            Ok(acc + 1.0 / (l * cov * l.transpose()).trace())
        })
    }

    pub fn slack_update(&self, z: &DVector<f64>) -> Result<Vec<SlackMatrix>> {
        (0..self.scenario.num_targets())
            .map(|q| inner_v_update(&self.bayesian_info(z, q), &self.weights, self.jitter))
            .collect()
    }

    /// `sum_q Tr(V_q^T L~^T B_q(z) L~ V_q)`.
    pub fn maximin_value(&self, z: &DVector<f64>, slack: &[SlackMatrix]) -> f64 {
        let li = &self.weights.lambda_inv;
        slack
            .iter()
            .enumerate()
            .map(|(q, v)| inner_objective(&v.0, &(li.transpose() * self.bayesian_info(z, q) * li)))
            .sum()
    }

    /// Rewrites the outer objective for fixed slack matrices as a sum of
    /// per-radar linear-fractional terms.
    pub fn assemble_fractional(&self, slack: &[SlackMatrix]) -> FractionalProgram {
        let n = self.dim();
        let li = &self.weights.lambda_inv;
        let scaled: Vec<Mat4> = slack.iter().map(|v| li * v.0).collect();
        let mut clamped = 0;
        let terms = self
            .scenario
            .radars
            .iter()
            .enumerate()
            .map(|(i, radar)| {
                let mut c = DVector::zeros(n);
                let mut d = 0.0;
                let factor = Layout::energy_factor(self.scenario, i);
                for (q, vt) in scaled.iter().enumerate() {
                    let mut omega = (vt.transpose() * self.kernels[i][q] * vt).trace();
                    if omega < 0.0 {
                        clamped += 1;
                        omega = 0.0;
                    }
                    match self.layout.radar_index(i, q) {
                        Some(idx) => c[idx] += omega * factor,
                        None => d += omega * factor,
                    }
                }
                let mut e = DVector::zeros(n);
                for (j, g) in self.scenario.comm.comm_to_radar_gain_sq[i].iter().enumerate() {
                    e[self.layout.comm_index(j)] = *g;
                }
                FractionalTerm { c, d, e, sigma2: radar.noise_var }
            })
            .collect();
        let constant = scaled
            .iter()
            .zip(&self.priors)
            .map(|(vt, p)| (vt.transpose() * p.info.0 * vt).trace())
            .sum();
        FractionalProgram {
            terms,
            constant,
            clamped_weights: clamped,
        }
    }

    pub fn throughput(&self, z: &DVector<f64>, link: usize) -> f64 {
        throughput(self.scenario, self.schedule, self.k, z, link)
    }

    pub fn throughputs(&self, z: &DVector<f64>) -> Vec<f64> {
        (0..self.scenario.num_links()).map(|j| self.throughput(z, j)).collect()
    }
}
