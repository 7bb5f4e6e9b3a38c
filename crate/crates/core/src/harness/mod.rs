//! End-to-end experiments: plan, allocate, simulate, track, score.

mod output;
mod sweep;

pub use output::{load_result, write_outputs, OutputFiles};
pub use sweep::{sweep, sweep_csv, SweepParam, SweepPoint};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocator::{
    adam_solve, baseline_random, baseline_uniform, AllocationProblem, AllocatorConfig, TargetPrior, TraceRecord,
    WeightMatrix,
};
use crate::error::{Error, Result};
use crate::kinematics::{Mat4, StateVec};
use crate::rng;
use crate::scenario::{build_schedule, MeasurementSchedule, Scenario};
use crate::tracker::{chain_step, initial_tracks, predict_prior, run_tracking, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Optimized,
    Uniform,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Optimized, Policy::Uniform, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Optimized => "optimized",
            Policy::Uniform => "uniform",
            Policy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub policies: Vec<Policy>,
    pub allocator: AllocatorConfig,
    pub tracker: TrackerConfig,
    /// Project random draws onto the feasible set.
    pub project_random: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            master_seed: 0,
            policies: Policy::ALL.to_vec(),
            allocator: AllocatorConfig::default(),
            tracker: TrackerConfig::default(),
            project_random: true,
        }
    }
}

/// Allocation of one policy for interval `k` under `priors`. The solver
/// output is returned for the optimized policy.
pub fn allocate(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    policy: Policy,
    k: usize,
    priors: &[TargetPrior],
    config: &ExperimentConfig,
    trial: u64,
) -> Result<(DVector<f64>, Option<Vec<TraceRecord>>)> {
    match policy {
        Policy::Optimized => {
            let out = adam_solve(scenario, schedule, k, priors, &config.allocator)?;
            Ok((out.z.0, Some(out.trace)))
        }
        Policy::Uniform => Ok((baseline_uniform(scenario, schedule, k)?.0, None)),
        Policy::Random => {
            let seed = rng::derive_seed(config.master_seed, &[trial]);
            Ok((baseline_random(scenario, schedule, k, seed, config.project_random)?.0, None))
        }
    }
}

/// Noise-free run of the information chain under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningPass {
    /// Priors seen by the allocator, `[k][target]`.
    pub priors: Vec<Vec<TargetPrior>>,
    pub allocations: Vec<DVector<f64>>,
    pub g_values: Vec<f64>,
    pub throughput: Vec<Vec<f64>>,
    pub traces: Vec<Vec<TraceRecord>>,
}

/// Plans all intervals from the initial tracks. The random policy uses the
/// draws of trial 0.
pub fn planning_pass(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    policy: Policy,
    config: &ExperimentConfig,
) -> Result<PlanningPass> {
    let nt = scenario.num_targets();
    let mut info = initial_tracks(scenario)
        .iter()
        .map(|t| Ok((t.information()?, t.mean)))
        .collect::<Result<Vec<_>>>()?;
    let mut pass = PlanningPass {
        priors: Vec::new(),
        allocations: Vec::new(),
        g_values: Vec::new(),
        throughput: Vec::new(),
        traces: Vec::new(),
    };
    for k in 0..scenario.grid.intervals {
        let priors: Vec<TargetPrior> = info
            .iter()
            .enumerate()
            .map(|(q, (b, mean))| predict_prior(scenario, q, b, mean))
            .collect::<Result<_>>()?;
        let (z, trace) = allocate(scenario, schedule, policy, k, &priors, config, 0)?;
        let problem = AllocationProblem::new(scenario, schedule, k, &priors, config.allocator.jitter)?;
        pass.g_values.push(problem.objective_g(&z)?);
        pass.throughput.push(problem.throughputs(&z));
        for q in 0..nt {
            info[q] = (chain_step(scenario, schedule, k, &priors[q], q, &z)?, priors[q].predicted);
        }
        pass.traces.push(trace.unwrap_or_default());
        pass.allocations.push(z);
        pass.priors.push(priors);
    }
    Ok(pass)
}

/// `sum_q sqrt(mean_n |L e_{n,q}|^2)` over trials `n` of per-target errors.
pub fn rmse(errors: &[Vec<StateVec>], lambda: &Mat4) -> Result<f64> {
    let Some(first) = errors.first() else {
        return Err(Error::EmptyTrials);
    };
    let n = errors.len() as f64;
    Ok((0..first.len())
        .map(|q| {
            let mean_sq = errors.iter().map(|e| (lambda * e[q]).norm_squared()).sum::<f64>() / n;
            mean_sq.sqrt()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: Policy,
    /// Metric of the planning pass per interval.
    pub g_values: Vec<f64>,
    pub rmse: Vec<f64>,
    pub average_rmse: f64,
    /// Achieved downlink throughput of the planning allocations, `[k][link]`.
    pub throughput: Vec<Vec<f64>>,
    pub allocations: Vec<Vec<f64>>,
    /// Mean over trials of the summed posterior covariance trace, per interval.
    pub mean_covariance_trace: Vec<f64>,
    /// Intervals where a target had no usable composite measurement.
    pub skipped_updates: usize,
    pub traces: Vec<Vec<TraceRecord>>,
}

/// Metric of each policy at interval `k` under the same priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonPriorRow {
    pub k: usize,
    pub optimized: f64,
    pub uniform: f64,
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub run_id: String,
    pub scenario_hash: String,
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub policies: Vec<PolicyResult>,
    /// Priors from the uniform planning pass.
    pub common_prior: Vec<CommonPriorRow>,
}

impl ExperimentResult {
    pub fn policy(&self, p: Policy) -> Option<&PolicyResult> {
        self.policies.iter().find(|r| r.policy == p)
    }
}

/// One exported track row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub policy: Policy,
    pub trial: usize,
    pub target: usize,
    pub k: usize,
    pub truth: StateVec,
    pub estimate: StateVec,
    pub covariance_trace: f64,
}

pub fn run_id(scenario_hash: &str, config: &ExperimentConfig) -> String {
    let snapshot = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(format!("{scenario_hash}\n{snapshot}").as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

struct TrialOutcome {
    /// `[k][target]`
    errors: Vec<Vec<StateVec>>,
    cov_trace: Vec<f64>,
    skipped: usize,
    rows: Vec<TrackRow>,
}

fn run_trial(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    policy: Policy,
    plan: &PlanningPass,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<TrialOutcome> {
    let reuse_plan = match policy {
        Policy::Optimized => !config.tracker.closed_loop,
        Policy::Uniform => true,
        Policy::Random => false,
    };
    let mut source = |k: usize, priors: &[TargetPrior]| -> Result<DVector<f64>> {
        if reuse_plan {
            return Ok(plan.allocations[k].clone());
        }
        allocate(scenario, schedule, policy, k, priors, config, trial as u64).map(|(z, _)| z)
    };
    let history = run_tracking(scenario, schedule, &mut source, &config.tracker, config.master_seed, trial as u64)?;
    let intervals = scenario.grid.intervals;
    let nt = scenario.num_targets();
    let mut out = TrialOutcome {
        errors: vec![Vec::with_capacity(nt); intervals],
        cov_trace: vec![0.0; intervals],
        skipped: 0,
        rows: Vec::with_capacity(intervals * nt),
    };
    for (q, track) in history.tracks.iter().enumerate() {
        for (k, rec) in track.iter().enumerate() {
            out.errors[k].push(rec.estimate - rec.truth);
            out.cov_trace[k] += rec.covariance_trace;
            out.skipped += usize::from(!rec.updated);
            out.rows.push(TrackRow {
                policy,
                trial,
                target: q,
                k,
                truth: rec.truth,
                estimate: rec.estimate,
                covariance_trace: rec.covariance_trace,
            });
        }
    }
    Ok(out)
}

/// Runs every configured policy over the same truth and measurement noise.
pub fn compare_allocations(scenario: &Scenario, config: &ExperimentConfig) -> Result<(ExperimentResult, Vec<TrackRow>)> {
    scenario.validate()?;
    if config.trials == 0 {
        return Err(Error::EmptyTrials);
    }
    let schedule = build_schedule(scenario);
    let lambda = WeightMatrix::new(scenario.grid.t0).lambda;
    let intervals = scenario.grid.intervals;
    let mut policies = Vec::new();
    let mut rows = Vec::new();
    for &policy in &config.policies {
        let plan = planning_pass(scenario, &schedule, policy, config)?;
        let outcomes: Vec<TrialOutcome> = (0..config.trials)
            .into_par_iter()
            .map(|n| run_trial(scenario, &schedule, policy, &plan, config, n))
            .collect::<Result<_>>()?;
        let mut rmse_k = Vec::with_capacity(intervals);
        for k in 0..intervals {
            let errors: Vec<Vec<StateVec>> = outcomes.iter().map(|o| o.errors[k].clone()).collect();
            rmse_k.push(rmse(&errors, &lambda)?);
        }
        let trials = config.trials as f64;
        let mean_cov = (0..intervals)
            .map(|k| outcomes.iter().map(|o| o.cov_trace[k]).sum::<f64>() / trials)
            .collect();
        policies.push(PolicyResult {
            policy,
            average_rmse: rmse_k.iter().sum::<f64>() / intervals as f64,
            rmse: rmse_k,
            g_values: plan.g_values,
            throughput: plan.throughput,
            allocations: plan.allocations.iter().map(|z| z.as_slice().to_vec()).collect(),
            mean_covariance_trace: mean_cov,
            skipped_updates: outcomes.iter().map(|o| o.skipped).sum(),
            traces: plan.traces,
        });
        rows.extend(outcomes.into_iter().flat_map(|o| o.rows));
    }
    let common_prior = common_prior_check(scenario, &schedule, config)?;
    let scenario_hash = scenario.content_hash();
    Ok((
        ExperimentResult {
            run_id: run_id(&scenario_hash, config),
            scenario_hash,
            config: config.clone(),
            scenario: scenario.clone(),
            policies,
            common_prior,
        },
        rows,
    ))
}

/// Every policy's metric per interval, all evaluated under the priors of
/// the uniform planning pass.
pub fn common_prior_check(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    config: &ExperimentConfig,
) -> Result<Vec<CommonPriorRow>> {
    let plan = planning_pass(scenario, schedule, Policy::Uniform, config)?;
    (0..scenario.grid.intervals)
        .map(|k| {
            let priors = &plan.priors[k];
            let problem = AllocationProblem::new(scenario, schedule, k, priors, config.allocator.jitter)?;
            let g = |p: Policy| -> Result<f64> {
                let (z, _) = allocate(scenario, schedule, p, k, priors, config, 0)?;
                problem.objective_g(&z)
            };
            Ok(CommonPriorRow {
                k,
                optimized: g(Policy::Optimized)?,
                uniform: g(Policy::Uniform)?,
                random: g(Policy::Random)?,
            })
        })
        .collect()
}
