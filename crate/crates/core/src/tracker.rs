//! Kalman tracking over fusion intervals. Each interval's composite
//! measurement enters the filter as a state-space observation (`H = I`)
//! with covariance equal to its inverse Fisher information.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::allocator::{Layout, TargetPrior};
use crate::error::{Error, Result};
use crate::fusion::{ils_mle, prior_information, BayesianInfo, CompositeMeasurement, IlsConfig, MeasurementEntry, StackedMeasurements};
use crate::kinematics::{process_noise_cov, transition_matrix, Mat4, StateVec};
use crate::linalg::{spd_inverse, symmetrize};
use crate::rng;
use crate::scenario::{MeasurementSchedule, Scenario};
use crate::sensing::{meas_cov, perturb, ConstKernel, NoiseContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub mean: StateVec,
    pub covariance: Mat4,
}

impl TrackState {
    pub fn information(&self) -> Result<BayesianInfo> {
        spd_inverse(&self.covariance, "track covariance").map(BayesianInfo)
    }
}

pub fn kf_predict(track: &TrackState, t0: f64, gamma: &Mat4) -> TrackState {
    let f = transition_matrix(t0);
    TrackState {
        mean: f * track.mean,
        covariance: symmetrize(&(f * track.covariance * f.transpose() + gamma)),
    }
}

/// Identity-observation update in Joseph form.
pub fn kf_update(predicted: &TrackState, cm: &CompositeMeasurement) -> Result<TrackState> {
    let p = &predicted.covariance;
    let r = &cm.covariance;
    let s_inv = spd_inverse(&(p + r), "innovation covariance")?;
    let gain = p * s_inv;
    let i_k = Mat4::identity() - gain;
    Ok(TrackState {
        mean: predicted.mean + gain * (cm.estimate - predicted.mean),
        covariance: symmetrize(&(i_k * p * i_k.transpose() + gain * r * gain.transpose())),
    })
}

/// True states of every target at the fusion times and at its measurement
/// times, from sequential white-noise-acceleration propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// `[target][k]` for `k = 0..=K`.
    pub fusion: Vec<Vec<StateVec>>,
    /// `[target][k * N + radar][m]`, aligned with the schedule's times.
    pub measured: Vec<Vec<Vec<StateVec>>>,
}

impl Truth {
    pub fn at_measurement(&self, target: usize, radar: usize, k: usize, m: usize, radars: usize) -> StateVec {
        self.measured[target][k * radars + radar][m]
    }
}

pub fn generate_truth(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    master_seed: u64,
    trial: u64,
) -> Result<Truth> {
    let n = scenario.num_radars();
    let intervals = scenario.grid.intervals;
    let mut fusion = Vec::with_capacity(scenario.num_targets());
    let mut measured = Vec::with_capacity(scenario.num_targets());
    for (q, target) in scenario.targets.iter().enumerate() {
        let mut r = rng::rng_for(master_seed, &[rng::stream::TRUTH, trial, q as u64]);
        let mut state = target.initial_state();
        let mut now = scenario.grid.fusion_time(0);
        let mut at_fusion = vec![state];
        let mut at_meas = vec![Vec::new(); intervals * n];
        let mut advance = |state: &mut StateVec, now: &mut f64, to: f64| -> Result<()> {
            let dt = to - *now;
            if dt > 0.0 {
                *state = transition_matrix(dt) * *state;
                if target.process_noise_intensity > 0.0 {
                    let chol = process_noise_cov(dt, target.process_noise_intensity)?
                        .cholesky()
                        .ok_or(Error::SingularMatrix("process noise"))?;
                    *state += chol.l() * StateVec::from(rng::standard_normals::<4>(&mut r));
                }
                *now = to;
            }
            Ok(())
        };
        for k in 0..intervals {
            let mut events: Vec<(f64, usize, usize)> = (0..n)
                .flat_map(|i| {
                    schedule.times(i, q, k).iter().enumerate().map(move |(m, t)| (*t, i, m))
                })
                .collect();
            events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for (t, i, m) in events {
                advance(&mut state, &mut now, t)?;
                let slot = &mut at_meas[k * n + i];
                debug_assert_eq!(slot.len(), m);
                slot.push(state);
            }
            advance(&mut state, &mut now, scenario.grid.fusion_time(k + 1))?;
            at_fusion.push(state);
        }
        fusion.push(at_fusion);
        measured.push(at_meas);
    }
    Ok(Truth { fusion, measured })
}

/// Source of per-interval allocations, given the allocator's view of the
/// targets before the interval.
pub trait AllocationPolicy {
    fn allocate(&mut self, k: usize, priors: &[TargetPrior]) -> Result<DVector<f64>>;
}

impl AllocationPolicy for &[DVector<f64>] {
    fn allocate(&mut self, k: usize, _: &[TargetPrior]) -> Result<DVector<f64>> {
        Ok(self[k].clone())
    }
}

impl<F: FnMut(usize, &[TargetPrior]) -> Result<DVector<f64>>> AllocationPolicy for F {
    fn allocate(&mut self, k: usize, priors: &[TargetPrior]) -> Result<DVector<f64>> {
        self(k, priors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Feed the allocator the filter's own predicted prior. Otherwise the
    /// allocator sees the noise-free planning chain.
    pub closed_loop: bool,
    pub ils: IlsConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            closed_loop: true,
            ils: IlsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub truth: StateVec,
    pub estimate: StateVec,
    pub covariance_trace: f64,
    /// Whether a composite measurement was fused in this interval.
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingHistory {
    /// `[target][k]` after the update at `t_{k+1}`.
    pub tracks: Vec<Vec<TrackRecord>>,
    /// Planning chain `B(s_{t_{k+1}})` per `[target][k]`.
    pub chain: Vec<Vec<BayesianInfo>>,
    pub allocations: Vec<DVector<f64>>,
}

/// Initial track and its prior information at `t_0`.
pub fn initial_tracks(scenario: &Scenario) -> Vec<TrackState> {
    let init = &scenario.tracking;
    scenario
        .targets
        .iter()
        .map(|t| TrackState {
            mean: t.initial_state() + StateVec::from(init.init_offset),
            covariance: Mat4::from_diagonal(&StateVec::from(init.init_cov_diag)),
        })
        .collect()
}

/// Planning chain step: information after interval `k` under `z`, given the
/// prior the allocator saw.
pub fn chain_step(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    k: usize,
    prior: &TargetPrior,
    target: usize,
    z: &DVector<f64>,
) -> Result<BayesianInfo> {
    let layout = Layout::new(scenario);
    let fusion_time = scenario.grid.fusion_time(k + 1);
    let mut info = prior.info.0;
    for (i, radar) in scenario.radars.iter().enumerate() {
        let energy = layout.energy(scenario, z, i, target);
        let denom = scenario.comm.interference_at_radar(i, layout.comm_power(z)) + radar.noise_var;
        if energy == 0.0 {
            continue;
        }
        let kernel = ConstKernel::new(radar, scenario.targets[target].rcs[i]);
        let d = crate::sensing::info_kernel(
            schedule.times(i, target, k),
            fusion_time,
            &prior.predicted,
            radar.position,
            &kernel,
        )?;
        info += d * (energy / denom);
    }
    Ok(BayesianInfo(symmetrize(&info)))
}

/// Prior handed to the allocator for the next interval.
pub fn predict_prior(scenario: &Scenario, target: usize, info: &BayesianInfo, mean: &StateVec) -> Result<TargetPrior> {
    let t0 = scenario.grid.t0;
    let gamma = process_noise_cov(t0, scenario.targets[target].process_noise_intensity)?;
    Ok(TargetPrior {
        info: prior_information(info, &transition_matrix(t0), &gamma)?,
        predicted: transition_matrix(t0) * mean,
    })
}

/// Simulated returns of one target in interval `k` under allocation `z`.
pub fn simulate_interval(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    truth: &Truth,
    k: usize,
    target: usize,
    z: &DVector<f64>,
    master_seed: u64,
    trial: u64,
) -> Result<StackedMeasurements> {
    let layout = Layout::new(scenario);
    let n = scenario.num_radars();
    let mut stack = StackedMeasurements::new(scenario.grid.fusion_time(k + 1));
    for (i, radar) in scenario.radars.iter().enumerate() {
        let (power, dwell) = layout.power_dwell(scenario, z, i, target);
        if !(power * dwell > 0.0) {
            continue;
        }
        let ctx = NoiseContext {
            comm_power: layout.comm_power(z),
            gain_sq: &scenario.comm.comm_to_radar_gain_sq[i],
            noise_var: radar.noise_var,
            power,
            dwell,
        };
        let cov = meas_cov(&ctx, &ConstKernel::new(radar, scenario.targets[target].rcs[i]))?;
        for (m, t) in schedule.times(i, target, k).iter().enumerate() {
            let key = [rng::stream::MEASUREMENT, trial, i as u64, target as u64, k as u64, m as u64];
            let normals = rng::standard_normals::<2>(&mut rng::rng_for(master_seed, &key));
            let state = truth.at_measurement(target, i, k, m, n);
            stack.entries.push(MeasurementEntry {
                radar: i,
                radar_position: radar.position,
                time: *t,
                value: perturb(&state, radar.position, &cov, normals)?,
                cov,
            });
        }
    }
    Ok(stack)
}

/// Runs one Monte Carlo trial: allocate, simulate, fuse, filter.
pub fn run_tracking(
    scenario: &Scenario,
    schedule: &MeasurementSchedule,
    policy: &mut impl AllocationPolicy,
    config: &TrackerConfig,
    master_seed: u64,
    trial: u64,
) -> Result<TrackingHistory> {
    let truth = generate_truth(scenario, schedule, master_seed, trial)?;
    let nt = scenario.num_targets();
    let t0 = scenario.grid.t0;
    let mut tracks = initial_tracks(scenario);
    let mut chain_info: Vec<BayesianInfo> = tracks.iter().map(|t| t.information()).collect::<Result<_>>()?;
    let mut chain_mean: Vec<StateVec> = tracks.iter().map(|t| t.mean).collect();
    let mut history = TrackingHistory {
        tracks: vec![Vec::with_capacity(scenario.grid.intervals); nt],
        chain: vec![Vec::with_capacity(scenario.grid.intervals); nt],
        allocations: Vec::with_capacity(scenario.grid.intervals),
    };
    for k in 0..scenario.grid.intervals {
        let planning: Vec<TargetPrior> = (0..nt)
            .map(|q| predict_prior(scenario, q, &chain_info[q], &chain_mean[q]))
            .collect::<Result<_>>()?;
        let mut predicted = Vec::with_capacity(nt);
        for (q, track) in tracks.iter().enumerate() {
            let gamma = process_noise_cov(t0, scenario.targets[q].process_noise_intensity)?;
            predicted.push(kf_predict(track, t0, &gamma));
        }
        let z = if config.closed_loop {
            let priors: Vec<TargetPrior> = predicted
                .iter()
                .map(|p| Ok(TargetPrior { info: p.information()?, predicted: p.mean }))
                .collect::<Result<_>>()?;
            policy.allocate(k, &priors)?
        } else {
            policy.allocate(k, &planning)?
        };

        for q in 0..nt {
            let annotate = |source: Error| Error::Fusion {
                target: q,
                interval: k,
                source: Box::new(source),
            };
            let stack = simulate_interval(scenario, schedule, &truth, k, q, &z, master_seed, trial)
                .map_err(annotate)?;
            let cm = if stack.entries.is_empty() {
                None
            } else {
                match ils_mle(&stack, &predicted[q].mean, &config.ils) {
                    Ok(cm) => Some(cm),
                    Err(Error::RankDeficient { .. }) => None,
                    Err(e) => return Err(annotate(e)),
                }
            };
            tracks[q] = match &cm {
                Some(cm) => kf_update(&predicted[q], cm).map_err(annotate)?,
                None => predicted[q],
            };
            let truth_state = truth.fusion[q][k + 1];
            history.tracks[q].push(TrackRecord {
                truth: truth_state,
                estimate: tracks[q].mean,
                covariance_trace: tracks[q].covariance.trace(),
                updated: cm.is_some(),
            });
            let next = chain_step(scenario, schedule, k, &planning[q], q, &z).map_err(annotate)?;
            history.chain[q].push(next);
            chain_info[q] = next;
            chain_mean[q] = planning[q].predicted;
        }
        history.allocations.push(z);
    }
    Ok(history)
}
