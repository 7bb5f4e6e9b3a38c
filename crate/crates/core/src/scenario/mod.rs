//! Static experiment description: radars, downlinks, targets, and the
//! fusion-time grid.
//!
//! Scenarios are loaded from TOML (see [`file`] for the schema) and
//! validated once; afterwards they are read-only.

pub mod file;
mod schedule;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::StateVec;
use file::{FloorFile, KindFile, RadarFile, ScenarioFile, TargetFile};

pub use schedule::{build_schedule, MeasurementSchedule};

/// Shipped illustrative scenario: 3 MMRs, 2 PARs, 1 MSR, 3 downlinks,
/// 2 crossing targets, 10 fusion intervals of 6 s.
pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadarKind {
    /// Co-located MIMO radar: power per target is optimized, dwell fixed.
    Mmr,
    /// Phased array: dwell per target is optimized, power fixed.
    Par,
    /// Mechanical scanning: power and dwell both fixed.
    Msr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadarResources {
    Mmr { dwell: f64, power_budget: f64 },
    Par { power: f64, time_budget: f64 },
    Msr { power: f64, dwell: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarNode {
    pub id: usize,
    pub position: [f64; 2],
    pub bandwidth: f64,
    pub beamwidth: f64,
    pub noise_var: f64,
    pub resources: RadarResources,
    pub range_const: f64,
    pub bearing_const: f64,
    pub initial_time: Vec<f64>,
    pub revisit_interval: Vec<f64>,
}

impl RadarNode {
    pub fn kind(&self) -> RadarKind {
        match self.resources {
            RadarResources::Mmr { .. } => RadarKind::Mmr,
            RadarResources::Par { .. } => RadarKind::Par,
            RadarResources::Msr { .. } => RadarKind::Msr,
        }
    }

    /// Fixed dwell for MMR/MSR.
    pub fn fixed_dwell(&self) -> Option<f64> {
        match self.resources {
            RadarResources::Mmr { dwell, .. } | RadarResources::Msr { dwell, .. } => Some(dwell),
            RadarResources::Par { .. } => None,
        }
    }

    /// Fixed transmit power for PAR/MSR.
    pub fn fixed_power(&self) -> Option<f64> {
        match self.resources {
            RadarResources::Par { power, .. } | RadarResources::Msr { power, .. } => Some(power),
            RadarResources::Mmr { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommSystem {
    pub links: usize,
    /// |alpha^r_{j,i}|^2, indexed `[link][radar]`.
    pub radar_to_comm_gain_sq: Vec<Vec<f64>>,
    /// |alpha^c_{i,j}|^2, indexed `[radar][link]`.
    pub comm_to_radar_gain_sq: Vec<Vec<f64>>,
    pub noise_var: f64,
    /// Throughput floor in nats, indexed `[interval][link]`.
    pub throughput_floor: Vec<Vec<f64>>,
    pub bs_power_budget: f64,
}

impl CommSystem {
    pub fn floor(&self, interval: usize, link: usize) -> f64 {
        let row = &self.throughput_floor[interval.min(self.throughput_floor.len() - 1)];
        row[link]
    }

    /// Interference power seen by radar `i` for downlink powers `comm_power`.
    pub fn interference_at_radar(&self, radar: usize, comm_power: &[f64]) -> f64 {
        self.comm_to_radar_gain_sq[radar]
            .iter()
            .zip(comm_power)
            .map(|(g, p)| g * p)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: usize,
    pub initial_state: [f64; 4],
    pub process_noise_intensity: f64,
    /// RCS seen by each radar.
    pub rcs: Vec<f64>,
}

impl TargetTruth {
    pub fn initial_state(&self) -> StateVec {
        StateVec::from(self.initial_state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionGrid {
    pub t0: f64,
    pub intervals: usize,
    pub start_time: f64,
}

impl FusionGrid {
    /// Fusion time t_k for 0-based `k`; interval `k` is `(t_k, t_{k+1}]`.
    pub fn fusion_time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingInit {
    pub init_offset: [f64; 4],
    pub init_cov_diag: [f64; 4],
}

impl Default for TrackingInit {
    fn default() -> Self {
        Self {
            init_offset: [0.0; 4],
            init_cov_diag: [1.0e4, 1.0e2, 1.0e4, 1.0e2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: FusionGrid,
    pub radars: Vec<RadarNode>,
    pub comm: CommSystem,
    pub targets: Vec<TargetTruth>,
    pub tracking: TrackingInit,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn default_scenario() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIO).expect("shipped default scenario is valid")
    }

    pub fn num_radars(&self) -> usize {
        self.radars.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_links(&self) -> usize {
        self.comm.links
    }

    /// Indices of radars of the given kind, in radar order.
    pub fn radars_of(&self, kind: RadarKind) -> Vec<usize> {
        self.radars
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind() == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        let g = &self.grid;
        if !(g.t0.is_finite() && g.t0 > 0.0) {
            return fail(format!("grid.t0 must be positive, got {}", g.t0));
        }
        if g.intervals == 0 {
            return fail("grid.intervals must be at least 1".into());
        }
        if !g.start_time.is_finite() {
            return fail("grid.start_time must be finite".into());
        }
        let n = self.radars.len();
        let q = self.targets.len();
        let j = self.comm.links;
        if q == 0 {
            return fail("at least one target is required".into());
        }
        if j == 0 {
            return fail("comm.links must be at least 1".into());
        }
        for (i, r) in self.radars.iter().enumerate() {
            let name = format!("radars.{}", i + 1);
            for (field, v) in [
                ("bandwidth", r.bandwidth),
                ("beamwidth", r.beamwidth),
                ("noise_var", r.noise_var),
                ("range_const", r.range_const),
                ("bearing_const", r.bearing_const),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return fail(format!("{name}.{field} must be positive, got {v}"));
                }
            }
            if !r.position.iter().all(|v| v.is_finite()) {
                return fail(format!("{name}.position must be finite"));
            }
            let resources = match r.resources {
                RadarResources::Mmr { dwell, power_budget } => {
                    [("fixed_dwell", dwell), ("power_budget", power_budget)]
                }
                RadarResources::Par { power, time_budget } => {
                    [("fixed_power", power), ("time_budget", time_budget)]
                }
                RadarResources::Msr { power, dwell } => {
                    [("fixed_power", power), ("fixed_dwell", dwell)]
                }
            };
            for (field, v) in resources {
                if !(v.is_finite() && v > 0.0) {
                    return fail(format!("{name}.{field} must be positive, got {v}"));
                }
            }
            if r.initial_time.len() != q || r.revisit_interval.len() != q {
                return fail(format!(
                    "{name}: initial_time and revisit_interval need one entry per target ({q})"
                ));
            }
            if !r.initial_time.iter().all(|t| t.is_finite()) {
                return fail(format!("{name}.initial_time must be finite"));
            }
            if let Some(v) = r.revisit_interval.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return fail(format!("{name}.revisit_interval must be positive, got {v}"));
            }
            if matches!(r.kind(), RadarKind::Mmr | RadarKind::Msr)
                && r.revisit_interval.iter().any(|v| *v != r.revisit_interval[0])
            {
                return fail(format!(
                    "{name}: {:?} radars revisit all targets with the same interval",
                    r.kind()
                ));
            }
        }
        let c = &self.comm;
        if c.radar_to_comm_gain_sq.len() != j
            || c.radar_to_comm_gain_sq.iter().any(|row| row.len() != n)
        {
            return fail(format!("comm.radar_to_comm_gain must be {j} links x {n} radars"));
        }
        if c.comm_to_radar_gain_sq.len() != n
            || c.comm_to_radar_gain_sq.iter().any(|row| row.len() != j)
        {
            return fail(format!("comm.comm_to_radar_gain must be {n} radars x {j} links"));
        }
        if c
            .radar_to_comm_gain_sq
            .iter()
            .chain(&c.comm_to_radar_gain_sq)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return fail("comm gains must be finite".into());
        }
        if !(c.noise_var.is_finite() && c.noise_var > 0.0) {
            return fail(format!("comm.noise_var must be positive, got {}", c.noise_var));
        }
        if !(c.bs_power_budget.is_finite() && c.bs_power_budget > 0.0) {
            return fail(format!(
                "comm.bs_power_budget must be positive, got {}",
                c.bs_power_budget
            ));
        }
        if c.throughput_floor.is_empty()
            || (c.throughput_floor.len() != 1 && c.throughput_floor.len() != g.intervals)
        {
            return fail("comm.throughput_floor must be one row or one row per interval".into());
        }
        for row in &c.throughput_floor {
            if row.len() != j {
                return fail(format!("comm.throughput_floor rows need {j} entries"));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return fail(format!("comm.throughput_floor must be nonnegative, got {v}"));
            }
        }
        for (t, target) in self.targets.iter().enumerate() {
            let name = format!("targets.{}", t + 1);
            if !target.initial_state.iter().all(|v| v.is_finite()) {
                return fail(format!("{name}.initial_state must be finite"));
            }
            if !(target.process_noise_intensity.is_finite() && target.process_noise_intensity >= 0.0)
            {
                return fail(format!("{name}.process_noise_intensity must be nonnegative"));
            }
            if target.rcs.len() != n {
                return fail(format!("{name}.rcs needs one entry per radar ({n})"));
            }
            if let Some(v) = target.rcs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return fail(format!("{name}.rcs must be positive, got {v}"));
            }
        }
        if !self.tracking.init_offset.iter().all(|v| v.is_finite()) {
            return fail("tracking.init_offset must be finite".into());
        }
        if !self.tracking.init_cov_diag.iter().all(|v| v.is_finite() && *v > 0.0) {
            return fail("tracking.init_cov_diag must be positive".into());
        }
        Ok(())
    }

    fn from_file(file: ScenarioFile) -> Result<Self> {
        let radars_file = ordered("radars", file.radars)?;
        let targets_file = ordered("targets", file.targets)?;
        let radars = radars_file
            .into_iter()
            .enumerate()
            .map(|(i, r)| radar_from_file(i, r))
            .collect::<Result<Vec<_>>>()?;
        let targets = targets_file
            .into_iter()
            .enumerate()
            .map(|(id, t): (usize, TargetFile)| TargetTruth {
                id,
                initial_state: t.initial_state,
                process_noise_intensity: t.process_noise_intensity,
                rcs: t.rcs,
            })
            .collect();
        let c = file.comm;
        let sq = |rows: Vec<Vec<[f64; 2]>>| -> Vec<Vec<f64>> {
            rows.into_iter()
                .map(|row| row.into_iter().map(|[re, im]| re * re + im * im).collect())
                .collect()
        };
        let throughput_floor = match c.throughput_floor {
            FloorFile::Constant(row) => vec![row],
            FloorFile::PerInterval(rows) => rows,
        };
        let tracking = file.tracking.map_or_else(TrackingInit::default, |t| {
            let d = TrackingInit::default();
            TrackingInit {
                init_offset: t.init_offset.unwrap_or(d.init_offset),
                init_cov_diag: t.init_cov_diag.unwrap_or(d.init_cov_diag),
            }
        });
        let scenario = Scenario {
            grid: FusionGrid {
                t0: file.grid.t0,
                intervals: file.grid.intervals,
                start_time: file.grid.start_time,
            },
            radars,
            comm: CommSystem {
                links: c.links,
                radar_to_comm_gain_sq: sq(c.radar_to_comm_gain),
                comm_to_radar_gain_sq: sq(c.comm_to_radar_gain),
                noise_var: c.noise_var,
                throughput_floor,
                bs_power_budget: c.bs_power_budget,
            },
            targets,
            tracking,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Orders `[section.N]` tables by N, requiring keys 1..=len.
fn ordered<T>(section: &str, map: std::collections::BTreeMap<String, T>) -> Result<Vec<T>> {
    let mut keyed = map
        .into_iter()
        .map(|(key, v)| {
            key.trim()
                .parse::<usize>()
                .map(|n| (n, v))
                .map_err(|_| Error::Validation(format!("{section}.{key}: key must be an integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by_key(|(n, _)| *n);
    for (pos, (n, _)) in keyed.iter().enumerate() {
        if *n != pos + 1 {
            return Err(Error::Validation(format!(
                "{section} keys must be numbered 1..={}, found {n}",
                keyed.len()
            )));
        }
    }
    Ok(keyed.into_iter().map(|(_, v)| v).collect())
}

fn radar_from_file(index: usize, r: RadarFile) -> Result<RadarNode> {
    let name = format!("radars.{}", index + 1);
    let need = |field: &str, v: Option<f64>| {
        v.ok_or_else(|| Error::Validation(format!("{name}: missing required field {field}")))
    };
    let resources = match r.kind {
        KindFile::Mmr => RadarResources::Mmr {
            dwell: need("fixed_dwell", r.fixed_dwell)?,
            power_budget: need("power_budget", r.power_budget)?,
        },
        KindFile::Par => RadarResources::Par {
            power: need("fixed_power", r.fixed_power)?,
            time_budget: need("time_budget", r.time_budget)?,
        },
        KindFile::Msr => RadarResources::Msr {
            power: need("fixed_power", r.fixed_power)?,
            dwell: need("fixed_dwell", r.fixed_dwell)?,
        },
    };
    Ok(RadarNode {
        id: index,
        position: r.position,
        bandwidth: r.bandwidth,
        beamwidth: r.beamwidth,
        noise_var: r.noise_var,
        resources,
        range_const: r.range_const.unwrap_or(1.0),
        bearing_const: r.bearing_const.unwrap_or(1.0),
        initial_time: r.initial_time,
        revisit_interval: r.revisit_interval,
    })
}
