//! On-disk scenario schema (TOML).
//!
//! ```toml
//! [grid]
//! t0 = 6.0               # fusion interval length [s]
//! intervals = 10         # number of fusion intervals K
//! start_time = 0.0       # t_1 [s]
//!
//! [radars.1]
//! kind = "mmr"           # "mmr" | "par" | "msr"
//! position = [x, y]      # [m]
//! bandwidth = 75.0       # zeta_i
//! beamwidth = 0.02       # 3 dB receive beamwidth [rad]
//! noise_var = 2e-4       # receiver noise variance [W]
//! fixed_dwell = 2e-3     # [s]   mmr, msr
//! fixed_power = 20.0     # [W]   par, msr
//! power_budget = 60.0    # [W]   mmr
//! time_budget = 8e-3     # [s]   par
//! range_const = 1.0      # optional, default 1
//! bearing_const = 1.0    # optional, default 1
//! initial_time = [2.0, 2.0]      # first measurement time per target [s]
//! revisit_interval = [2.0, 2.0]  # per target [s]
//!
//! [comm]
//! links = 3
//! radar_to_comm_gain = [[[re, im], ...], ...]  # [link j][radar i]
//! comm_to_radar_gain = [[[re, im], ...], ...]  # [radar i][link j]
//! noise_var = 1e-3                               # [W]
//! throughput_floor = [5.0, 5.0, 5.0]             # [nats] per link, or [[...]; K]
//! bs_power_budget = 30.0                         # [W]
//!
//! [targets.1]
//! initial_state = [x, vx, y, vy]   # [m, m/s, m, m/s]
//! process_noise_intensity = 0.1    # [m^2/s^3]
//! rcs = [1.0, ...]                 # per radar [m^2]
//!
//! [tracking]                       # optional
//! init_offset = [0, 0, 0, 0]       # track mean minus truth at t_1
//! init_cov_diag = [1e4, 100, 1e4, 100]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: GridFile,
    #[serde(default)]
    pub radars: BTreeMap<String, RadarFile>,
    pub comm: CommFile,
    #[serde(default)]
    pub targets: BTreeMap<String, TargetFile>,
    pub tracking: Option<TrackingFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub t0: f64,
    pub intervals: usize,
    #[serde(default)]
    pub start_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindFile {
    Mmr,
    Par,
    Msr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarFile {
    pub kind: KindFile,
    pub position: [f64; 2],
    pub bandwidth: f64,
    pub beamwidth: f64,
    pub noise_var: f64,
    pub fixed_dwell: Option<f64>,
    pub fixed_power: Option<f64>,
    pub power_budget: Option<f64>,
    pub time_budget: Option<f64>,
    pub range_const: Option<f64>,
    pub bearing_const: Option<f64>,
    pub initial_time: Vec<f64>,
    pub revisit_interval: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FloorFile {
    Constant(Vec<f64>),
    PerInterval(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommFile {
    pub links: usize,
    pub radar_to_comm_gain: Vec<Vec<[f64; 2]>>,
    pub comm_to_radar_gain: Vec<Vec<[f64; 2]>>,
    pub noise_var: f64,
    pub throughput_floor: FloorFile,
    pub bs_power_budget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub initial_state: [f64; 4],
    #[serde(default)]
    pub process_noise_intensity: f64,
    pub rcs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingFile {
    pub init_offset: Option<[f64; 4]>,
    pub init_cov_diag: Option<[f64; 4]>,
}
