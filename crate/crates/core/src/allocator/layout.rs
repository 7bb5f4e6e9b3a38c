use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::scenario::{RadarKind, RadarResources, Scenario};

/// Index layout of the decision vector:
///
/// ```text
/// [ P_{i,q} for i in MMRs, q in targets | T_{i,q} for i in PARs, q in targets | P_c^j for j in links ]
/// ```
///
/// Radar-major within each block, radars in scenario order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub mmr: Vec<usize>,
    pub par: Vec<usize>,
    pub targets: usize,
    pub links: usize,
}

/// Role of one coordinate of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    MmrPower { radar: usize, target: usize },
    ParDwell { radar: usize, target: usize },
    CommPower { link: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationVector(pub DVector<f64>);

impl Layout {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            mmr: scenario.radars_of(RadarKind::Mmr),
            par: scenario.radars_of(RadarKind::Par),
            targets: scenario.num_targets(),
            links: scenario.num_links(),
        }
    }

    pub fn dim(&self) -> usize {
        (self.mmr.len() + self.par.len()) * self.targets + self.links
    }

    pub fn comm_offset(&self) -> usize {
        (self.mmr.len() + self.par.len()) * self.targets
    }

    pub fn comm_index(&self, link: usize) -> usize {
        self.comm_offset() + link
    }

    /// Index of the optimized resource for `(radar, target)`; `None` for MSRs.
    pub fn radar_index(&self, radar: usize, target: usize) -> Option<usize> {
        if let Some(pos) = self.mmr.iter().position(|r| *r == radar) {
            return Some(pos * self.targets + target);
        }
        self.par
            .iter()
            .position(|r| *r == radar)
            .map(|pos| (self.mmr.len() + pos) * self.targets + target)
    }

    pub fn slot(&self, index: usize) -> Slot {
        let q = self.targets;
        let n_mmr = self.mmr.len() * q;
        let n_par = self.par.len() * q;
        if index < n_mmr {
            Slot::MmrPower { radar: self.mmr[index / q], target: index % q }
        } else if index < n_mmr + n_par {
            let i = index - n_mmr;
            Slot::ParDwell { radar: self.par[i / q], target: i % q }
        } else {
            Slot::CommPower { link: index - n_mmr - n_par }
        }
    }

    pub fn comm_power<'a>(&self, z: &'a DVector<f64>) -> &'a [f64] {
        &z.as_slice()[self.comm_offset()..]
    }

    /// Fixed cofactor multiplying the optimized variable in `P*T` (MMR: its
    /// dwell, PAR: its power), or the whole fixed `P*T` for an MSR.
    pub fn energy_factor(scenario: &Scenario, radar: usize) -> f64 {
        match scenario.radars[radar].resources {
            RadarResources::Mmr { dwell, .. } => dwell,
            RadarResources::Par { power, .. } => power,
            RadarResources::Msr { power, dwell } => power * dwell,
        }
    }

    /// `P_{i,q} T_{i,q}` under allocation `z`.
    pub fn energy(&self, scenario: &Scenario, z: &DVector<f64>, radar: usize, target: usize) -> f64 {
        let factor = Self::energy_factor(scenario, radar);
        match self.radar_index(radar, target) {
            Some(idx) => factor * z[idx],
            None => factor,
        }
    }

    /// `(P, T)` actually used by `(radar, target)` under `z`.
    pub fn power_dwell(
        &self,
        scenario: &Scenario,
        z: &DVector<f64>,
        radar: usize,
        target: usize,
    ) -> (f64, f64) {
        let idx = self.radar_index(radar, target);
        match scenario.radars[radar].resources {
            RadarResources::Mmr { dwell, .. } => (z[idx.unwrap()], dwell),
            RadarResources::Par { power, .. } => (power, z[idx.unwrap()]),
            RadarResources::Msr { power, dwell } => (power, dwell),
        }
    }
}
