//! Result files: `result.json`, `series.csv`, `manifest.json`,
//! `traces.jsonl` and `tracks.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentResult, TrackRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub result: PathBuf,
    pub series: PathBuf,
    pub manifest: PathBuf,
    pub traces: PathBuf,
    pub tracks: PathBuf,
}

impl OutputFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            result: dir.join("result.json"),
            series: dir.join("series.csv"),
            manifest: dir.join("manifest.json"),
            traces: dir.join("traces.jsonl"),
            tracks: dir.join("tracks.csv"),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Output(e.to_string()))
}

pub fn series_csv(result: &ExperimentResult) -> String {
    let links = result.scenario.num_links();
    let mut out = String::from("run_id,policy,k,g_value,rmse");
    for j in 1..=links {
        write!(out, ",throughput_j{j}").unwrap();
    }
    out.push('\n');
    for p in &result.policies {
        for k in 0..p.rmse.len() {
            write!(out, "{},{},{},{},{}", result.run_id, p.policy.name(), k + 1, p.g_values[k], p.rmse[k]).unwrap();
            for v in &p.throughput[k] {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn tracks_csv(rows: &[TrackRow]) -> String {
    let mut out = String::from(
        "policy,trial,target,k,truth_x,truth_vx,truth_y,truth_vy,est_x,est_vx,est_y,est_vy,cov_trace\n",
    );
    for r in rows {
        write!(out, "{},{},{},{}", r.policy.name(), r.trial, r.target + 1, r.k + 1).unwrap();
        for v in r.truth.iter().chain(r.estimate.iter()) {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{}", r.covariance_trace).unwrap();
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    scenario_hash: &'a str,
    master_seed: u64,
    trials: usize,
    policies: Vec<&'static str>,
    version: &'static str,
    files: [&'static str; 5],
    config: &'a super::ExperimentConfig,
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, result: &ExperimentResult, tracks: &[TrackRow]) -> Result<OutputFiles> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let files = OutputFiles::in_dir(dir);
    write(&files.result, &json(result)?)?;
    write(&files.series, &series_csv(result))?;
    let manifest = Manifest {
        run_id: &result.run_id,
        scenario_hash: &result.scenario_hash,
        master_seed: result.config.master_seed,
        trials: result.config.trials,
        policies: result.policies.iter().map(|p| p.policy.name()).collect(),
        version: env!("CARGO_PKG_VERSION"),
        files: ["result.json", "series.csv", "manifest.json", "traces.jsonl", "tracks.csv"],
        config: &result.config,
    };
    write(&files.manifest, &json(&manifest)?)?;
    let mut traces = String::new();
    for p in &result.policies {
        for (k, trace) in p.traces.iter().enumerate() {
            for rec in trace {
                #[derive(Serialize)]
                struct Line<'a> {
                    policy: &'static str,
                    k: usize,
                    #[serde(flatten)]
                    record: &'a crate::allocator::TraceRecord,
                }
                let line = Line { policy: p.policy.name(), k: k + 1, record: rec };
                traces.push_str(&serde_json::to_string(&line).map_err(|e| Error::Output(e.to_string()))?);
                traces.push('\n');
            }
        }
    }
    write(&files.traces, &traces)?;
    write(&files.tracks, &tracks_csv(tracks))?;
    Ok(files)
}

pub fn load_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}
