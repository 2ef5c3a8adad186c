//! Straight-highway simulation of the ego and target vehicles.

mod episode;
mod traffic;
mod world;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::policy::PolicyError;

pub use episode::{
    longitudinal_control, run_episode, run_episode_observed, EgoPolicy, EpisodeConfig,
    EpisodeResult, Frame, Scenario, TraceRow, EGO_ID,
};
pub use traffic::{PlacedVehicle, ReplaySample, ReplayVehicle, SyntheticTraffic, TrafficSource};
pub use world::{detect_collision, min_jerk, perceive, LaneChange, TrackConfig, VehicleState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("invalid replay: {0}")]
    BadReplay(String),
    #[error("no episode results to aggregate")]
    EmptyResults,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Runs one episode per seed, in parallel, keeping seed order.
pub fn run_episodes(
    sc: &Scenario,
    ego: &dyn EgoPolicy,
    seeds: &[u64],
) -> Result<Vec<EpisodeResult>, SimError> {
    seeds.par_iter().map(|&s| run_episode(sc, ego, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub n_lc: u64,
    pub n_hits: u64,
    /// s
    pub t_avg: f64,
    /// m
    pub d_avg: f64,
    /// km/h
    pub v_avg: f64,
}

pub fn aggregate(results: &[EpisodeResult]) -> Result<MetricsSummary, SimError> {
    if results.is_empty() {
        return Err(SimError::EmptyResults);
    }
    let n = results.len() as f64;
    let t_avg = results.iter().map(|r| r.elapsed).sum::<f64>() / n;
    let d_avg = results.iter().map(|r| r.distance).sum::<f64>() / n;
    Ok(MetricsSummary {
        episodes: results.len(),
        n_lc: results.iter().map(|r| r.lane_changes as u64).sum(),
        n_hits: results.iter().map(|r| r.hits as u64).sum(),
        t_avg,
        d_avg,
        v_avg: 3.6 * d_avg / t_avg,
    })
}

pub const METRICS_HEADER: &str = "episode,direction,n_lc,hits,T_s,D_m";

/// Per-episode rows followed by a `summary` row.
pub fn metrics_csv(results: &[EpisodeResult]) -> Result<String, SimError> {
    let summary = aggregate(results)?;
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{:.3},{:.3}\n",
            r.direction.as_str(),
            r.lane_changes,
            r.hits,
            r.elapsed,
            r.distance
        ));
    }
    let dirs: std::collections::BTreeSet<_> =
        results.iter().map(|r| r.direction.as_str()).collect();
    let dir = if dirs.len() == 1 {
        dirs.into_iter().next().unwrap_or("both")
    } else {
        "both"
    };
    out.push_str(&format!(
        "summary,{dir},{},{},{:.3},{:.3}\n",
        summary.n_lc, summary.n_hits, summary.t_avg, summary.d_avg
    ));
    Ok(out)
}

pub fn write_metrics_csv(path: &Path, results: &[EpisodeResult]) -> Result<(), SimError> {
    write_atomic(path, metrics_csv(results)?.as_bytes()).map_err(|e| SimError::io(path, e))
}

pub fn write_trace_jsonl(path: &Path, trace: &[TraceRow]) -> Result<(), SimError> {
    let mut buf = Vec::new();
    for row in trace {
        serde_json::to_writer(&mut buf, row).expect("trace rows serialize");
        buf.push(b'\n');
    }
    write_atomic(path, &buf).map_err(|e| SimError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Direction;

    fn result(t: f64, d: f64) -> EpisodeResult {
        EpisodeResult {
            seed: 0,
            direction: Direction::L2R,
            lane_changes: 1,
            hits: 0,
            elapsed: t,
            distance: d,
            trace: Vec::new(),
        }
    }

    #[test]
    fn aggregation() {
        assert!(matches!(aggregate(&[]), Err(SimError::EmptyResults)));
        let one = aggregate(&[result(64.84, 2100.0)]).unwrap();
        assert_eq!((one.t_avg, one.d_avg, one.n_lc), (64.84, 2100.0, 1));
        assert!((one.v_avg - 116.59).abs() < 0.01);
        let two = aggregate(&[result(60.0, 2100.0), result(70.0, 2100.0)]).unwrap();
        assert_eq!(two.t_avg, 65.0);
        assert!((two.v_avg - 116.31).abs() < 0.01);
        assert!((two.v_avg - 3.6 * two.d_avg / two.t_avg).abs() < 1e-12);
    }

    #[test]
    fn metrics_file_layout() {
        let csv = metrics_csv(&[result(60.0, 2100.0), result(70.0, 2100.0)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "0,l2r,1,0,60.000,2100.000");
        assert_eq!(lines[3], "summary,l2r,2,0,65.000,2100.000");
    }
}
