//! Multi-episode runs, demonstration recording and the SIL/DIL comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Direction;
use crate::ingest::{HighDRecorder, Recording};
use crate::sim::{
    aggregate, run_episode_observed, run_episodes, EgoPolicy, EpisodeResult, MetricsSummary,
    Scenario, SimError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directions {
    L2R,
    R2L,
    #[default]
    Both,
}

impl Directions {
    pub fn list(self) -> Vec<Direction> {
        match self {
            Self::L2R => vec![Direction::L2R],
            Self::R2L => vec![Direction::R2L],
            Self::Both => vec![Direction::L2R, Direction::R2L],
        }
    }
}

impl FromStr for Directions {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l2r" => Ok(Self::L2R),
            "r2l" => Ok(Self::R2L),
            "both" => Ok(Self::Both),
            other => Err(format!("expected l2r, r2l or both, got {other:?}")),
        }
    }
}

impl fmt::Display for Directions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L2R => "l2r",
            Self::R2L => "r2l",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub seed: u64,
    pub directions: Directions,
    /// SIL episodes recorded as the behavior-cloning corpus.
    pub demo_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            episodes: 50,
            seed: 0,
            directions: Directions::Both,
            demo_episodes: 20,
        }
    }
}

/// Evaluation seeds; each direction draws its own traffic.
pub fn episode_seeds(base: u64, direction: Direction, n: usize) -> Vec<u64> {
    let offset = match direction {
        Direction::L2R => 0,
        Direction::R2L => 1 << 32,
    };
    (0..n as u64)
        .map(|i| base.wrapping_add(offset + i))
        .collect()
}

/// Demonstration seeds, disjoint from the evaluation seeds; directions alternate.
pub fn demo_seeds(base: u64, n: usize) -> Vec<(Direction, u64)> {
    (0..n as u64)
        .map(|i| {
            let d = if i % 2 == 0 {
                Direction::L2R
            } else {
                Direction::R2L
            };
            (d, base.wrapping_add((2 << 32) + i))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DirectionRun {
    pub direction: Direction,
    pub results: Vec<EpisodeResult>,
    pub summary: MetricsSummary,
}

pub fn evaluate(
    sc: &Scenario,
    policy: &dyn EgoPolicy,
    cfg: &ExperimentConfig,
) -> Result<Vec<DirectionRun>, SimError> {
    cfg.directions
        .list()
        .into_iter()
        .map(|d| {
            let results = run_episodes(
                &sc.with_direction(d),
                policy,
                &episode_seeds(cfg.seed, d, cfg.episodes),
            )?;
            let summary = aggregate(&results)?;
            Ok(DirectionRun {
                direction: d,
                results,
                summary,
            })
        })
        .collect()
}

/// Runs `policy` on the demonstration seeds, recording every vehicle.
pub fn record_demonstrations(
    sc: &Scenario,
    policy: &dyn EgoPolicy,
    cfg: &ExperimentConfig,
) -> Result<Recording, SimError> {
    let mut rec = HighDRecorder::new();
    let mut quiet = sc.clone();
    quiet.episode.record_trace = false;
    for (d, seed) in demo_seeds(cfg.seed, cfg.demo_episodes) {
        run_episode_observed(&quiet.with_direction(d), policy, seed, &mut |f| {
            rec.observe(f)
        })?;
        rec.next_episode();
    }
    Ok(rec.into_recording())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub direction: Direction,
    pub summary: MetricsSummary,
}

pub const COMPARISON_HEADER: &str = "method,direction,episodes,N_LC,N_hits,T_avg,D_avg,V_avg";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        let s = &r.summary;
        out.push_str(&format!(
            "{},{},{},{},{},{:.3},{:.3},{:.3}\n",
            r.method, r.direction, s.episodes, s.n_lc, s.n_hits, s.t_avg, s.d_avg, s.v_avg
        ));
    }
    out
}

/// Both agents on identical seeds and traffic, one row per method and direction.
pub fn compare(
    sc: &Scenario,
    agents: &[(&str, &dyn EgoPolicy)],
    cfg: &ExperimentConfig,
) -> Result<Vec<ComparisonRow>, SimError> {
    let mut rows = Vec::new();
    for (name, policy) in agents {
        for run in evaluate(sc, *policy, cfg)? {
            rows.push(ComparisonRow {
                method: name.to_string(),
                direction: run.direction,
                summary: run.summary,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_disjoint() {
        let a = episode_seeds(7, Direction::L2R, 50);
        let b = episode_seeds(7, Direction::R2L, 50);
        let c: Vec<u64> = demo_seeds(7, 50).into_iter().map(|(_, s)| s).collect();
        assert!(a.iter().all(|s| !b.contains(s) && !c.contains(s)));
        assert!(b.iter().all(|s| !c.contains(s)));
    }

    #[test]
    fn directions_parse() {
        assert_eq!("BOTH".parse::<Directions>().unwrap().list().len(), 2);
        assert_eq!(
            "r2l".parse::<Directions>().unwrap().list(),
            vec![Direction::R2L]
        );
        assert!("up".parse::<Directions>().is_err());
    }

    #[test]
    fn comparison_layout() {
        let s = MetricsSummary {
            episodes: 2,
            n_lc: 1,
            n_hits: 0,
            t_avg: 65.0,
            d_avg: 2100.0,
            v_avg: 116.3077,
        };
        let csv = comparison_csv(&[ComparisonRow {
            method: "SIL".into(),
            direction: Direction::R2L,
            summary: s,
        }]);
        assert_eq!(
            csv,
            format!("{COMPARISON_HEADER}\nSIL,r2l,2,1,0,65.000,2100.000,116.308\n")
        );
    }
}
