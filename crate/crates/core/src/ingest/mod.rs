//! highD-format trajectories: loading, lane-change detection and
//! state/action pairs for behavior cloning.

mod record;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Direction, LaneRelation, Neighbor, NumericState, SceneBuilder, Sector, Thresholds,
};
use crate::fsutil::write_atomic;
use crate::policy::LaneAction;

pub use record::{HighDRecorder, TRACK_COLUMNS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column {0:?}")]
    SchemaError(String),
    #[error("no data rows")]
    EmptyFile,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One row of a highD tracks file. `x`, `y` are the upper-left corner of the
/// bounding box; `width` is its extent along x, `height` along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u32,
    #[serde(rename = "id")]
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    #[serde(rename = "xVelocity")]
    pub x_velocity: f64,
    #[serde(rename = "laneId")]
    pub lane_id: i32,
}

impl TrackRow {
    pub fn center_x(&self) -> f64 {
        self.x + self.width / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.y + self.height / 2.0
    }
}

/// Rows grouped by vehicle, each group sorted by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recording {
    pub vehicles: BTreeMap<u32, Vec<TrackRow>>,
}

impl Recording {
    pub fn from_rows(rows: impl IntoIterator<Item = TrackRow>) -> Self {
        let mut vehicles: BTreeMap<u32, Vec<TrackRow>> = BTreeMap::new();
        for r in rows {
            vehicles.entry(r.vehicle_id).or_default().push(r);
        }
        for rows in vehicles.values_mut() {
            rows.sort_by_key(|r| r.frame);
        }
        Self { vehicles }
    }

    pub fn row_count(&self) -> usize {
        self.vehicles.values().map(Vec::len).sum()
    }
}

const REQUIRED: [&str; 8] = [
    "frame",
    "id",
    "x",
    "y",
    "width",
    "height",
    "xVelocity",
    "laneId",
];

pub fn load_tracks(path: &Path) -> Result<Recording, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_tracks(file)
}

pub fn read_tracks(input: impl std::io::Read) -> Result<Recording, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().all(str::is_empty) {
        return Err(IngestError::EmptyFile);
    }
    if let Some(missing) = REQUIRED.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(IngestError::SchemaError((*missing).to_string()));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<TrackRow>() {
        rows.push(rec.map_err(csv_error)?);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(Recording::from_rows(rows))
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Parse {
        line,
        message: e.to_string(),
    }
}

/// How highD lane ids run relative to the driver's left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaneOrdering {
    /// Upper carriageway, traffic toward -x.
    LeftIncreasing,
    /// Lower carriageway, traffic toward +x.
    RightIncreasing,
}

impl LaneOrdering {
    pub fn for_direction(d: Direction) -> Self {
        match d {
            Direction::R2L => Self::LeftIncreasing,
            Direction::L2R => Self::RightIncreasing,
        }
    }

    /// Lane id of the lane `steps` lanes to the driver's left.
    pub fn left_of(self, lane_id: i32, steps: i32) -> i32 {
        match self {
            Self::LeftIncreasing => lane_id + steps,
            Self::RightIncreasing => lane_id - steps,
        }
    }

    fn action(self, from: i32, to: i32) -> LaneAction {
        let toward_left = match self {
            Self::LeftIncreasing => to > from,
            Self::RightIncreasing => to < from,
        };
        if toward_left {
            LaneAction::LLC
        } else {
            LaneAction::RLC
        }
    }
}

/// Direction of travel from the mean longitudinal velocity.
pub fn travel_direction(rows: &[TrackRow]) -> Direction {
    if rows.iter().map(|r| r.x_velocity).sum::<f64>() < 0.0 {
        Direction::R2L
    } else {
        Direction::L2R
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub vehicle_id: u32,
    /// First frame in the new lane.
    pub frame: u32,
    pub action: LaneAction,
}

/// One event per lane-id transition that holds for at least `debounce` rows.
pub fn detect_lane_changes(
    rows: &[TrackRow],
    ordering: LaneOrdering,
    debounce: usize,
) -> Vec<LaneChangeEvent> {
    let mut events = Vec::new();
    let Some(first) = rows.first() else {
        return events;
    };
    let mut stable = first.lane_id;
    let mut i = 0;
    while i < rows.len() {
        let lane = rows[i].lane_id;
        let run = rows[i..].iter().take_while(|r| r.lane_id == lane).count();
        if lane != stable && run >= debounce.max(1) {
            events.push(LaneChangeEvent {
                vehicle_id: rows[i].vehicle_id,
                frame: rows[i].frame,
                action: ordering.action(stable, lane),
            });
            stable = lane;
        }
        i += run;
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub thresholds: Thresholds,
    /// Label lookahead, frames.
    pub window: u32,
    /// Sample frames with `frame % stride == 0`.
    pub stride: u32,
    /// Frames a new lane must hold to count as a change.
    pub debounce: usize,
    /// Speed normalizer, m/s.
    pub v_max: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            window: 40,
            stride: 5,
            debounce: 10,
            v_max: 50.0,
        }
    }
}

pub const FEATURE_COUNT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateActionPair {
    pub features: [f64; FEATURE_COUNT],
    pub label: LaneAction,
}

impl StateActionPair {
    /// Ordered (LK, LLC, RLC).
    pub fn one_hot(&self) -> [f64; 3] {
        let mut y = [0.0; 3];
        y[self.label.index()] = 1.0;
        y
    }
}

/// Eight sector gaps over the sensing range (1 when vacant), then speed over `v_max`.
pub fn encode_features(ns: &NumericState, th: &Thresholds, v_max: f64) -> [f64; FEATURE_COUNT] {
    let mut f = [1.0; FEATURE_COUNT];
    for s in Sector::ALL {
        if let Some(t) = ns.sector(s).filter(|t| t.gap <= th.sensing_range) {
            f[s.index()] = (t.gap / th.sensing_range).clamp(0.0, 1.0);
        }
    }
    f[8] = (ns.ego_velocity / v_max).clamp(0.0, 1.0);
    f
}

/// Lane ids used by each carriageway.
fn lane_bounds(rec: &Recording) -> BTreeMap<Direction, (i32, i32)> {
    let mut out: BTreeMap<Direction, (i32, i32)> = BTreeMap::new();
    for rows in rec.vehicles.values() {
        let d = travel_direction(rows);
        for r in rows {
            let e = out.entry(d).or_insert((r.lane_id, r.lane_id));
            e.0 = e.0.min(r.lane_id);
            e.1 = e.1.max(r.lane_id);
        }
    }
    out
}

/// Scene around `me` among the rows of one frame.
fn scene(
    me: &TrackRow,
    dir: Direction,
    bounds: (i32, i32),
    frame: &[(Direction, TrackRow)],
    th: &Thresholds,
) -> NumericState {
    let ordering = LaneOrdering::for_direction(dir);
    let sign = dir.sign();
    let mut b = SceneBuilder::new(me.x_velocity.abs(), me.width, th.sensing_range);
    for (d, o) in frame {
        if *d != dir || o.vehicle_id == me.vehicle_id {
            continue;
        }
        let relation = if o.lane_id == me.lane_id {
            LaneRelation::Same
        } else if o.lane_id == ordering.left_of(me.lane_id, 1) {
            LaneRelation::Left
        } else if o.lane_id == ordering.left_of(me.lane_id, -1) {
            LaneRelation::Right
        } else {
            continue;
        };
        b.add(Neighbor {
            relation,
            offset: sign * (o.center_x() - me.center_x()),
            length: o.width,
            velocity: o.x_velocity.abs(),
        });
    }
    let in_road = |l: i32| (bounds.0..=bounds.1).contains(&l);
    let driver_lane = match ordering {
        LaneOrdering::LeftIncreasing => me.lane_id - bounds.0 + 1,
        LaneOrdering::RightIncreasing => bounds.1 - me.lane_id + 1,
    };
    b.build(
        driver_lane,
        in_road(ordering.left_of(me.lane_id, -1)),
        in_road(ordering.left_of(me.lane_id, 1)),
        dir,
    )
}

/// Pairs ordered by (vehicle id, frame).
pub fn extract_pairs(rec: &Recording, cfg: &ExtractConfig) -> Vec<StateActionPair> {
    let bounds = lane_bounds(rec);
    let mut frames: BTreeMap<u32, Vec<(Direction, TrackRow)>> = BTreeMap::new();
    let mut dirs = BTreeMap::new();
    for (id, rows) in &rec.vehicles {
        let d = travel_direction(rows);
        dirs.insert(*id, d);
        for r in rows {
            frames.entry(r.frame).or_default().push((d, *r));
        }
    }
    let stride = cfg.stride.max(1);
    let mut out = Vec::new();
    for (id, rows) in &rec.vehicles {
        let dir = dirs[id];
        let events = detect_lane_changes(rows, LaneOrdering::for_direction(dir), cfg.debounce);
        for r in rows.iter().filter(|r| r.frame % stride == 0) {
            let ns = scene(r, dir, bounds[&dir], &frames[&r.frame], &cfg.thresholds);
            let label = events
                .iter()
                .find(|e| e.frame >= r.frame && e.frame < r.frame + cfg.window)
                .map_or(LaneAction::LK, |e| e.action);
            out.push(StateActionPair {
                features: encode_features(&ns, &cfg.thresholds, cfg.v_max),
                label,
            });
        }
    }
    out
}

pub const PAIRS_HEADER: [&str; 10] = [
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "label",
];

pub fn write_pairs(path: &Path, pairs: &[StateActionPair]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PAIRS_HEADER).map_err(csv_error)?;
    for p in pairs {
        let mut rec: Vec<String> = p.features.iter().map(|v| format!("{v}")).collect();
        rec.push(p.label.as_str().to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IngestError::io(path, e.into_error()))?;
    write_atomic(path, &bytes).map_err(|e| IngestError::io(path, e))
}

pub fn load_pairs(path: &Path) -> Result<Vec<StateActionPair>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if let Some(missing) = PAIRS_HEADER
        .iter()
        .find(|c| !headers.iter().any(|h| h == **c))
    {
        return Err(IngestError::SchemaError((*missing).to_string()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| IngestError::Parse { line, message };
        let mut features = [0.0; FEATURE_COUNT];
        for (k, f) in features.iter_mut().enumerate() {
            let v: f64 = rec[k]
                .trim()
                .parse()
                .map_err(|e| bad(format!("f{}: {e}", k + 1)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("f{} = {v} outside [0, 1]", k + 1)));
            }
            *f = v;
        }
        let label = rec[FEATURE_COUNT].trim().parse().map_err(bad)?;
        out.push(StateActionPair { features, label });
    }
    if out.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(out)
}
