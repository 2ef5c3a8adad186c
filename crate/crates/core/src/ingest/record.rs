use std::path::Path;

use super::{IngestError, Recording, TrackRow};
use crate::fsutil::write_atomic;
use crate::sim::Frame;

pub const TRACK_COLUMNS: [&str; 8] = [
    "frame",
    "id",
    "x",
    "y",
    "width",
    "height",
    "xVelocity",
    "laneId",
];

/// Collects simulator frames as highD rows. Lane ids count up with y, one
/// id per lane of the simulated carriageway.
#[derive(Debug, Default)]
pub struct HighDRecorder {
    rows: Vec<TrackRow>,
    /// Ids are offset per episode so several episodes share one file.
    id_offset: u32,
    frame_offset: u32,
    last_frame: u32,
    max_id: u32,
}

impl HighDRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, f: &Frame) {
        let frame = self.frame_offset + f.step as u32;
        self.last_frame = self.last_frame.max(frame);
        let sign = f.track.direction.sign();
        for v in f.vehicles {
            let lane_id =
                ((v.y / f.track.lane_width).floor() as i32 + 1).clamp(1, f.track.lane_count);
            let id = self.id_offset + v.id + 1;
            self.max_id = self.max_id.max(id);
            self.rows.push(TrackRow {
                frame,
                vehicle_id: id,
                x: v.x - v.length / 2.0,
                y: v.y - v.width / 2.0,
                width: v.length,
                height: v.width,
                x_velocity: sign * v.v,
                lane_id,
            });
        }
    }

    /// Starts a new episode with fresh ids and later frames.
    pub fn next_episode(&mut self) {
        self.id_offset = self.max_id;
        self.frame_offset = self.last_frame + 1000;
    }

    pub fn rows(&self) -> &[TrackRow] {
        &self.rows
    }

    pub fn into_recording(self) -> Recording {
        Recording::from_rows(self.rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        write_tracks(path, &self.rows)
    }
}

pub fn write_tracks(path: &Path, rows: &[TrackRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(super::csv_error)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IngestError::io(path, e.into_error()))?;
    write_atomic(path, &bytes).map_err(|e| IngestError::io(path, e))
}
