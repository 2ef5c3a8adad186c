//! Vehicles on a straight multi-lane carriageway, in world coordinates.
//!
//! The carriageway follows the highD layout: a left-to-right recording drives
//! toward +x with the driver's left at smaller y; right-to-left is the same
//! road rotated by 180 degrees. Lane ids are in the driver's frame, 1 being
//! the rightmost lane.

use serde::{Deserialize, Serialize};

use crate::domain::{Direction, LaneRelation, Neighbor, NumericState, SceneBuilder, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// m
    pub length: f64,
    pub lane_count: i32,
    /// m
    pub lane_width: f64,
    pub direction: Direction,
    /// s
    pub dt: f64,
    /// s
    pub lane_change_duration: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            length: 2100.0,
            lane_count: 3,
            lane_width: 3.75,
            direction: Direction::L2R,
            dt: 0.1,
            lane_change_duration: 3.0,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.length > 0.0) {
            return Err("track length must be positive".into());
        }
        if self.lane_count < 2 {
            return Err("need at least two lanes".into());
        }
        if !(self.lane_width > 0.0) {
            return Err("lane width must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return Err("dt must lie in (0, 0.5]".into());
        }
        if !(self.lane_change_duration >= self.dt) {
            return Err("lane change must last at least one step".into());
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width
    }

    /// World x of a distance travelled from the track start.
    pub fn world_x(&self, station: f64) -> f64 {
        match self.direction {
            Direction::L2R => station,
            Direction::R2L => self.length - station,
        }
    }

    pub fn station(&self, x: f64) -> f64 {
        match self.direction {
            Direction::L2R => x,
            Direction::R2L => self.length - x,
        }
    }

    /// World y of a lateral position measured from the right road edge.
    pub fn world_y(&self, from_right: f64) -> f64 {
        match self.direction {
            Direction::L2R => self.width() - from_right,
            Direction::R2L => from_right,
        }
    }

    pub fn from_right(&self, y: f64) -> f64 {
        match self.direction {
            Direction::L2R => self.width() - y,
            Direction::R2L => y,
        }
    }

    pub fn lane_center_y(&self, lane: i32) -> f64 {
        self.world_y((lane as f64 - 0.5) * self.lane_width)
    }

    pub fn is_lane(&self, lane: i32) -> bool {
        (1..=self.lane_count).contains(&lane)
    }
}

/// Minimum-jerk blend from 0 to 1.
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub target_lane: i32,
    pub from_y: f64,
    pub to_y: f64,
    /// 0 at the start, 1 when complete.
    pub progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    /// Center, world frame, m.
    pub x: f64,
    pub y: f64,
    /// Speed along the travel direction, m/s.
    pub v: f64,
    pub length: f64,
    pub width: f64,
    pub lane: i32,
    pub lane_change: Option<LaneChange>,
    /// Cruise speed for target vehicles, m/s.
    pub desired_speed: f64,
}

impl VehicleState {
    pub fn new(track: &TrackConfig, id: u32, station: f64, lane: i32, v: f64) -> Self {
        Self {
            id,
            x: track.world_x(station),
            y: track.lane_center_y(lane),
            v,
            length: 4.5,
            width: 2.0,
            lane,
            lane_change: None,
            desired_speed: v,
        }
    }

    pub fn station(&self, track: &TrackConfig) -> f64 {
        track.station(self.x)
    }

    /// Lanes whose band the footprint overlaps.
    pub fn lanes_touched(&self, track: &TrackConfig) -> (i32, i32) {
        let u = track.from_right(self.y);
        let lo = ((u - self.width / 2.0) / track.lane_width).floor() as i32 + 1;
        let hi = ((u + self.width / 2.0) / track.lane_width).ceil() as i32;
        (lo.max(1), hi.min(track.lane_count).max(lo.max(1)))
    }

    pub fn start_lane_change(&mut self, track: &TrackConfig, target_lane: i32) {
        self.lane_change = Some(LaneChange {
            target_lane,
            from_y: self.y,
            to_y: track.lane_center_y(target_lane),
            progress: 0.0,
        });
    }

    /// Advances one step under `a` (m/s²). Returns true when a lane change completes.
    pub fn advance(&mut self, track: &TrackConfig, a: f64, dt: f64) -> bool {
        let a = if self.v + a * dt < 0.0 {
            -self.v / dt
        } else {
            a
        };
        let ds = self.v * dt + 0.5 * a * dt * dt;
        self.x += track.direction.sign() * ds;
        self.v = (self.v + a * dt).max(0.0);
        let Some(lc) = self.lane_change.as_mut() else {
            return false;
        };
        lc.progress = (lc.progress + dt / track.lane_change_duration).min(1.0);
        if lc.progress >= 1.0 - 1e-9 {
            self.y = lc.to_y;
            self.lane = lc.target_lane;
            self.lane_change = None;
            true
        } else {
            self.y = lc.from_y + (lc.to_y - lc.from_y) * min_jerk(lc.progress);
            false
        }
    }
}

/// Strict footprint overlap; touching is not a hit.
pub fn detect_collision(a: &VehicleState, b: &VehicleState) -> bool {
    (a.x - b.x).abs() < (a.length + b.length) / 2.0 && (a.y - b.y).abs() < (a.width + b.width) / 2.0
}

/// What `me` sees of `others`, in its forward frame. `others` may include
/// `me`; it is skipped by id.
pub fn perceive<'a>(
    track: &TrackConfig,
    me: &VehicleState,
    others: impl IntoIterator<Item = &'a VehicleState>,
    th: &Thresholds,
) -> NumericState {
    let sign = track.direction.sign();
    let own_lo = me
        .lane
        .min(me.lane_change.map_or(me.lane, |lc| lc.target_lane));
    let own_hi = me
        .lane
        .max(me.lane_change.map_or(me.lane, |lc| lc.target_lane));
    let mut scene = SceneBuilder::new(me.v, me.length, th.sensing_range);
    for o in others {
        if o.id == me.id {
            continue;
        }
        let offset = sign * (o.x - me.x);
        if offset.abs() - (me.length + o.length) / 2.0 > th.sensing_range {
            continue;
        }
        let (lo, hi) = o.lanes_touched(track);
        let mut add = |relation| {
            scene.add(Neighbor {
                relation,
                offset,
                length: o.length,
                velocity: o.v,
            });
        };
        if lo <= own_hi && own_lo <= hi {
            add(LaneRelation::Same);
        }
        if (lo..=hi).contains(&(me.lane + 1)) {
            add(LaneRelation::Left);
        }
        if (lo..=hi).contains(&(me.lane - 1)) {
            add(LaneRelation::Right);
        }
    }
    scene.build(
        me.lane,
        me.lane > 1,
        me.lane < track.lane_count,
        track.direction,
    )
}
