//! Where target vehicles come from: seeded synthetic flow, replayed
//! trajectories, or a fixed placement.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{TrackConfig, VehicleState};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficSource {
    Synthetic(SyntheticTraffic),
    Replay { vehicles: Vec<ReplayVehicle> },
    Fixed { vehicles: Vec<PlacedVehicle> },
}

impl Default for TrafficSource {
    fn default() -> Self {
        Self::Synthetic(SyntheticTraffic::default())
    }
}

impl TrafficSource {
    pub fn empty() -> Self {
        Self::Fixed {
            vehicles: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            Self::Synthetic(s) => s.validate(),
            Self::Replay { vehicles } => vehicles.iter().try_for_each(ReplayVehicle::validate),
            Self::Fixed { vehicles } => {
                if vehicles.iter().any(|v| !(v.speed >= 0.0 && v.length > 0.0)) {
                    return Err(SimError::BadConfig(
                        "placed vehicles need speed >= 0 and length > 0".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Poisson arrivals per lane, cruising at uniformly drawn speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraffic {
    /// veh/s per lane
    pub spawn_rate: f64,
    /// m/s
    pub speed_min: f64,
    pub speed_max: f64,
    /// Split the speed range into per-lane bands, slowest on the right.
    pub lane_speed_bands: bool,
    /// Minimum bumper gap between spawned vehicles, m.
    pub min_gap: f64,
    /// Fill the track at t = 0 with the stationary flow.
    pub prepopulate: bool,
    /// Kept free around the ego's start, m.
    pub ego_clearance: f64,
}

impl Default for SyntheticTraffic {
    fn default() -> Self {
        Self {
            spawn_rate: 0.06,
            speed_min: 22.0,
            speed_max: 31.0,
            lane_speed_bands: true,
            min_gap: 25.0,
            prepopulate: true,
            ego_clearance: 40.0,
        }
    }
}

impl SyntheticTraffic {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.spawn_rate >= 0.0 && self.spawn_rate.is_finite()) {
            return Err(SimError::BadConfig(
                "spawn rate must be finite and >= 0".into(),
            ));
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return Err(SimError::BadConfig(
                "need 0 <= speed_min <= speed_max".into(),
            ));
        }
        if !(self.min_gap >= 0.0 && self.ego_clearance >= 0.0) {
            return Err(SimError::BadConfig("gaps must be >= 0".into()));
        }
        Ok(())
    }

    fn speed_band(&self, track: &TrackConfig, lane: i32) -> (f64, f64) {
        if !self.lane_speed_bands {
            return (self.speed_min, self.speed_max);
        }
        let w = (self.speed_max - self.speed_min) / track.lane_count as f64;
        let lo = self.speed_min + w * (lane - 1) as f64;
        (lo, lo + w)
    }

    fn draw_speed(&self, track: &TrackConfig, lane: i32, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.speed_band(track, lane);
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    /// Vehicles present at t = 0. Placement is in the driver's frame, so a
    /// seed yields mirror-image traffic in the two directions.
    pub(crate) fn initial(
        &self,
        track: &TrackConfig,
        ego: &VehicleState,
        horizon: f64,
        rng: &mut ChaCha8Rng,
        next_id: &mut u32,
    ) -> Vec<VehicleState> {
        let mut out = Vec::new();
        if !self.prepopulate || self.spawn_rate == 0.0 {
            return out;
        }
        let ego_s = ego.station(track);
        for lane in 1..=track.lane_count {
            let (lo, hi) = self.speed_band(track, lane);
            let mean_spacing = 0.5 * (lo + hi) / self.spawn_rate;
            let mut s = rng.gen_range(0.0..mean_spacing);
            while s < horizon {
                let v = self.draw_speed(track, lane, rng);
                let clear = (s - ego_s).abs() > self.ego_clearance + ego.length;
                if clear {
                    out.push(VehicleState::new(track, *next_id, s, lane, v));
                    *next_id += 1;
                }
                s += self.min_gap + 4.5 + exp_sample(rng, mean_spacing);
            }
        }
        out
    }

    /// Arrivals at the track start during one step.
    pub(crate) fn arrivals(
        &self,
        track: &TrackConfig,
        present: &[VehicleState],
        ego: &VehicleState,
        rng: &mut ChaCha8Rng,
        next_id: &mut u32,
    ) -> Vec<VehicleState> {
        let mut out = Vec::new();
        let p = self.spawn_rate * track.dt;
        let ego_near = ego.station(track) < self.ego_clearance + ego.length;
        for lane in 1..=track.lane_count {
            let arrive = rng.gen_bool(p.min(1.0));
            let v = self.draw_speed(track, lane, rng);
            if !arrive || ego_near {
                continue;
            }
            // nearest vehicle touching this lane near the entry
            let leader = present
                .iter()
                .filter(|o| {
                    let (lo, hi) = o.lanes_touched(track);
                    (lo..=hi).contains(&lane)
                })
                .map(|o| (o.station(track), o.v, o.length))
                .filter(|(s, _, _)| *s > -10.0)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let v = match leader {
                Some((s, _, len)) if s - (len + 4.5) / 2.0 < self.min_gap => continue,
                Some((s, lv, _)) if s < 150.0 => v.min(lv),
                _ => v,
            };
            out.push(VehicleState::new(track, *next_id, 0.0, lane, v));
            *next_id += 1;
        }
        out
    }
}

fn exp_sample(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    -mean * u.ln()
}

/// A vehicle placed at t = 0 that cruises at its own speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedVehicle {
    /// Distance from the track start, m.
    pub station: f64,
    pub lane: i32,
    /// m/s; 0 makes a standing obstacle.
    pub speed: f64,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    4.5
}

impl PlacedVehicle {
    pub fn new(station: f64, lane: i32, speed: f64) -> Self {
        Self {
            station,
            lane,
            speed,
            length: 4.5,
        }
    }
}

/// One observation of a replayed vehicle, in the driver's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaySample {
    /// s
    pub t: f64,
    /// Distance from the track start, m.
    pub station: f64,
    /// Lateral center position measured from the right road edge, m.
    pub lateral: f64,
    /// m/s
    pub v: f64,
}

/// A recorded trajectory; the vehicle exists between its first and last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayVehicle {
    pub id: u32,
    pub length: f64,
    pub width: f64,
    pub samples: Vec<ReplaySample>,
}

impl ReplayVehicle {
    fn validate(&self) -> Result<(), SimError> {
        if self.samples.is_empty() {
            return Err(SimError::BadReplay(format!(
                "vehicle {} has no samples",
                self.id
            )));
        }
        if self.samples.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return Err(SimError::BadReplay(format!(
                "vehicle {} timestamps not increasing",
                self.id
            )));
        }
        Ok(())
    }

    /// Interpolated state at `t`, or `None` outside the recording.
    pub fn at(&self, track: &TrackConfig, t: f64) -> Option<VehicleState> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.t - 1e-9 || t > last.t + 1e-9 {
            return None;
        }
        let k = self
            .samples
            .partition_point(|s| s.t <= t)
            .clamp(1, self.samples.len());
        let (a, b) = if k < self.samples.len() {
            (self.samples[k - 1], self.samples[k])
        } else {
            (*last, *last)
        };
        let w = if b.t > a.t {
            (t - a.t) / (b.t - a.t)
        } else {
            0.0
        };
        let lerp = |p: f64, q: f64| p + (q - p) * w;
        let lateral = lerp(a.lateral, b.lateral);
        let lane = ((lateral / track.lane_width).floor() as i32 + 1).clamp(1, track.lane_count);
        let v = lerp(a.v, b.v).max(0.0);
        Some(VehicleState {
            id: self.id,
            x: track.world_x(lerp(a.station, b.station)),
            y: track.world_y(lateral),
            v,
            length: self.length,
            width: self.width,
            lane,
            lane_change: None,
            desired_speed: v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn replay_interpolates_and_expires() {
        let t = TrackConfig::default();
        let r = ReplayVehicle {
            id: 7,
            length: 4.0,
            width: 2.0,
            samples: vec![
                ReplaySample {
                    t: 0.0,
                    station: 0.0,
                    lateral: 1.875,
                    v: 20.0,
                },
                ReplaySample {
                    t: 1.0,
                    station: 20.0,
                    lateral: 5.625,
                    v: 20.0,
                },
            ],
        };
        let mid = r.at(&t, 0.4).unwrap();
        assert!((mid.x - 8.0).abs() < 1e-12);
        assert!((mid.y - t.world_y(3.375)).abs() < 1e-12);
        assert_eq!(mid.lane, 1);
        assert_eq!(r.at(&t, 1.0).unwrap().lane, 2);
        assert!(r.at(&t, 1.5).is_none());
        let bad = ReplayVehicle {
            samples: vec![r.samples[1], r.samples[0]],
            ..r
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn synthetic_respects_clearance_and_bands() {
        let t = TrackConfig::default();
        let spec = SyntheticTraffic {
            lane_speed_bands: true,
            ..SyntheticTraffic::default()
        };
        let ego = VehicleState::new(&t, 0, 0.0, 2, 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut id = 1;
        let tvs = spec.initial(&t, &ego, 2200.0, &mut rng, &mut id);
        assert!(!tvs.is_empty());
        for v in &tvs {
            assert!(v.station(&t) > spec.ego_clearance);
            let (lo, hi) = spec.speed_band(&t, v.lane);
            assert!(lo <= v.v && v.v <= hi);
        }
        assert_eq!(id as usize, tvs.len() + 1);
    }
}
