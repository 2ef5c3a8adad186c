use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::traffic::TrafficSource;
use super::world::{detect_collision, perceive, TrackConfig, VehicleState};
use super::SimError;
use crate::domain::{abstract_state, Direction, NumericState};
use crate::policy::{
    compute_acceleration, decide, select_phase, AccelPhase, Decision, LaneAction, PolicyConfig,
    PolicyError,
};

/// Lane-change and speed decisions for the ego vehicle.
pub trait EgoPolicy: Sync {
    fn decide(&self, ns: &NumericState) -> Result<Decision, PolicyError>;
}

impl EgoPolicy for PolicyConfig {
    fn decide(&self, ns: &NumericState) -> Result<Decision, PolicyError> {
        decide(ns, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub track: TrackConfig,
    /// Defaults to the middle lane.
    pub ego_lane: Option<i32>,
    /// m/s
    pub ego_speed: f64,
    pub ego_length: f64,
    pub ego_width: f64,
    /// s
    pub max_time: f64,
    pub lane_changes: bool,
    pub record_trace: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            track: TrackConfig::default(),
            ego_lane: None,
            ego_speed: 25.0,
            ego_length: 4.5,
            ego_width: 2.0,
            max_time: 300.0,
            lane_changes: true,
            record_trace: true,
        }
    }
}

impl EpisodeConfig {
    pub fn ego_start_lane(&self) -> i32 {
        self.ego_lane.unwrap_or((self.track.lane_count + 1) / 2)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.track.validate().map_err(SimError::BadConfig)?;
        if !self.track.is_lane(self.ego_start_lane()) {
            return Err(SimError::BadConfig("ego lane outside the road".into()));
        }
        if !(self.ego_speed >= 0.0
            && self.ego_length > 0.0
            && self.ego_width > 0.0
            && self.max_time > 0.0)
        {
            return Err(SimError::BadConfig(
                "ego speed, size and max_time must be positive".into(),
            ));
        }
        if self.ego_width > self.track.lane_width {
            return Err(SimError::BadConfig("ego wider than a lane".into()));
        }
        Ok(())
    }
}

/// Everything that defines an episode apart from the ego's policy and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Scenario {
    pub episode: EpisodeConfig,
    /// Control limits for the ego and the driving rules of target vehicles.
    pub control: PolicyConfig,
    pub traffic: TrafficSource,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.episode.validate()?;
        self.control.validate()?;
        self.traffic.validate()
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        let mut s = self.clone();
        s.episode.track.direction = direction;
        s
    }
}

/// Acceleration that moves `v` to `v_d` in one step, saturated to `[a_min, a_max]`.
pub fn longitudinal_control(v: f64, v_d: f64, dt: f64, a_min: f64, a_max: f64) -> f64 {
    ((v_d - v) / dt).clamp(a_min, a_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub action: LaneAction,
    pub phase: AccelPhase,
    pub a_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub direction: Direction,
    pub lane_changes: u32,
    pub hits: u32,
    /// s
    pub elapsed: f64,
    /// m
    pub distance: f64,
    pub trace: Vec<TraceRow>,
}

/// A world snapshot handed to observers after every step.
pub struct Frame<'a> {
    pub step: u64,
    pub t: f64,
    pub track: &'a TrackConfig,
    pub vehicles: &'a [VehicleState],
}

pub const EGO_ID: u32 = 0;

pub fn run_episode(
    sc: &Scenario,
    ego: &dyn EgoPolicy,
    seed: u64,
) -> Result<EpisodeResult, SimError> {
    run_episode_observed(sc, ego, seed, &mut |_| {})
}

pub fn run_episode_observed(
    sc: &Scenario,
    policy: &dyn EgoPolicy,
    seed: u64,
    observe: &mut dyn FnMut(&Frame),
) -> Result<EpisodeResult, SimError> {
    sc.validate()?;
    let ep = &sc.episode;
    let track = &ep.track;
    let ctl = &sc.control;
    let th = &ctl.thresholds;
    let dt = track.dt;
    let horizon = track.length + th.sensing_range + 50.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut ego = VehicleState::new(track, EGO_ID, 0.0, ep.ego_start_lane(), ep.ego_speed);
    ego.length = ep.ego_length;
    ego.width = ep.ego_width;
    ego.desired_speed = ctl.desired_speed;

    let mut next_id = 1u32;
    let mut tvs: Vec<VehicleState> = match &sc.traffic {
        TrafficSource::Synthetic(s) => s.initial(track, &ego, horizon, &mut rng, &mut next_id),
        TrafficSource::Fixed { vehicles } => vehicles
            .iter()
            .map(|p| {
                let mut v = VehicleState::new(track, next_id, p.station, p.lane, p.speed);
                v.length = p.length;
                next_id += 1;
                v
            })
            .collect(),
        TrafficSource::Replay { vehicles } => {
            vehicles.iter().filter_map(|r| r.at(track, 0.0)).collect()
        }
    };

    let mut result = EpisodeResult {
        seed,
        direction: track.direction,
        lane_changes: 0,
        hits: 0,
        elapsed: 0.0,
        distance: 0.0,
        trace: Vec::new(),
    };
    let mut ongoing = LaneAction::LK;
    let max_steps = (ep.max_time / dt).ceil() as u64;
    let mut step = 0u64;
    let mut everyone: Vec<VehicleState> = Vec::with_capacity(tvs.len() + 1);

    while step < max_steps && ego.station(track) < track.length {
        let t = step as f64 * dt;
        everyone.clear();
        everyone.push(ego.clone());
        everyone.extend(tvs.iter().cloned());
        let order = station_order(track, &everyone);

        // ego decision
        let ns = perceive(
            track,
            &ego,
            window(track, &everyone, &order, 0, th.sensing_range),
            th,
        );
        let decision = match policy.decide(&ns) {
            Ok(d) => Some(d),
            Err(PolicyError::NonpositiveGap(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let (phase, v_d) = match decision {
            Some(d) => (d.phase, d.v_d),
            None => (AccelPhase::Brake, (ego.v + ctl.accel_min * dt).max(0.0)),
        };
        if ego.lane_change.is_none() {
            ongoing = LaneAction::LK;
            let wanted = decision.map_or(LaneAction::LK, |d| d.lane_action);
            let target = ego.lane + wanted.lane_delta();
            if ep.lane_changes && wanted != LaneAction::LK && track.is_lane(target) {
                ego.start_lane_change(track, target);
                ongoing = wanted;
            }
        }
        let a_min = if phase == AccelPhase::Brake {
            f64::NEG_INFINITY
        } else {
            ctl.accel_min
        };
        let a_ego = longitudinal_control(ego.v, v_d, dt, a_min, ctl.accel_max);

        // target vehicles
        let a_tvs: Vec<Option<f64>> = if matches!(sc.traffic, TrafficSource::Replay { .. }) {
            vec![None; tvs.len()]
        } else {
            (0..tvs.len())
                .map(|k| {
                    let me = &everyone[k + 1];
                    let ns = perceive(
                        track,
                        me,
                        window(track, &everyone, &order, k + 1, th.sensing_range),
                        th,
                    );
                    Some(tv_acceleration(me, &ns, ctl))
                })
                .collect()
        };

        if ep.record_trace {
            result.trace.push(TraceRow {
                t,
                x: ego.x,
                y: ego.y,
                v: ego.v,
                action: ongoing,
                phase,
                a_x: a_ego,
            });
        }

        // integrate
        if ego.advance(track, a_ego, dt) {
            result.lane_changes += 1;
        }
        step += 1;
        let t_next = step as f64 * dt;
        match &sc.traffic {
            TrafficSource::Replay { vehicles } => {
                tvs = vehicles
                    .iter()
                    .filter_map(|r| r.at(track, t_next))
                    .collect();
            }
            other => {
                for (tv, a) in tvs.iter_mut().zip(a_tvs) {
                    tv.advance(track, a.unwrap_or(0.0), dt);
                }
                tvs.retain(|v| {
                    let s = v.station(track);
                    (-50.0..=horizon).contains(&s)
                });
                if let TrafficSource::Synthetic(spec) = other {
                    let arrived = spec.arrivals(track, &tvs, &ego, &mut rng, &mut next_id);
                    tvs.extend(arrived);
                }
            }
        }

        let hit = tvs.iter().any(|tv| detect_collision(&ego, tv));
        everyone.clear();
        everyone.push(ego.clone());
        everyone.extend(tvs.iter().cloned());
        observe(&Frame {
            step,
            t: t_next,
            track,
            vehicles: &everyone,
        });
        if hit {
            result.hits = 1;
            break;
        }
    }
    result.elapsed = step as f64 * dt;
    result.distance = ego.station(track).clamp(0.0, track.length);
    Ok(result)
}

fn tv_acceleration(me: &VehicleState, ns: &NumericState, ctl: &PolicyConfig) -> f64 {
    let facts = abstract_state(ns, &ctl.thresholds).to_facts();
    let phase = select_phase(&facts, &ctl.rules).unwrap_or(AccelPhase::FollowUp);
    let (phase, a) = match phase {
        AccelPhase::CatchUp => (phase, (me.desired_speed - me.v) / ctl.dt),
        _ => match compute_acceleration(phase, ns, ctl) {
            Ok(pa) => pa,
            Err(_) => (AccelPhase::Brake, ctl.accel_min),
        },
    };
    let a_min = if phase == AccelPhase::Brake {
        f64::NEG_INFINITY
    } else {
        ctl.accel_min
    };
    a.clamp(a_min, ctl.accel_max)
}

fn station_order(track: &TrackConfig, vs: &[VehicleState]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| {
        vs[a]
            .station(track)
            .total_cmp(&vs[b].station(track))
            .then(vs[a].id.cmp(&vs[b].id))
    });
    let mut rank = vec![0; vs.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    (order, rank)
}

/// Vehicles whose stations lie within reach of vehicle `i`.
fn window<'a>(
    track: &TrackConfig,
    vs: &'a [VehicleState],
    (order, rank): &'a (Vec<usize>, Vec<usize>),
    i: usize,
    range: f64,
) -> impl Iterator<Item = &'a VehicleState> + 'a {
    let reach = range + 30.0;
    let s0 = vs[i].station(track);
    let r = rank[i];
    let lo = order[..r]
        .iter()
        .rposition(|&j| s0 - vs[j].station(track) > reach)
        .map_or(0, |p| p + 1);
    let hi = order[r..]
        .iter()
        .position(|&j| vs[j].station(track) - s0 > reach)
        .map_or(order.len(), |p| r + p);
    order[lo..hi].iter().map(move |&j| &vs[j])
}
