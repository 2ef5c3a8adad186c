//! Sector assignment shared by the simulator's perception and the dataset
//! feature extraction, so both see a scene identically.

use super::{Direction, NumericState, Sector, SectorTarget};

/// Lateral relation of a neighbor's lane to the ego lane, in the ego's
/// forward frame. Lanes further away are not observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneRelation {
    Same,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub relation: LaneRelation,
    /// Center-to-center longitudinal offset in the ego's travel direction, m.
    pub offset: f64,
    pub length: f64,
    /// Speed along the ego's travel direction, m/s.
    pub velocity: f64,
}

/// Longitudinal half-width of the side sectors: half the summed vehicle
/// lengths plus 2 m.
pub fn side_margin(ego_length: f64, tv_length: f64) -> f64 {
    0.5 * (ego_length + tv_length) + 2.0
}

impl Neighbor {
    pub fn sector(&self, ego_length: f64) -> Sector {
        let ls = side_margin(ego_length, self.length);
        match self.relation {
            LaneRelation::Same if self.offset >= 0.0 => Sector::Front,
            LaneRelation::Same => Sector::Back,
            LaneRelation::Left if self.offset > ls => Sector::FrontLeft,
            LaneRelation::Left if self.offset < -ls => Sector::BackLeft,
            LaneRelation::Left => Sector::Left,
            LaneRelation::Right if self.offset > ls => Sector::FrontRight,
            LaneRelation::Right if self.offset < -ls => Sector::BackRight,
            LaneRelation::Right => Sector::Right,
        }
    }

    /// Bumper-to-bumper gap along the track axis, 0 when the footprints overlap.
    pub fn gap(&self, ego_length: f64) -> f64 {
        (self.offset.abs() - 0.5 * (ego_length + self.length)).max(0.0)
    }
}

/// Collects neighbors and keeps the nearest one per sector.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    ego_velocity: f64,
    ego_length: f64,
    sensing_range: f64,
    best: [Option<(f64, f64, SectorTarget)>; 8],
}

impl SceneBuilder {
    pub fn new(ego_velocity: f64, ego_length: f64, sensing_range: f64) -> Self {
        Self {
            ego_velocity,
            ego_length,
            sensing_range,
            best: [None; 8],
        }
    }

    /// Ties on gap go to the smaller |offset|, then to the earlier call.
    pub fn add(&mut self, n: Neighbor) -> &mut Self {
        let gap = n.gap(self.ego_length);
        if gap > self.sensing_range {
            return self;
        }
        let sector = n.sector(self.ego_length);
        let slot = &mut self.best[sector.index()];
        let key = (gap, n.offset.abs());
        let better = match slot {
            None => true,
            Some((g, o, _)) => key < (*g, *o),
        };
        if better {
            *slot = Some((
                key.0,
                key.1,
                SectorTarget {
                    gap,
                    velocity: n.velocity,
                },
            ));
        }
        self
    }

    pub fn build(
        &self,
        ego_lane: i32,
        right_valid: bool,
        left_valid: bool,
        direction: Direction,
    ) -> NumericState {
        let mut ns = NumericState::new(self.ego_velocity);
        ns.ego_lane = ego_lane;
        ns.right_valid = right_valid;
        ns.left_valid = left_valid;
        ns.direction = direction;
        for (i, b) in self.best.iter().enumerate() {
            ns.sectors[i] = b.map(|(_, _, t)| t);
        }
        ns
    }
}
