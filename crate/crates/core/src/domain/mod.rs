//! Eight-sector driving vocabulary and the continuous-to-symbolic abstraction.

mod features;
mod geometry;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{FactSet, PredicateSymbol};

pub use features::{enumerate_states, Feature, FeatureKind, FeatureSpec};
pub use geometry::{side_margin, LaneRelation, Neighbor, SceneBuilder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("feature spec is empty")]
    EmptySpec,
    #[error("feature name {0:?} is not a valid identifier")]
    BadFeatureName(String),
    #[error("feature name {0:?} used twice")]
    DuplicateFeatureName(String),
    #[error("features {0:?} and {1:?} both control the same state aspect")]
    OverlappingFeatures(String, String),
    #[error("distance features are only defined for front and back, not {0}")]
    NoDistanceSector(Sector),
    #[error("state space too large to enumerate")]
    SpaceTooLarge,
    #[error("invalid thresholds: {0}")]
    BadThresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Sector {
    Front,
    FrontRight,
    Right,
    BackRight,
    Back,
    BackLeft,
    Left,
    FrontLeft,
}

impl Sector {
    pub const ALL: [Sector; 8] = [
        Sector::Front,
        Sector::FrontRight,
        Sector::Right,
        Sector::BackRight,
        Sector::Back,
        Sector::BackLeft,
        Sector::Left,
        Sector::FrontLeft,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Name used as predicate prefix, e.g. `frontRight`.
    pub fn name(self) -> &'static str {
        match self {
            Sector::Front => "front",
            Sector::FrontRight => "frontRight",
            Sector::Right => "right",
            Sector::BackRight => "backRight",
            Sector::Back => "back",
            Sector::BackLeft => "backLeft",
            Sector::Left => "left",
            Sector::FrontLeft => "frontLeft",
        }
    }

    pub fn mirror(self) -> Sector {
        match self {
            Sector::FrontRight => Sector::FrontLeft,
            Sector::FrontLeft => Sector::FrontRight,
            Sector::Right => Sector::Left,
            Sector::Left => Sector::Right,
            Sector::BackRight => Sector::BackLeft,
            Sector::BackLeft => Sector::BackRight,
            s => s,
        }
    }

    /// Only the in-lane sectors carry a distance predicate.
    pub fn has_distance(self) -> bool {
        matches!(self, Sector::Front | Sector::Back)
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RelVelClass {
    Bigger,
    Equal,
    Lower,
}

impl RelVelClass {
    pub const ALL: [RelVelClass; 3] = [RelVelClass::Bigger, RelVelClass::Equal, RelVelClass::Lower];

    fn suffix(self) -> &'static str {
        match self {
            RelVelClass::Bigger => "Bigger",
            RelVelClass::Equal => "Equal",
            RelVelClass::Lower => "Lower",
        }
    }
}

/// `dv` is target velocity minus ego velocity. `|dv| == vel_eps` counts as equal.
pub fn classify_rel_vel(dv: f64, vel_eps: f64) -> RelVelClass {
    if dv > vel_eps {
        RelVelClass::Bigger
    } else if dv < -vel_eps {
        RelVelClass::Lower
    } else {
        RelVelClass::Equal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Right => "right",
            Side::Left => "left",
        }
    }
}

/// Driving direction of a carriageway as seen in world coordinates.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum Direction {
    #[default]
    #[serde(rename = "l2r")]
    L2R,
    #[serde(rename = "r2l")]
    R2L,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::L2R => Direction::R2L,
            Direction::R2L => Direction::L2R,
        }
    }

    /// +1 for travel along +x.
    pub fn sign(self) -> f64 {
        match self {
            Direction::L2R => 1.0,
            Direction::R2L => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::L2R => "l2r",
            Direction::R2L => "r2l",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2r" => Ok(Direction::L2R),
            "r2l" => Ok(Direction::R2L),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

// Predicate vocabulary -------------------------------------------------------

fn sym(name: String) -> PredicateSymbol {
    PredicateSymbol::new(name).expect("vocabulary names are identifiers")
}

pub fn busy_predicate(s: Sector) -> PredicateSymbol {
    sym(format!("{}_isBusy", s.name()))
}

pub fn vel_predicate(s: Sector, class: RelVelClass) -> PredicateSymbol {
    sym(format!("{}Vel_is{}", s.name(), class.suffix()))
}

pub fn dist_predicate(s: Sector) -> PredicateSymbol {
    sym(format!("{}Dist_isSafe", s.name()))
}

pub fn valid_predicate(side: Side) -> PredicateSymbol {
    sym(format!("{}_isValid", side.name()))
}

/// All 36 predicates in canonical order: occupancy, velocity classes,
/// distance, validity.
pub fn vocabulary() -> Vec<PredicateSymbol> {
    let mut v: Vec<_> = Sector::ALL.iter().map(|&s| busy_predicate(s)).collect();
    for s in Sector::ALL {
        v.extend(RelVelClass::ALL.iter().map(|&c| vel_predicate(s, c)));
    }
    v.push(dist_predicate(Sector::Front));
    v.push(dist_predicate(Sector::Back));
    v.push(valid_predicate(Side::Right));
    v.push(valid_predicate(Side::Left));
    v
}

/// True for the validity and distance predicates, which may appear in a
/// state table without being candidate body predicates.
pub fn is_context_predicate(p: &PredicateSymbol) -> bool {
    let n = p.as_str();
    n.ends_with("_isValid") || n.ends_with("Dist_isSafe")
}

/// Swaps every left/right token in a predicate name, e.g.
/// `backLeftVel_isBigger` becomes `backRightVel_isBigger`.
pub fn mirror_predicate_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut rest = name;
    while !rest.is_empty() {
        let (tok, repl) = [
            ("Left", "Right"),
            ("Right", "Left"),
            ("left", "right"),
            ("right", "left"),
        ]
        .into_iter()
        .find(|(t, _)| rest.starts_with(t))
        .unwrap_or(("", ""));
        if tok.is_empty() {
            let c = rest.chars().next().unwrap();
            out.push(c);
            rest = &rest[c.len_utf8()..];
        } else {
            out.push_str(repl);
            rest = &rest[tok.len()..];
        }
    }
    out
}

// Symbolic states -------------------------------------------------------------

/// What the abstraction knows about an occupied sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Occupant {
    pub rel_vel: RelVelClass,
    /// Only consumed for the front and back sectors.
    pub dist_safe: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolicState {
    pub id: u64,
    /// Indexed by [`Sector::index`]; `None` means vacant.
    pub sectors: [Option<Occupant>; 8],
    pub right_valid: bool,
    pub left_valid: bool,
}

impl SymbolicState {
    pub fn empty(id: u64) -> Self {
        Self {
            id,
            sectors: [None; 8],
            right_valid: true,
            left_valid: true,
        }
    }

    pub fn sector(&self, s: Sector) -> Option<Occupant> {
        self.sectors[s.index()]
    }

    pub fn set(&mut self, s: Sector, o: Option<Occupant>) {
        self.sectors[s.index()] = o;
    }

    /// Ground facts for this state.
    pub fn to_facts(&self) -> FactSet {
        let mut facts = FactSet::new();
        for s in Sector::ALL {
            if let Some(o) = self.sector(s) {
                facts.insert(busy_predicate(s));
                facts.insert(vel_predicate(s, o.rel_vel));
                if s.has_distance() && o.dist_safe {
                    facts.insert(dist_predicate(s));
                }
            }
        }
        if self.right_valid {
            facts.insert(valid_predicate(Side::Right));
        }
        if self.left_valid {
            facts.insert(valid_predicate(Side::Left));
        }
        facts
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for s in Sector::ALL {
            out.sectors[s.mirror().index()] = self.sectors[s.index()];
        }
        out.right_valid = self.left_valid;
        out.left_valid = self.right_valid;
        out
    }
}

// Thresholds & numeric states ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Relative-velocity class boundary, m/s.
    pub vel_eps: f64,
    /// s
    pub safe_headway_time: f64,
    /// m
    pub min_safe_gap: f64,
    /// Critical gap C of the follow-up law, m.
    pub critical_gap: f64,
    /// m
    pub sensing_range: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            vel_eps: 1.0,
            safe_headway_time: 1.0,
            min_safe_gap: 10.0,
            critical_gap: 10.0,
            sensing_range: 100.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), DomainError> {
        let all = [
            self.vel_eps,
            self.safe_headway_time,
            self.min_safe_gap,
            self.critical_gap,
            self.sensing_range,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(DomainError::BadThresholds(
                "all thresholds must be positive".into(),
            ));
        }
        if self.critical_gap > self.min_safe_gap || self.min_safe_gap > self.sensing_range {
            return Err(DomainError::BadThresholds(
                "need critical_gap <= min_safe_gap <= sensing_range".into(),
            ));
        }
        Ok(())
    }

    /// Gap at which the distance to the front/back vehicle counts as safe.
    pub fn safe_gap(&self, ego_velocity: f64) -> f64 {
        self.min_safe_gap.max(self.safe_headway_time * ego_velocity)
    }
}

/// Nearest vehicle observed in a sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorTarget {
    /// Bumper-to-bumper gap along the track axis, m (0 when overlapping).
    pub gap: f64,
    /// Longitudinal speed in the ego's travel direction, m/s.
    pub velocity: f64,
}

/// Ego-centric measurements in the ego's forward frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericState {
    pub ego_velocity: f64,
    pub ego_lane: i32,
    pub sectors: [Option<SectorTarget>; 8],
    pub right_valid: bool,
    pub left_valid: bool,
    pub direction: Direction,
}

impl NumericState {
    pub fn new(ego_velocity: f64) -> Self {
        Self {
            ego_velocity,
            ego_lane: 1,
            sectors: [None; 8],
            right_valid: true,
            left_valid: true,
            direction: Direction::L2R,
        }
    }

    pub fn with(mut self, s: Sector, gap: f64, velocity: f64) -> Self {
        self.sectors[s.index()] = Some(SectorTarget { gap, velocity });
        self
    }

    pub fn sector(&self, s: Sector) -> Option<SectorTarget> {
        self.sectors[s.index()]
    }

    /// Left/right reflection: swaps mirrored sectors and validity flags and
    /// flips the direction tag. Longitudinal quantities are untouched.
    pub fn mirror(&self) -> Self {
        let mut out = self.clone();
        for s in Sector::ALL {
            out.sectors[s.mirror().index()] = self.sectors[s.index()];
        }
        out.right_valid = self.left_valid;
        out.left_valid = self.right_valid;
        out.direction = self.direction.flip();
        out
    }
}

/// Continuous scene to symbolic state (id 0).
pub fn abstract_state(ns: &NumericState, th: &Thresholds) -> SymbolicState {
    let mut ss = SymbolicState::empty(0);
    let safe_gap = th.safe_gap(ns.ego_velocity);
    for s in Sector::ALL {
        let occ = ns
            .sector(s)
            .filter(|t| t.gap <= th.sensing_range)
            .map(|t| Occupant {
                rel_vel: classify_rel_vel(t.velocity - ns.ego_velocity, th.vel_eps),
                dist_safe: t.gap >= safe_gap,
            });
        ss.set(s, occ);
    }
    ss.right_valid = ns.right_valid;
    ss.left_valid = ns.left_valid;
    ss
}

pub fn to_facts(ss: &SymbolicState) -> FactSet {
    ss.to_facts()
}
