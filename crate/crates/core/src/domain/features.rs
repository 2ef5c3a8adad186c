//! Factored state spaces for knowledge acquisition.
//!
//! Each feature controls one aspect of a [`SymbolicState`]; a state id is the
//! mixed-radix number of the feature values with feature 0 least significant.
//! Aspects no feature controls take neutral defaults: vacant sectors, both
//! lanes valid, and for sectors whose occupancy alone is enumerated an
//! `Equal` velocity class with a safe distance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    busy_predicate, dist_predicate, valid_predicate, vel_predicate, DomainError, Occupant,
    RelVelClass, Sector, Side, SymbolicState,
};
use crate::logic::{is_identifier, PredicateSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// 0 vacant, 1 occupied.
    Busy(Sector),
    /// 0 vacant, 1 bigger, 2 equal, 3 lower.
    Occupant(Sector),
    /// 0 unsafe, 1 safe. Only observable while the sector is occupied.
    DistSafe(Sector),
    /// 0 invalid, 1 valid.
    Valid(Side),
}

impl FeatureKind {
    pub fn cardinality(self) -> u64 {
        match self {
            FeatureKind::Occupant(_) => 4,
            _ => 2,
        }
    }

    /// Predicates a value contributes when its sector is occupied.
    pub fn predicates(self, value: u64) -> Vec<PredicateSymbol> {
        match (self, value) {
            (FeatureKind::Busy(s), 1) => vec![busy_predicate(s)],
            (FeatureKind::Occupant(s), v @ 1..=3) => {
                vec![
                    busy_predicate(s),
                    vel_predicate(s, RelVelClass::ALL[(v - 1) as usize]),
                ]
            }
            (FeatureKind::DistSafe(s), 1) => vec![dist_predicate(s)],
            (FeatureKind::Valid(side), 1) => vec![valid_predicate(side)],
            _ => vec![],
        }
    }

    fn default_name(self) -> String {
        match self {
            FeatureKind::Busy(s) => format!("{}_busy", s.name()),
            FeatureKind::Occupant(s) => format!("{}_occupant", s.name()),
            FeatureKind::DistSafe(s) => format!("{}_dist", s.name()),
            FeatureKind::Valid(side) => format!("{}_valid", side.name()),
        }
    }

    /// State aspect key used to reject two features driving the same thing.
    fn aspect(self) -> (u8, usize) {
        match self {
            FeatureKind::Busy(s) | FeatureKind::Occupant(s) => (0, s.index()),
            FeatureKind::DistSafe(s) => (1, s.index()),
            FeatureKind::Valid(side) => (2, side as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn new(kind: FeatureKind) -> Self {
        Self {
            name: kind.default_name(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSpec {
    features: Vec<Feature>,
}

impl TryFrom<Vec<Feature>> for FeatureSpec {
    type Error = DomainError;
    fn try_from(value: Vec<Feature>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FeatureSpec> for Vec<Feature> {
    fn from(s: FeatureSpec) -> Self {
        s.features
    }
}

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self, DomainError> {
        if features.is_empty() {
            return Err(DomainError::EmptySpec);
        }
        let mut names = BTreeSet::new();
        for (i, f) in features.iter().enumerate() {
            if !is_identifier(&f.name) {
                return Err(DomainError::BadFeatureName(f.name.clone()));
            }
            if !names.insert(f.name.as_str()) {
                return Err(DomainError::DuplicateFeatureName(f.name.clone()));
            }
            if let FeatureKind::DistSafe(s) = f.kind {
                if !s.has_distance() {
                    return Err(DomainError::NoDistanceSector(s));
                }
            }
            if let Some(other) = features[..i]
                .iter()
                .find(|o| o.kind.aspect() == f.kind.aspect())
            {
                return Err(DomainError::OverlappingFeatures(
                    other.name.clone(),
                    f.name.clone(),
                ));
            }
        }
        let spec = Self { features };
        spec.checked_size()?;
        Ok(spec)
    }

    pub fn from_kinds(kinds: impl IntoIterator<Item = FeatureKind>) -> Result<Self, DomainError> {
        Self::new(kinds.into_iter().map(Feature::new).collect())
    }

    /// Eight occupancy flags followed by right/left validity: 1024 states.
    pub fn occupancy_validity() -> Self {
        Self::from_kinds(Sector::ALL.iter().map(|&s| FeatureKind::Busy(s)).chain([
            FeatureKind::Valid(Side::Right),
            FeatureKind::Valid(Side::Left),
        ]))
        .expect("static spec is valid")
    }

    /// Every sector with its velocity class, both validity flags and both
    /// distance flags: 4^8 * 2^4 = 2^20 states.
    pub fn full() -> Self {
        Self::from_kinds(
            Sector::ALL
                .iter()
                .map(|&s| FeatureKind::Occupant(s))
                .chain([
                    FeatureKind::Valid(Side::Right),
                    FeatureKind::Valid(Side::Left),
                    FeatureKind::DistSafe(Sector::Front),
                    FeatureKind::DistSafe(Sector::Back),
                ]),
        )
        .expect("static spec is valid")
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    fn checked_size(&self) -> Result<u64, DomainError> {
        self.features.iter().try_fold(1u64, |acc, f| {
            acc.checked_mul(f.kind.cardinality())
                .ok_or(DomainError::SpaceTooLarge)
        })
    }

    pub fn state_count(&self) -> u64 {
        self.checked_size().expect("validated at construction")
    }

    /// Mixed-radix digits of `id`, feature 0 first.
    pub fn decode(&self, mut id: u64) -> Vec<u64> {
        self.features
            .iter()
            .map(|f| {
                let c = f.kind.cardinality();
                let v = id % c;
                id /= c;
                v
            })
            .collect()
    }

    pub fn state(&self, id: u64) -> SymbolicState {
        let values = self.decode(id);
        let mut ss = SymbolicState::empty(id);
        for (f, &v) in self.features.iter().zip(&values) {
            if let FeatureKind::Busy(s) | FeatureKind::Occupant(s) = f.kind {
                let occ = match (f.kind, v) {
                    (_, 0) => None,
                    (FeatureKind::Busy(_), _) => Some(Occupant {
                        rel_vel: RelVelClass::Equal,
                        dist_safe: true,
                    }),
                    (_, v) => Some(Occupant {
                        rel_vel: RelVelClass::ALL[(v - 1) as usize],
                        dist_safe: true,
                    }),
                };
                ss.set(s, occ);
            }
        }
        for (f, &v) in self.features.iter().zip(&values) {
            match f.kind {
                FeatureKind::DistSafe(s) => {
                    if let Some(mut o) = ss.sector(s) {
                        o.dist_safe = v == 1;
                        ss.set(s, Some(o));
                    }
                }
                FeatureKind::Valid(Side::Right) => ss.right_valid = v == 1,
                FeatureKind::Valid(Side::Left) => ss.left_valid = v == 1,
                _ => {}
            }
        }
        ss
    }

    /// Lazily walks the space in id order.
    pub fn iter_states(&self) -> impl Iterator<Item = SymbolicState> + '_ {
        (0..self.state_count()).map(move |id| self.state(id))
    }

    /// Every predicate some state of this space can emit, in canonical
    /// vocabulary order.
    pub fn emitted_predicates(&self) -> Vec<PredicateSymbol> {
        let mut seen = BTreeSet::new();
        let mut emit = |p: PredicateSymbol| {
            seen.insert(p);
        };
        for f in &self.features {
            match f.kind {
                FeatureKind::Busy(s) => {
                    emit(busy_predicate(s));
                    emit(vel_predicate(s, RelVelClass::Equal));
                    if s.has_distance() && !self.controls_distance(s) {
                        emit(dist_predicate(s));
                    }
                }
                FeatureKind::Occupant(s) => {
                    emit(busy_predicate(s));
                    for c in RelVelClass::ALL {
                        emit(vel_predicate(s, c));
                    }
                    if s.has_distance() && !self.controls_distance(s) {
                        emit(dist_predicate(s));
                    }
                }
                FeatureKind::DistSafe(s) => {
                    if self.controls_occupancy(s) {
                        emit(dist_predicate(s));
                    }
                }
                FeatureKind::Valid(_) => {}
            }
        }
        // validity defaults to true when not enumerated, so it is always emitted
        emit(valid_predicate(Side::Right));
        emit(valid_predicate(Side::Left));
        super::vocabulary()
            .into_iter()
            .filter(|p| seen.contains(p))
            .collect()
    }

    fn controls_distance(&self, s: Sector) -> bool {
        self.features
            .iter()
            .any(|f| f.kind == FeatureKind::DistSafe(s))
    }

    fn controls_occupancy(&self, s: Sector) -> bool {
        self.features
            .iter()
            .any(|f| matches!(f.kind, FeatureKind::Busy(x) | FeatureKind::Occupant(x) if x == s))
    }
}

/// Enumerates the full product space in id order.
pub fn enumerate_states(spec: &FeatureSpec) -> Vec<SymbolicState> {
    spec.iter_states().collect()
}
