//! The ten driving tasks and their reference rules.

use serde::{Deserialize, Serialize};

use super::{BiasSpec, KnowledgeError, Labeler};
use crate::domain::{FeatureKind, FeatureSpec, Sector};
use crate::logic::{parse_rule, parse_rule_set, PredicateSymbol, Rule, RuleSet};

/// The ten driving rules as printed, keyed by head.
pub const REFERENCE_RULES: &str = "\
rlc_isUnsafe:- right_isBusy; not(right_isValid).
llc_isUnsafe:- left_isBusy; not(left_isValid).
rlc_isDangerous:-
     backRight_isBusy,backRightVel_isBigger;
     frontRight_isBusy,frontRightVel_isLower.
llc_isDangerous:-
     backLeft_isBusy,backLeftVel_isBigger;
     frontLeft_isBusy,frontLeftVel_isLower.
lk_isDangerous:-
     back_isBusy, not(backDist_isSafe),backVel_isBigger.
llc_isBetter:-
     front_isBusy, not(left_isBusy), not(frontLeft_isBusy).
rlc_isBetter:-
     front_isBusy, left_isBusy,
     frontLeft_isBusy, not(right_isBusy), not(frontRight_isBusy).
reachDesiredSpeed:-not(front_isBusy).
reachFrontSpeed:- front_isBusy, frontDist_isSafe.
brake:- front_isBusy, frontVel_isLower, not(frontDist_isSafe).
";

pub fn reference_rules() -> RuleSet {
    parse_rule_set(REFERENCE_RULES).expect("reference rules parse")
}

pub fn reference_rule(head: &str) -> Option<Rule> {
    reference_rules().get_by_name(head).cloned()
}

/// Everything needed to regenerate and re-induce one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub head: String,
    pub space: FeatureSpec,
    /// Ground-truth rule text.
    pub labeler: String,
    pub max_literals: usize,
    pub max_clauses: usize,
    #[serde(default = "yes")]
    pub allow_negation: bool,
}

fn yes() -> bool {
    true
}

impl TaskDefinition {
    pub fn labeler_rule(&self) -> Result<Rule, KnowledgeError> {
        Ok(parse_rule(&self.labeler)?)
    }

    pub fn labeler(&self) -> Result<Labeler, KnowledgeError> {
        Ok(Labeler::Rule(self.labeler_rule()?))
    }

    /// Candidate body predicates are whatever the space can emit, in
    /// vocabulary order.
    pub fn bias(&self) -> Result<BiasSpec, KnowledgeError> {
        let head = PredicateSymbol::new(self.head.as_str())?;
        let body = self
            .space
            .emitted_predicates()
            .into_iter()
            .filter(|p| p != &head)
            .collect();
        BiasSpec::new(head, body, self.allow_negation)
    }
}

fn busy_except(skip: &[Sector]) -> impl Iterator<Item = FeatureKind> + '_ {
    Sector::ALL
        .into_iter()
        .filter(move |s| !skip.contains(s))
        .map(FeatureKind::Busy)
}

fn space(kinds: impl IntoIterator<Item = FeatureKind>) -> FeatureSpec {
    FeatureSpec::from_kinds(kinds).expect("built-in spaces are valid")
}

fn side_danger_space(back: Sector, front: Sector) -> FeatureSpec {
    space(
        [FeatureKind::Occupant(back), FeatureKind::Occupant(front)]
            .into_iter()
            .chain(busy_except(&[back, front])),
    )
}

fn in_lane_space(sector: Sector) -> FeatureSpec {
    space(
        [FeatureKind::Occupant(sector), FeatureKind::DistSafe(sector)]
            .into_iter()
            .chain(busy_except(&[sector])),
    )
}

pub fn default_tasks() -> Vec<TaskDefinition> {
    let rules = reference_rules();
    let task = |head: &str, space: FeatureSpec, max_literals: usize| TaskDefinition {
        head: head.to_string(),
        space,
        labeler: rules.get_by_name(head).expect("reference head").render(),
        max_literals,
        max_clauses: 3,
        allow_negation: true,
    };
    let occ = FeatureSpec::occupancy_validity;
    vec![
        task("rlc_isUnsafe", occ(), 3),
        task("llc_isUnsafe", occ(), 3),
        task(
            "rlc_isDangerous",
            side_danger_space(Sector::BackRight, Sector::FrontRight),
            3,
        ),
        task(
            "llc_isDangerous",
            side_danger_space(Sector::BackLeft, Sector::FrontLeft),
            3,
        ),
        task("lk_isDangerous", in_lane_space(Sector::Back), 3),
        task("llc_isBetter", occ(), 3),
        task("rlc_isBetter", occ(), 5),
        task("reachDesiredSpeed", occ(), 3),
        task("reachFrontSpeed", in_lane_space(Sector::Front), 3),
        task("brake", in_lane_space(Sector::Front), 3),
    ]
}
