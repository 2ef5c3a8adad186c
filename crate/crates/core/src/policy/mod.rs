//! Rule aggregation: mask unsafe and dangerous lane actions, rank what is
//! left, pick the acceleration phase and turn it into a velocity command.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{abstract_state, NumericState, Sector, Thresholds};
use crate::knowledge::reference_rules;
use crate::logic::{parse_rule_set, Evaluator, FactSet, LogicError, RuleSet};

pub const SAFETY_HEADS: [&str; 5] = [
    "rlc_isUnsafe",
    "llc_isUnsafe",
    "lk_isDangerous",
    "rlc_isDangerous",
    "llc_isDangerous",
];
pub const EFFICIENCY_HEADS: [&str; 2] = ["llc_isBetter", "rlc_isBetter"];
pub const PHASE_HEADS: [&str; 3] = ["reachDesiredSpeed", "reachFrontSpeed", "brake"];

/// Below this follow-up margin (D - C, in m) the follow-up law is replaced by braking.
const FOLLOW_UP_MIN_MARGIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("rule set has no rule for {0}")]
    MissingHead(String),
    #[error("more than one acceleration phase holds: {0:?}")]
    MultiplePhases(Vec<AccelPhase>),
    #[error("{0:?} needs a vehicle in front")]
    MissingFrontTV(AccelPhase),
    #[error("braking needs a positive gap, got {0} m")]
    NonpositiveGap(f64),
    #[error("invalid policy config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LaneAction {
    LK,
    LLC,
    RLC,
}

impl LaneAction {
    /// One-hot order.
    pub const ALL: [LaneAction; 3] = [LaneAction::LK, LaneAction::LLC, LaneAction::RLC];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mirror(self) -> Self {
        match self {
            LaneAction::LK => LaneAction::LK,
            LaneAction::LLC => LaneAction::RLC,
            LaneAction::RLC => LaneAction::LLC,
        }
    }

    /// Lane-id delta in the driver's frame, where ids grow to the left.
    pub fn lane_delta(self) -> i32 {
        match self {
            LaneAction::LK => 0,
            LaneAction::LLC => 1,
            LaneAction::RLC => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LaneAction::LK => "LK",
            LaneAction::LLC => "LLC",
            LaneAction::RLC => "RLC",
        }
    }
}

impl fmt::Display for LaneAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LaneAction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LK" => Ok(LaneAction::LK),
            "LLC" => Ok(LaneAction::LLC),
            "RLC" => Ok(LaneAction::RLC),
            other => Err(format!("unknown lane action {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccelPhase {
    CatchUp,
    FollowUp,
    Brake,
}

impl AccelPhase {
    fn head(self) -> &'static str {
        match self {
            AccelPhase::CatchUp => PHASE_HEADS[0],
            AccelPhase::FollowUp => PHASE_HEADS[1],
            AccelPhase::Brake => PHASE_HEADS[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionFlags {
    #[serde(rename = "unsafe")]
    pub unsafe_: bool,
    pub dangerous: bool,
}

/// Safety verdict per lane action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionMask {
    pub lk: ActionFlags,
    pub llc: ActionFlags,
    pub rlc: ActionFlags,
}

impl ActionMask {
    pub fn get(&self, a: LaneAction) -> ActionFlags {
        match a {
            LaneAction::LK => self.lk,
            LaneAction::LLC => self.llc,
            LaneAction::RLC => self.rlc,
        }
    }

    pub fn mirror(&self) -> Self {
        Self {
            lk: self.lk,
            llc: self.rlc,
            rlc: self.llc,
        }
    }
}

mod rules_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::logic::{parse_rule_set, RuleSet};

    pub fn serialize<S: Serializer>(r: &RuleSet, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RuleSet, D::Error> {
        let text = String::deserialize(d)?;
        parse_rule_set(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// m/s
    pub desired_speed: f64,
    /// s
    pub dt: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    /// Braking aims to stop this far short of the front vehicle, m.
    pub brake_margin: f64,
    pub thresholds: Thresholds,
    #[serde(with = "rules_text")]
    pub rules: RuleSet,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            desired_speed: 120.0 / 3.6,
            dt: 0.1,
            accel_min: -4.0,
            accel_max: 4.0,
            brake_margin: 2.0,
            thresholds: Thresholds::default(),
            rules: reference_rules(),
        }
    }
}

impl PolicyConfig {
    pub fn with_rules_text(mut self, text: &str) -> Result<Self, PolicyError> {
        self.rules = parse_rule_set(text)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.dt > 0.0) {
            return Err(PolicyError::BadConfig("dt must be positive".into()));
        }
        if !(self.accel_min < 0.0 && 0.0 < self.accel_max) {
            return Err(PolicyError::BadConfig(
                "need accel_min < 0 < accel_max".into(),
            ));
        }
        if !(self.brake_margin >= 0.0) || !(self.desired_speed >= 0.0) {
            return Err(PolicyError::BadConfig(
                "brake margin and desired speed must be non-negative".into(),
            ));
        }
        self.thresholds
            .validate()
            .map_err(|e| PolicyError::BadConfig(e.to_string()))?;
        require(
            &self.rules,
            SAFETY_HEADS
                .iter()
                .chain(&EFFICIENCY_HEADS)
                .chain(&PHASE_HEADS),
        )
    }
}

fn require<'a>(
    rules: &RuleSet,
    heads: impl IntoIterator<Item = &'a &'a str>,
) -> Result<(), PolicyError> {
    for h in heads {
        if !rules.contains_head(h) {
            return Err(PolicyError::MissingHead((*h).to_string()));
        }
    }
    Ok(())
}

pub fn action_mask(facts: &FactSet, rules: &RuleSet) -> Result<ActionMask, PolicyError> {
    require(rules, &SAFETY_HEADS)?;
    let mut ev = Evaluator::new(rules, facts);
    Ok(ActionMask {
        lk: ActionFlags {
            unsafe_: false,
            dangerous: ev.query_name("lk_isDangerous")?,
        },
        llc: ActionFlags {
            unsafe_: ev.query_name("llc_isUnsafe")?,
            dangerous: ev.query_name("llc_isDangerous")?,
        },
        rlc: ActionFlags {
            unsafe_: ev.query_name("rlc_isUnsafe")?,
            dangerous: ev.query_name("rlc_isDangerous")?,
        },
    })
}

/// Picks among the permitted actions: LLC or RLC when the matching
/// efficiency head holds, otherwise LK, otherwise LLC before RLC.
pub fn choose_lane_action(mask: &ActionMask, llc_better: bool, rlc_better: bool) -> LaneAction {
    let clean: Vec<LaneAction> = LaneAction::ALL
        .into_iter()
        .filter(|&a| !mask.get(a).unsafe_ && !mask.get(a).dangerous)
        .collect();
    let candidates = if clean.is_empty() {
        LaneAction::ALL
            .into_iter()
            .filter(|&a| !mask.get(a).unsafe_)
            .collect()
    } else {
        clean
    };
    let has = |a| candidates.contains(&a);
    if llc_better && has(LaneAction::LLC) {
        LaneAction::LLC
    } else if rlc_better && has(LaneAction::RLC) {
        LaneAction::RLC
    } else if has(LaneAction::LK) {
        LaneAction::LK
    } else if has(LaneAction::LLC) {
        LaneAction::LLC
    } else {
        LaneAction::RLC
    }
}

pub fn select_lane_action(facts: &FactSet, rules: &RuleSet) -> Result<LaneAction, PolicyError> {
    Ok(lane_decision(facts, rules)?.0)
}

fn lane_decision(
    facts: &FactSet,
    rules: &RuleSet,
) -> Result<(LaneAction, ActionMask), PolicyError> {
    require(rules, &EFFICIENCY_HEADS)?;
    let mask = action_mask(facts, rules)?;
    let (llc_better, rlc_better) = if facts.contains_name("front_isBusy") {
        let mut ev = Evaluator::new(rules, facts);
        (
            ev.query_name("llc_isBetter")?,
            ev.query_name("rlc_isBetter")?,
        )
    } else {
        (false, false)
    };
    Ok((choose_lane_action(&mask, llc_better, rlc_better), mask))
}

/// The phase whose head holds; follow-up when none does.
pub fn select_phase(facts: &FactSet, rules: &RuleSet) -> Result<AccelPhase, PolicyError> {
    require(rules, &PHASE_HEADS)?;
    let mut ev = Evaluator::new(rules, facts);
    let mut holding = Vec::new();
    for phase in [AccelPhase::CatchUp, AccelPhase::FollowUp, AccelPhase::Brake] {
        if ev.query_name(phase.head())? {
            holding.push(phase);
        }
    }
    match holding.as_slice() {
        [] => Ok(AccelPhase::FollowUp),
        [one] => Ok(*one),
        _ => Err(PolicyError::MultiplePhases(holding)),
    }
}

/// Acceleration for `phase` and the phase actually applied, which is
/// `Brake` when a follow-up would divide by a vanishing margin.
pub fn compute_acceleration(
    phase: AccelPhase,
    ns: &NumericState,
    cfg: &PolicyConfig,
) -> Result<(AccelPhase, f64), PolicyError> {
    let v = ns.ego_velocity;
    let clamp = |a: f64| a.clamp(cfg.accel_min, cfg.accel_max);
    let front = ns.sector(Sector::Front);
    match phase {
        AccelPhase::CatchUp => Ok((phase, clamp((cfg.desired_speed - v) / cfg.dt))),
        AccelPhase::FollowUp => {
            let tv = front.ok_or(PolicyError::MissingFrontTV(phase))?;
            let margin = tv.gap - cfg.thresholds.critical_gap;
            if margin < FOLLOW_UP_MIN_MARGIN {
                return compute_acceleration(AccelPhase::Brake, ns, cfg);
            }
            Ok((phase, clamp((tv.velocity.powi(2) - v * v) / (2.0 * margin))))
        }
        AccelPhase::Brake => {
            let tv = front.ok_or(PolicyError::MissingFrontTV(phase))?;
            if tv.gap <= 0.0 {
                return Err(PolicyError::NonpositiveGap(tv.gap));
            }
            let room = tv.gap - cfg.brake_margin;
            let a = if room > 0.0 {
                -v * v / (2.0 * room)
            } else {
                -v / cfg.dt
            };
            Ok((phase, a.min(0.0)))
        }
    }
}

/// One control decision, with the safety verdicts that shaped it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub lane_action: LaneAction,
    pub phase: AccelPhase,
    /// m/s²
    pub a_x: f64,
    /// Desired velocity for the next step, m/s.
    pub v_d: f64,
    pub mask: ActionMask,
}

pub fn decide_facts(
    facts: &FactSet,
    ns: &NumericState,
    cfg: &PolicyConfig,
) -> Result<Decision, PolicyError> {
    let (lane_action, mask) = lane_decision(facts, &cfg.rules)?;
    let phase = select_phase(facts, &cfg.rules)?;
    let (phase, a_x) = compute_acceleration(phase, ns, cfg)?;
    Ok(Decision {
        lane_action,
        phase,
        a_x,
        v_d: (ns.ego_velocity + a_x * cfg.dt).max(0.0),
        mask,
    })
}

pub fn decide(ns: &NumericState, cfg: &PolicyConfig) -> Result<Decision, PolicyError> {
    let facts = abstract_state(ns, &cfg.thresholds).to_facts();
    decide_facts(&facts, ns, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FeatureSpec, SymbolicState};

    fn facts(names: &[&str]) -> FactSet {
        FactSet::from_names(names.iter().copied())
    }

    fn rules() -> RuleSet {
        reference_rules()
    }

    #[test]
    fn masks() {
        let m = action_mask(
            &facts(&["right_isBusy", "left_isValid", "right_isValid"]),
            &rules(),
        )
        .unwrap();
        assert!(m.rlc.unsafe_);
        let m = action_mask(&facts(&["back_isBusy", "backVel_isBigger"]), &rules()).unwrap();
        assert!(m.lk.dangerous);
        let m = action_mask(&facts(&["left_isValid", "right_isValid"]), &rules()).unwrap();
        assert_eq!(m, ActionMask::default());
    }

    #[test]
    fn lane_priorities() {
        let v = ["left_isValid", "right_isValid"];
        let with = |extra: &[&str]| facts(&[&v[..], extra].concat());
        assert_eq!(
            select_lane_action(&with(&[]), &rules()).unwrap(),
            LaneAction::LK
        );
        assert_eq!(
            select_lane_action(&with(&["front_isBusy"]), &rules()).unwrap(),
            LaneAction::LLC
        );
        assert_eq!(
            select_lane_action(
                &with(&["front_isBusy", "left_isBusy", "frontLeft_isBusy"]),
                &rules()
            )
            .unwrap(),
            LaneAction::RLC
        );
    }

    #[test]
    fn phases() {
        assert_eq!(
            select_phase(&facts(&[]), &rules()).unwrap(),
            AccelPhase::CatchUp
        );
        assert_eq!(
            select_phase(&facts(&["front_isBusy", "frontDist_isSafe"]), &rules()).unwrap(),
            AccelPhase::FollowUp
        );
        assert_eq!(
            select_phase(&facts(&["front_isBusy", "frontVel_isLower"]), &rules()).unwrap(),
            AccelPhase::Brake
        );
        assert_eq!(
            select_phase(&facts(&["front_isBusy"]), &rules()).unwrap(),
            AccelPhase::FollowUp
        );
    }

    #[test]
    fn overlapping_phase_rules_are_rejected() {
        let mut r = rules();
        r.replace(crate::logic::parse_rule("brake:- front_isBusy.").unwrap());
        assert!(matches!(
            select_phase(&facts(&["front_isBusy", "frontDist_isSafe"]), &r),
            Err(PolicyError::MultiplePhases(_))
        ));
    }

    #[test]
    fn missing_head_is_reported() {
        let r = parse_rule_set("rlc_isUnsafe:- right_isBusy.").unwrap();
        assert!(matches!(
            action_mask(&FactSet::new(), &r),
            Err(PolicyError::MissingHead(_))
        ));
    }

    #[test]
    fn acceleration_law() {
        let cfg = PolicyConfig {
            dt: 1.0,
            accel_max: 100.0,
            accel_min: -100.0,
            brake_margin: 0.0,
            desired_speed: 33.33,
            ..PolicyConfig::default()
        };
        let (_, a) =
            compute_acceleration(AccelPhase::CatchUp, &NumericState::new(27.78), &cfg).unwrap();
        assert!((a - 5.55).abs() < 1e-9);
        let ns = NumericState::new(30.0).with(Sector::Front, 50.0, 25.0);
        let (_, a) = compute_acceleration(AccelPhase::FollowUp, &ns, &cfg).unwrap();
        assert!((a + 3.4375).abs() < 1e-12);
        let ns = NumericState::new(20.0).with(Sector::Front, 40.0, 0.0);
        let (_, a) = compute_acceleration(AccelPhase::Brake, &ns, &cfg).unwrap();
        assert!((a + 5.0).abs() < 1e-12);
        assert!(matches!(
            compute_acceleration(AccelPhase::Brake, &NumericState::new(20.0), &cfg),
            Err(PolicyError::MissingFrontTV(_))
        ));
        let touching = NumericState::new(20.0).with(Sector::Front, 0.0, 0.0);
        assert!(matches!(
            compute_acceleration(AccelPhase::Brake, &touching, &cfg),
            Err(PolicyError::NonpositiveGap(_))
        ));
    }

    #[test]
    fn follow_up_near_critical_gap_brakes() {
        let cfg = PolicyConfig::default();
        let ns = NumericState::new(20.0).with(Sector::Front, 10.2, 20.0);
        let (phase, a) = compute_acceleration(AccelPhase::FollowUp, &ns, &cfg).unwrap();
        assert_eq!(phase, AccelPhase::Brake);
        assert!(a < 0.0);
    }

    #[test]
    fn empty_road_decision() {
        let cfg = PolicyConfig::default();
        let d = decide(&NumericState::new(25.0), &cfg).unwrap();
        assert_eq!(
            (d.lane_action, d.phase),
            (LaneAction::LK, AccelPhase::CatchUp)
        );
        assert_eq!(d.a_x, 4.0);
        assert!((d.v_d - 25.4).abs() < 1e-12);
    }

    #[test]
    fn change_left_while_braking() {
        let cfg = PolicyConfig::default();
        let ns = NumericState::new(30.0).with(Sector::Front, 15.0, 20.0);
        let d = decide(&ns, &cfg).unwrap();
        assert_eq!(
            (d.lane_action, d.phase),
            (LaneAction::LLC, AccelPhase::Brake)
        );
    }

    #[test]
    fn efficiency_heads_are_exclusive_on_full_space() {
        let r = rules();
        let spec = FeatureSpec::occupancy_validity();
        for s in spec.iter_states() {
            let f = s.to_facts();
            let mut ev = Evaluator::new(&r, &f);
            assert!(
                !(ev.query_name("llc_isBetter").unwrap() && ev.query_name("rlc_isBetter").unwrap())
            );
        }
    }

    #[test]
    fn mask_is_mirror_equivariant() {
        let r = rules();
        for s in FeatureSpec::occupancy_validity().iter_states() {
            let m: SymbolicState = s.mirrored();
            let a = action_mask(&s.to_facts(), &r).unwrap();
            let b = action_mask(&m.to_facts(), &r).unwrap();
            assert_eq!(a.mirror(), b);
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PolicyConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PolicyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }
}
