//! C ABI over `sil_core`.
//!
//! Every fallible call returns a [`SilStatus`]; on failure the message is
//! available from [`sil_last_error_message`] on the same thread. Handles are
//! opaque and owned by the caller until passed to their `_free` function.
//! Strings returned through `char **` out-parameters are released with
//! [`sil_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sil_core::config::RunConfig;
use sil_core::domain::{Direction, NumericState, SectorTarget};
use sil_core::experiment::episode_seeds;
use sil_core::logic::{parse_rule_set, query_head, FactSet, PredicateSymbol, RuleSet};
use sil_core::policy::{decide, AccelPhase, LaneAction, PolicyConfig};
use sil_core::sim::{aggregate, run_episodes};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Policy = 4,
    Simulation = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilLaneAction {
    LaneKeep = 0,
    LeftLaneChange = 1,
    RightLaneChange = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilPhase {
    CatchUp = 0,
    FollowUp = 1,
    Brake = 2,
}

pub const SIL_DIRECTION_L2R: i32 = 0;
pub const SIL_DIRECTION_R2L: i32 = 1;

/// One surrounding sector; ignored unless `present` is nonzero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SilSector {
    pub present: i32,
    /// m
    pub gap: f64,
    /// m/s
    pub velocity: f64,
}

/// Sectors in order: front, front-right, right, back-right, back, back-left, left, front-left.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SilNumericState {
    pub ego_velocity: f64,
    pub ego_lane: i32,
    pub sectors: [SilSector; 8],
    pub right_valid: i32,
    pub left_valid: i32,
    /// `SIL_DIRECTION_L2R` or `SIL_DIRECTION_R2L`.
    pub direction: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SilDecision {
    pub lane_action: SilLaneAction,
    pub phase: SilPhase,
    /// m/s²
    pub a_x: f64,
    /// m/s
    pub v_d: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SilSummary {
    pub episodes: u64,
    pub n_lc: u64,
    pub n_hits: u64,
    /// s
    pub t_avg: f64,
    /// m
    pub d_avg: f64,
    /// km/h
    pub v_avg: f64,
}

/// Opaque policy handle.
pub struct SilPolicy {
    config: PolicyConfig,
}

/// Opaque rule set handle.
pub struct SilRuleSet {
    rules: RuleSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

type Failure = (SilStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SilStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SilStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SilStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (SilStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SilStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn direction(code: i32) -> Result<Direction, Failure> {
    match code {
        SIL_DIRECTION_L2R => Ok(Direction::L2R),
        SIL_DIRECTION_R2L => Ok(Direction::R2L),
        other => Err((
            SilStatus::InvalidArgument,
            format!("unknown direction {other}"),
        )),
    }
}

fn numeric_state(s: &SilNumericState) -> Result<NumericState, Failure> {
    let mut ns = NumericState::new(s.ego_velocity);
    ns.ego_lane = s.ego_lane;
    ns.right_valid = s.right_valid != 0;
    ns.left_valid = s.left_valid != 0;
    ns.direction = direction(s.direction)?;
    for (slot, sec) in ns.sectors.iter_mut().zip(&s.sectors) {
        *slot = (sec.present != 0).then_some(SectorTarget {
            gap: sec.gap,
            velocity: sec.velocity,
        });
    }
    Ok(ns)
}

fn to_cstring(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (SilStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `sil_*` call on this thread.
#[no_mangle]
pub extern "C" fn sil_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sil_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a policy from a JSON policy config, or the built-in rules and defaults when `config_json` is null.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sil_policy_new(
    config_json: *const c_char,
    out: *mut *mut SilPolicy,
) -> SilStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let config = if config_json.is_null() {
            PolicyConfig::default()
        } else {
            let text = read_str(config_json, "config_json")?;
            serde_json::from_str::<PolicyConfig>(text)
                .map_err(|e| (SilStatus::Parse, e.to_string()))?
        };
        config
            .validate()
            .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(SilPolicy { config }));
        Ok(())
    })
}

/// Replaces the policy's rules with those in `rules`; heads not defined there keep their current rule.
///
/// # Safety
/// `policy` must be a live handle and `rules` a live rule set.
#[no_mangle]
pub unsafe extern "C" fn sil_policy_set_rules(
    policy: *mut SilPolicy,
    rules: *const SilRuleSet,
) -> SilStatus {
    guard(|| {
        let policy = out_ref(policy, "policy")?;
        let rules = rules.as_ref().ok_or_else(|| null("rules"))?;
        let mut merged = policy.config.clone();
        for r in rules.rules.rules() {
            merged.rules.replace(r.clone());
        }
        merged
            .validate()
            .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?;
        policy.config = merged;
        Ok(())
    })
}

/// One decision for a perceived state.
///
/// # Safety
/// `policy` must be a live handle; `state` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sil_policy_decide(
    policy: *const SilPolicy,
    state: *const SilNumericState,
    out: *mut SilDecision,
) -> SilStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        let out = out_ref(out, "out")?;
        let ns = numeric_state(state)?;
        let d = decide(&ns, &policy.config).map_err(|e| (SilStatus::Policy, e.to_string()))?;
        *out = SilDecision {
            lane_action: match d.lane_action {
                LaneAction::LK => SilLaneAction::LaneKeep,
                LaneAction::LLC => SilLaneAction::LeftLaneChange,
                LaneAction::RLC => SilLaneAction::RightLaneChange,
            },
            phase: match d.phase {
                AccelPhase::CatchUp => SilPhase::CatchUp,
                AccelPhase::FollowUp => SilPhase::FollowUp,
                AccelPhase::Brake => SilPhase::Brake,
            },
            a_x: d.a_x,
            v_d: d.v_d,
        };
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sil_policy_free(policy: *mut SilPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Parses rules written as `head:- a, not(b); c.`, one or more per text.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sil_rules_parse(
    text: *const c_char,
    out: *mut *mut SilRuleSet,
) -> SilStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let rules = parse_rule_set(read_str(text, "text")?)
            .map_err(|e| (SilStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(SilRuleSet { rules }));
        Ok(())
    })
}

/// Canonical text of the rule set; free with `sil_string_free`.
///
/// # Safety
/// `rules` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sil_rules_render(
    rules: *const SilRuleSet,
    out: *mut *mut c_char,
) -> SilStatus {
    guard(|| {
        let rules = rules.as_ref().ok_or_else(|| null("rules"))?;
        let out = out_ref(out, "out")?;
        *out = to_cstring(rules.rules.render())?;
        Ok(())
    })
}

/// Evaluates `head` against the facts named in `facts[0..n_facts]`; writes 1 if it holds, else 0.
///
/// # Safety
/// `rules` live; `head` NUL-terminated; `facts` points to `n_facts` NUL-terminated strings
/// (may be null when `n_facts` is 0); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sil_rules_query(
    rules: *const SilRuleSet,
    head: *const c_char,
    facts: *const *const c_char,
    n_facts: usize,
    out: *mut i32,
) -> SilStatus {
    guard(|| {
        let rules = rules.as_ref().ok_or_else(|| null("rules"))?;
        let head = PredicateSymbol::new(read_str(head, "head")?)
            .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?;
        let out = out_ref(out, "out")?;
        if facts.is_null() && n_facts > 0 {
            return Err(null("facts"));
        }
        let mut set = FactSet::new();
        for i in 0..n_facts {
            let name = read_str(*facts.add(i), "fact")?;
            set.insert(
                PredicateSymbol::new(name)
                    .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?,
            );
        }
        let holds = query_head(&head, &rules.rules, &set)
            .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?;
        *out = i32::from(holds);
        Ok(())
    })
}

/// # Safety
/// `rules` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sil_rules_free(rules: *mut SilRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Runs `episodes` SIL episodes in one direction and writes their summary.
/// `config_json` is a run configuration (null for defaults); `seed` is the base seed.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sil_simulate(
    config_json: *const c_char,
    seed: u64,
    episodes: u32,
    direction_code: i32,
    out: *mut SilSummary,
) -> SilStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            let cfg: RunConfig = serde_json::from_str(read_str(config_json, "config_json")?)
                .map_err(|e| (SilStatus::Parse, e.to_string()))?;
            cfg.validate()
                .map_err(|e| (SilStatus::InvalidArgument, e.to_string()))?;
            cfg
        };
        let dir = direction(direction_code)?;
        let sc = cfg.scenario().with_direction(dir);
        let sim_err = |e: sil_core::sim::SimError| (SilStatus::Simulation, e.to_string());
        let results = run_episodes(
            &sc,
            &sc.control,
            &episode_seeds(seed, dir, episodes as usize),
        )
        .map_err(sim_err)?;
        let s = aggregate(&results).map_err(sim_err)?;
        *out = SilSummary {
            episodes: s.episodes as u64,
            n_lc: s.n_lc,
            n_hits: s.n_hits,
            t_avg: s.t_avg,
            d_avg: s.d_avg,
            v_avg: s.v_avg,
        };
        Ok(())
    })
}
