//! Learning-from-failures rule induction over nullary predicates.
//!
//! Candidate clauses are generated level by level, tested alone against the
//! examples, and the failures constrain what is generated next. The accepted
//! clauses are then combined into a disjunction by a minimum set cover.

mod cover;
mod search;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{vocabulary, FeatureSpec};
use crate::knowledge::ExampleSet;
use crate::logic::{eval_rule, ClauseBody, LogicError, PredicateSymbol, Rule};

pub use search::{enumerate_clauses, induce};

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("no positive examples")]
    NoPositives,
    #[error("examples {pos} (positive) and {neg} (negative) have identical facts")]
    InconsistentExamples { pos: u64, neg: u64 },
    #[error("time budget exhausted after {} candidates", .0.candidates_tested)]
    BudgetExhausted(Box<InductionResult>),
    #[error("predicate {0} does not occur in the examples")]
    UnknownPredicate(String),
    #[error("at most 64 body predicates are supported, got {0}")]
    TooManyPredicates(usize),
    #[error("invalid search config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_literals: usize,
    pub max_clauses: usize,
    pub allow_negation: bool,
    #[serde(with = "secs")]
    pub time_budget: Duration,
    /// Test each level's candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_literals: 3,
            max_clauses: 3,
            allow_negation: true,
            time_budget: Duration::from_secs(60),
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn new(max_literals: usize, max_clauses: usize) -> Result<Self, IlpError> {
        let cfg = Self {
            max_literals,
            max_clauses,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IlpError> {
        if self.max_literals == 0 {
            return Err(IlpError::BadConfig("max_literals must be at least 1"));
        }
        if self.max_clauses == 0 {
            return Err(IlpError::BadConfig("max_clauses must be at least 1"));
        }
        if self.time_budget.is_zero() {
            return Err(IlpError::BadConfig("time budget must be positive"));
        }
        Ok(())
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// A disjunction of clauses for one head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub head: PredicateSymbol,
    pub clauses: Vec<ClauseBody>,
}

impl Hypothesis {
    pub fn to_rule(&self) -> Result<Rule, LogicError> {
        Rule::new(self.head.clone(), self.clauses.clone())
    }

    pub fn render(&self) -> String {
        Rule::new_unchecked(self.head.clone(), self.clauses.clone()).render()
    }

    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(ClauseBody::len).sum()
    }

    fn covers(&self, facts: &crate::logic::FactSet) -> bool {
        eval_rule(
            &Rule::new_unchecked(self.head.clone(), self.clauses.clone()),
            facts,
        )
    }
}

impl From<Rule> for Hypothesis {
    fn from(r: Rule) -> Self {
        Self {
            head: r.head().clone(),
            clauses: r.clauses().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    /// Mean of precision and recall.
    pub accuracy: f64,
}

impl CoverageReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            tn,
            fn_,
            precision,
            recall,
            accuracy: (precision + recall) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductionResult {
    pub hypothesis: Hypothesis,
    pub coverage: CoverageReport,
    pub elapsed: Duration,
    pub candidates_tested: u64,
    pub pruned: u64,
    /// False when no hypothesis within the bounds covers every positive.
    pub complete: bool,
}

/// Flat JSON form of an [`InductionResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionReport {
    pub rule: String,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub elapsed_s: f64,
    pub candidates_tested: u64,
    pub pruned: u64,
    pub complete: bool,
}

impl From<&InductionResult> for InductionReport {
    fn from(r: &InductionResult) -> Self {
        let c = r.coverage;
        Self {
            rule: r.hypothesis.render(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            precision: c.precision,
            recall: c.recall,
            accuracy: c.accuracy,
            elapsed_s: r.elapsed.as_secs_f64(),
            candidates_tested: r.candidates_tested,
            pruned: r.pruned,
            complete: r.complete,
        }
    }
}

/// Tallies which examples the hypothesis covers, evaluating it as a rule.
pub fn coverage(h: &Hypothesis, ex: &ExampleSet) -> Result<CoverageReport, IlpError> {
    let known: BTreeSet<&PredicateSymbol> = ex.vocabulary();
    let global = vocabulary();
    for c in &h.clauses {
        for l in c.literals() {
            if !known.contains(&l.predicate) && !global.contains(&l.predicate) {
                return Err(IlpError::UnknownPredicate(l.predicate.to_string()));
            }
        }
    }
    let covered = |id: &u64| h.covers(ex.facts(*id).expect("labeled ids have facts"));
    let tp = ex.pos().iter().filter(|id| covered(id)).count();
    let fp = ex.neg().iter().filter(|id| covered(id)).count();
    Ok(CoverageReport::from_counts(
        tp,
        fp,
        ex.neg().len() - fp,
        ex.pos().len() - tp,
    ))
}

/// Truth-table equality of the two bodies over every state of `spec`.
pub fn semantically_equivalent(a: &Hypothesis, b: &Hypothesis, spec: &FeatureSpec) -> bool {
    spec.iter_states().all(|s| {
        let facts = s.to_facts();
        a.covers(&facts) == b.covers(&facts)
    })
}
