//! Propositional Horn-clause dialect used for driving rules.
//!
//! A rule has a single head and a body made of one or more clauses joined by
//! `;` (disjunction). Each clause is a conjunction of literals joined by `,`,
//! where a literal is either an atom or `not(atom)` under negation as failure.
//! All predicates are nullary; every evaluation is against one [`FactSet`]
//! describing the current state.

mod eval;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_clause, eval_rule, query_head, Evaluator};
pub use parser::{parse_rule, parse_rule_set};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("clause contains both {0} and not({0})")]
    ContradictoryClause(String),
    #[error("clause repeats literal {0}")]
    DuplicateLiteral(String),
    #[error("empty body")]
    EmptyBody,
    #[error("head {0} appears in its own body")]
    HeadInBody(String),
    #[error("more than one rule for head {0}")]
    DuplicateHead(String),
    #[error("cyclic definition through {0}")]
    CyclicDefinition(String),
}

/// Name of a nullary predicate: `[a-z][A-Za-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PredicateSymbol(String);

impl PredicateSymbol {
    pub fn new(name: impl Into<String>) -> Result<Self, LogicError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(Self(name))
        } else {
            Err(LogicError::InvalidIdentifier(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for PredicateSymbol {
    type Error = LogicError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PredicateSymbol> for String {
    fn from(p: PredicateSymbol) -> String {
        p.0
    }
}

impl fmt::Display for PredicateSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for PredicateSymbol {
    type Err = LogicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negated,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: PredicateSymbol,
    pub polarity: Polarity,
}

impl Literal {
    pub fn pos(predicate: PredicateSymbol) -> Self {
        Self {
            predicate,
            polarity: Polarity::Positive,
        }
    }

    pub fn neg(predicate: PredicateSymbol) -> Self {
        Self {
            predicate,
            polarity: Polarity::Negated,
        }
    }

    pub fn is_negated(&self) -> bool {
        self.polarity == Polarity::Negated
    }

    /// True when the literal holds in `facts` under the closed-world reading.
    pub fn holds(&self, facts: &FactSet) -> bool {
        facts.contains(&self.predicate) != self.is_negated()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Positive => write!(f, "{}", self.predicate),
            Polarity::Negated => write!(f, "not({})", self.predicate),
        }
    }
}

/// A conjunction of literals. Non-empty, no repeats, no `p` together with `not(p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Literal>", into = "Vec<Literal>")]
pub struct ClauseBody {
    literals: Vec<Literal>,
}

impl ClauseBody {
    pub fn new(literals: Vec<Literal>) -> Result<Self, LogicError> {
        if literals.is_empty() {
            return Err(LogicError::EmptyBody);
        }
        for (i, lit) in literals.iter().enumerate() {
            for other in &literals[..i] {
                if other.predicate == lit.predicate {
                    return Err(if other.polarity == lit.polarity {
                        LogicError::DuplicateLiteral(lit.to_string())
                    } else {
                        LogicError::ContradictoryClause(lit.predicate.to_string())
                    });
                }
            }
        }
        Ok(Self { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn mentions(&self, predicate: &PredicateSymbol) -> bool {
        self.literals.iter().any(|l| &l.predicate == predicate)
    }
}

impl TryFrom<Vec<Literal>> for ClauseBody {
    type Error = LogicError;
    fn try_from(value: Vec<Literal>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ClauseBody> for Vec<Literal> {
    fn from(c: ClauseBody) -> Self {
        c.literals
    }
}

impl fmt::Display for ClauseBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        Ok(())
    }
}

/// `head :- clause_1 ; clause_2 ; ...`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    head: PredicateSymbol,
    clauses: Vec<ClauseBody>,
}

impl Rule {
    pub fn new(head: PredicateSymbol, clauses: Vec<ClauseBody>) -> Result<Self, LogicError> {
        if clauses.is_empty() {
            return Err(LogicError::EmptyBody);
        }
        if clauses.iter().any(|c| c.mentions(&head)) {
            return Err(LogicError::HeadInBody(head.to_string()));
        }
        Ok(Self { head, clauses })
    }

    /// Builds a rule without the head-in-body check. Only [`query_head`]
    /// can then detect the self reference, as a cycle.
    pub fn new_unchecked(head: PredicateSymbol, clauses: Vec<ClauseBody>) -> Self {
        Self { head, clauses }
    }

    pub fn head(&self) -> &PredicateSymbol {
        &self.head
    }

    pub fn clauses(&self) -> &[ClauseBody] {
        &self.clauses
    }

    /// Canonical text, `head:- a, not(b); c.`
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Every predicate mentioned in the body, in first-appearance order.
    pub fn body_predicates(&self) -> Vec<PredicateSymbol> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for lit in self.clauses.iter().flat_map(|c| c.literals()) {
            if seen.insert(lit.predicate.clone()) {
                out.push(lit.predicate.clone());
            }
        }
        out
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:- ", self.head)?;
        for (i, clause) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{clause}")?;
        }
        f.write_str(".")
    }
}

/// Ground facts true in one state. Anything absent is false.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactSet(BTreeSet<PredicateSymbol>);

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: PredicateSymbol) -> bool {
        self.0.insert(p)
    }

    pub fn contains(&self, p: &PredicateSymbol) -> bool {
        self.0.contains(p)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.0.iter().any(|p| p.as_str() == name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredicateSymbol> {
        self.0.iter()
    }

    /// Convenience for tests and fixtures; panics on a malformed name.
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        names
            .into_iter()
            .map(|n| PredicateSymbol::new(n).expect("valid predicate name"))
            .collect()
    }
}

impl FromIterator<PredicateSymbol> for FactSet {
    fn from_iter<T: IntoIterator<Item = PredicateSymbol>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Extend<PredicateSymbol> for FactSet {
    fn extend<T: IntoIterator<Item = PredicateSymbol>>(&mut self, iter: T) {
        self.0.extend(iter)
    }
}

impl<'a> IntoIterator for &'a FactSet {
    type Item = &'a PredicateSymbol;
    type IntoIter = std::collections::btree_set::Iter<'a, PredicateSymbol>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// At most one rule per head.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: BTreeMap<PredicateSymbol, Rule>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rule: Rule) -> Result<(), LogicError> {
        if self.rules.contains_key(rule.head()) {
            return Err(LogicError::DuplicateHead(rule.head().to_string()));
        }
        self.rules.insert(rule.head().clone(), rule);
        Ok(())
    }

    /// Inserts or overwrites the rule for its head.
    pub fn replace(&mut self, rule: Rule) -> Option<Rule> {
        self.rules.insert(rule.head().clone(), rule)
    }

    pub fn get(&self, head: &PredicateSymbol) -> Option<&Rule> {
        self.rules.get(head)
    }

    pub fn get_by_name(&self, head: &str) -> Option<&Rule> {
        self.rules
            .iter()
            .find(|(k, _)| k.as_str() == head)
            .map(|(_, r)| r)
    }

    pub fn contains_head(&self, head: &str) -> bool {
        self.get_by_name(head).is_some()
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// One rendered rule per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for rule in self.rules.values() {
            out.push_str(&rule.render());
            out.push('\n');
        }
        out
    }
}

impl FromIterator<Rule> for RuleSet {
    fn from_iter<T: IntoIterator<Item = Rule>>(iter: T) -> Self {
        let mut set = RuleSet::new();
        for r in iter {
            set.replace(r);
        }
        set
    }
}
