use std::collections::HashMap;

use super::{ClauseBody, FactSet, LogicError, PredicateSymbol, Rule, RuleSet};

pub fn eval_clause(clause: &ClauseBody, facts: &FactSet) -> bool {
    clause.literals().iter().all(|l| l.holds(facts))
}

/// Negation as failure over a single fact set: true iff some clause has all
/// its positive atoms present and all its negated atoms absent.
pub fn eval_rule(rule: &Rule, facts: &FactSet) -> bool {
    rule.clauses().iter().any(|c| eval_clause(c, facts))
}

/// Resolves `head` against `facts` and, failing that, against the rules.
pub fn query_head(
    head: &PredicateSymbol,
    rules: &RuleSet,
    facts: &FactSet,
) -> Result<bool, LogicError> {
    Evaluator::new(rules, facts).query(head)
}

/// Memoizing resolver for one (rule set, fact set) pair.
///
/// A body atom is true if it is a fact; otherwise, if some rule defines it,
/// its value is that rule's value. Revisiting a head that is still being
/// resolved is a [`LogicError::CyclicDefinition`].
pub struct Evaluator<'a> {
    rules: &'a RuleSet,
    facts: &'a FactSet,
    memo: HashMap<PredicateSymbol, bool>,
    stack: Vec<PredicateSymbol>,
}

impl<'a> Evaluator<'a> {
    pub fn new(rules: &'a RuleSet, facts: &'a FactSet) -> Self {
        Self {
            rules,
            facts,
            memo: HashMap::new(),
            stack: Vec::new(),
        }
    }

    /// Value of a head predicate. Heads without a rule fall back to membership in the facts.
    pub fn query(&mut self, head: &PredicateSymbol) -> Result<bool, LogicError> {
        match self.rules.get(head) {
            Some(rule) => self.eval_defined(rule),
            None => Ok(self.facts.contains(head)),
        }
    }

    pub fn query_name(&mut self, head: &str) -> Result<bool, LogicError> {
        let head = PredicateSymbol::new(head)?;
        self.query(&head)
    }

    fn atom(&mut self, p: &PredicateSymbol) -> Result<bool, LogicError> {
        if self.facts.contains(p) {
            return Ok(true);
        }
        match self.rules.get(p) {
            Some(rule) => self.eval_defined(rule),
            None => Ok(false),
        }
    }

    fn eval_defined(&mut self, rule: &'a Rule) -> Result<bool, LogicError> {
        let head = rule.head();
        if let Some(&v) = self.memo.get(head) {
            return Ok(v);
        }
        if self.stack.contains(head) {
            return Err(LogicError::CyclicDefinition(head.to_string()));
        }
        self.stack.push(head.clone());
        let mut value = false;
        'clauses: for clause in rule.clauses() {
            for lit in clause.literals() {
                if self.atom(&lit.predicate)? == lit.is_negated() {
                    continue 'clauses;
                }
            }
            value = true;
            break;
        }
        self.stack.pop();
        self.memo.insert(head.clone(), value);
        Ok(value)
    }
}
