//! Knowledge acquisition: label every state of a factored space with a
//! ground-truth labeler and package the result as an ILP task.

mod files;
mod tasks;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::domain::{DomainError, FeatureSpec, SymbolicState};
use crate::logic::{eval_rule, FactSet, LogicError, PredicateSymbol, Rule};

pub use files::{
    read_task_files, write_task_files, TaskManifest, BIAS_FILE, EXAMPLES_FILE, FACTS_FILE,
};
pub use tasks::{default_tasks, reference_rule, reference_rules, TaskDefinition, REFERENCE_RULES};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("bias has no body predicates")]
    EmptyBias,
    #[error("body predicate {0} listed twice")]
    DuplicateBodyPredicate(String),
    #[error("head predicate {0} cannot also be a body predicate")]
    HeadInBias(String),
    #[error("predicate {0} is not declared in the bias")]
    UnknownPredicate(String),
    #[error("example {0} is labeled both positive and negative")]
    DuplicateLabel(u64),
    #[error("example {0} has no state table entry")]
    MissingState(u64),
    #[error("state {0} carries facts but no label")]
    UnlabeledState(u64),
    #[error("{}:{line}: {message}", file.display())]
    Syntax {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown task {0:?}")]
    UnknownTask(String),
}

/// Language bias: the target head and the candidate body predicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasSpec {
    head: PredicateSymbol,
    body_preds: Vec<PredicateSymbol>,
    allow_negation: bool,
}

impl BiasSpec {
    pub fn new(
        head: PredicateSymbol,
        body_preds: Vec<PredicateSymbol>,
        allow_negation: bool,
    ) -> Result<Self, KnowledgeError> {
        if body_preds.is_empty() {
            return Err(KnowledgeError::EmptyBias);
        }
        let mut seen = BTreeSet::new();
        for p in &body_preds {
            if p == &head {
                return Err(KnowledgeError::HeadInBias(p.to_string()));
            }
            if !seen.insert(p) {
                return Err(KnowledgeError::DuplicateBodyPredicate(p.to_string()));
            }
        }
        Ok(Self {
            head,
            body_preds,
            allow_negation,
        })
    }

    pub fn head(&self) -> &PredicateSymbol {
        &self.head
    }

    pub fn body_preds(&self) -> &[PredicateSymbol] {
        &self.body_preds
    }

    pub fn allow_negation(&self) -> bool {
        self.allow_negation
    }

    /// Number of candidate body predicates.
    pub fn n_bp(&self) -> usize {
        self.body_preds.len()
    }
}

/// Ground truth for one task.
#[derive(Clone)]
pub enum Labeler {
    Rule(Rule),
    Builtin {
        name: String,
        label: fn(&SymbolicState) -> bool,
    },
}

impl Labeler {
    pub fn label(&self, state: &SymbolicState) -> bool {
        match self {
            Labeler::Rule(r) => eval_rule(r, &state.to_facts()),
            Labeler::Builtin { label, .. } => label(state),
        }
    }

    pub fn never() -> Self {
        Labeler::Builtin {
            name: "never".into(),
            label: |_| false,
        }
    }

    pub fn always() -> Self {
        Labeler::Builtin {
            name: "always".into(),
            label: |_| true,
        }
    }
}

impl fmt::Debug for Labeler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Labeler::Rule(r) => write!(f, "Labeler::Rule({r})"),
            Labeler::Builtin { name, .. } => write!(f, "Labeler::Builtin({name})"),
        }
    }
}

/// Positive and negative example ids with the facts of every labeled state.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExampleSet {
    pos: BTreeSet<u64>,
    neg: BTreeSet<u64>,
    states: BTreeMap<u64, FactSet>,
}

impl ExampleSet {
    pub fn new(
        pos: BTreeSet<u64>,
        neg: BTreeSet<u64>,
        states: BTreeMap<u64, FactSet>,
    ) -> Result<Self, KnowledgeError> {
        if let Some(&id) = pos.intersection(&neg).next() {
            return Err(KnowledgeError::DuplicateLabel(id));
        }
        if let Some(&id) = pos.iter().chain(&neg).find(|id| !states.contains_key(id)) {
            return Err(KnowledgeError::MissingState(id));
        }
        if let Some(&id) = states
            .keys()
            .find(|id| !pos.contains(id) && !neg.contains(id))
        {
            return Err(KnowledgeError::UnlabeledState(id));
        }
        Ok(Self { pos, neg, states })
    }

    pub fn pos(&self) -> &BTreeSet<u64> {
        &self.pos
    }

    pub fn neg(&self) -> &BTreeSet<u64> {
        &self.neg
    }

    pub fn states(&self) -> &BTreeMap<u64, FactSet> {
        &self.states
    }

    pub fn facts(&self, id: u64) -> Option<&FactSet> {
        self.states.get(&id)
    }

    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every predicate true in at least one state.
    pub fn vocabulary(&self) -> BTreeSet<&PredicateSymbol> {
        self.states.values().flat_map(|f| f.iter()).collect()
    }
}

/// Labels every state of `spec` exactly once.
pub fn generate_examples(spec: &FeatureSpec, labeler: &Labeler) -> ExampleSet {
    let mut ex = ExampleSet::default();
    for state in spec.iter_states() {
        let id = state.id;
        if labeler.label(&state) {
            ex.pos.insert(id);
        } else {
            ex.neg.insert(id);
        }
        ex.states.insert(id, state.to_facts());
    }
    if ex.pos.is_empty() || ex.neg.is_empty() {
        log::warn!(
            "labeler {labeler:?} is degenerate: {} positives, {} negatives",
            ex.pos.len(),
            ex.neg.len()
        );
    }
    ex
}
