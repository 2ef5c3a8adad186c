//! Induction checked against brute-force enumeration of small hypothesis spaces.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sil_core::ilp::{coverage, enumerate_clauses, induce, Hypothesis, IlpError, SearchConfig};
use sil_core::knowledge::{BiasSpec, ExampleSet};
use sil_core::logic::{eval_clause, ClauseBody, FactSet, Literal, PredicateSymbol};

fn preds(n: usize) -> Vec<PredicateSymbol> {
    (0..n)
        .map(|i| PredicateSymbol::new(format!("p{i}")).unwrap())
        .collect()
}

fn bias(n: usize) -> BiasSpec {
    BiasSpec::new(PredicateSymbol::new("h").unwrap(), preds(n), true).unwrap()
}

/// Every subset of the n predicates as its own state, id = bitmask.
fn all_states(n: usize) -> Vec<(u64, FactSet)> {
    let ps = preds(n);
    (0..1u64 << n)
        .map(|m| {
            let f = ps
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, p)| p.clone())
                .collect();
            (m, f)
        })
        .collect()
}

fn examples(n: usize, label: impl Fn(&FactSet) -> bool) -> ExampleSet {
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    let mut states = BTreeMap::new();
    for (id, f) in all_states(n) {
        if label(&f) {
            pos.insert(id);
        } else {
            neg.insert(id);
        }
        states.insert(id, f);
    }
    ExampleSet::new(pos, neg, states).unwrap()
}

/// Best accuracy over all hypotheses of at most `max_clauses` clauses.
fn oracle_best(clauses: &[ClauseBody], ex: &ExampleSet, max_clauses: usize) -> f64 {
    fn walk(
        clauses: &[ClauseBody],
        from: usize,
        chosen: &mut Vec<ClauseBody>,
        left: usize,
        ex: &ExampleSet,
        best: &mut f64,
    ) {
        if !chosen.is_empty() {
            let h = Hypothesis {
                head: PredicateSymbol::new("h").unwrap(),
                clauses: chosen.clone(),
            };
            *best = best.max(coverage(&h, ex).unwrap().accuracy);
        }
        if left == 0 {
            return;
        }
        for i in from..clauses.len() {
            chosen.push(clauses[i].clone());
            walk(clauses, i + 1, chosen, left - 1, ex, best);
            chosen.pop();
        }
    }
    let mut best = 0.0;
    walk(clauses, 0, &mut Vec::new(), max_clauses, ex, &mut best);
    best
}

fn random_clause(n: usize, max_lits: usize) -> impl Strategy<Value = ClauseBody> {
    (
        proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=max_lits.min(n)),
        any::<u8>(),
    )
        .prop_map(move |(idx, signs)| {
            let ps = preds(n);
            let lits = idx
                .iter()
                .enumerate()
                .map(|(k, &i)| {
                    if signs >> k & 1 == 1 {
                        Literal::neg(ps[i].clone())
                    } else {
                        Literal::pos(ps[i].clone())
                    }
                })
                .collect();
            ClauseBody::new(lits).unwrap()
        })
}

fn realizable_task() -> impl Strategy<Value = (usize, usize, usize, Vec<ClauseBody>)> {
    (2usize..=5, 1usize..=3, 1usize..=2).prop_flat_map(|(n, lits, clauses)| {
        (
            Just(n),
            Just(lits),
            Just(clauses),
            proptest::collection::vec(random_clause(n, lits), 1..=clauses),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finds_a_perfect_hypothesis_whenever_one_exists((n, lits, clauses, target) in realizable_task()) {
        let ex = examples(n, |f| target.iter().any(|c| eval_clause(c, f)));
        prop_assume!(!ex.pos().is_empty());
        let cfg = SearchConfig { max_literals: lits, max_clauses: clauses, ..SearchConfig::default() };
        let r = induce(&bias(n), &ex, &cfg).unwrap();
        let oracle = oracle_best(&enumerate_clauses(&bias(n), &cfg).unwrap(), &ex, clauses);
        prop_assert_eq!(oracle, 1.0);
        prop_assert_eq!(r.coverage.accuracy, oracle);
        prop_assert!(r.complete);
        prop_assert!(r.hypothesis.clauses.len() <= clauses);
        prop_assert!(r.hypothesis.clauses.iter().all(|c| c.len() <= lits));
    }

    #[test]
    fn reported_coverage_is_reproducible((n, lits, clauses, target) in realizable_task(), flip in any::<u64>()) {
        // labels perturbed so the task is usually not realizable
        let ex = examples(n, |f| {
            let id = preds(n).iter().enumerate().filter(|(_, p)| f.contains(p)).fold(0u64, |m, (i, _)| m | 1 << i);
            target.iter().any(|c| eval_clause(c, f)) ^ (flip >> (id % 64) & 1 == 1 && id % 3 == 0)
        });
        prop_assume!(!ex.pos().is_empty());
        let cfg = SearchConfig { max_literals: lits, max_clauses: clauses, ..SearchConfig::default() };
        let r = induce(&bias(n), &ex, &cfg).unwrap();
        prop_assert_eq!(coverage(&r.hypothesis, &ex).unwrap(), r.coverage);
        if r.complete {
            prop_assert_eq!(r.coverage.accuracy, 1.0);
        }
    }

    #[test]
    fn serial_and_parallel_agree((n, lits, clauses, target) in realizable_task()) {
        let ex = examples(n, |f| target.iter().any(|c| eval_clause(c, f)));
        prop_assume!(!ex.pos().is_empty());
        let mut cfg = SearchConfig { max_literals: lits, max_clauses: clauses, ..SearchConfig::default() };
        let a = induce(&bias(n), &ex, &cfg).unwrap();
        cfg.parallel = false;
        let b = induce(&bias(n), &ex, &cfg).unwrap();
        let c = induce(&bias(n), &ex, &cfg).unwrap();
        prop_assert_eq!(&a.hypothesis, &b.hypothesis);
        prop_assert_eq!(&b.hypothesis, &c.hypothesis);
        prop_assert_eq!((a.candidates_tested, a.pruned), (b.candidates_tested, b.pruned));
    }

    /// A clause that covers a negative example keeps covering it after any
    /// literals are dropped, so pruning its generalizations loses nothing.
    #[test]
    fn generalizations_of_inconsistent_clauses_cover_the_same_negative(
        clause in random_clause(6, 4),
        neg in 0u64..64,
        keep in any::<u8>(),
    ) {
        let (_, facts) = all_states(6).into_iter().nth(neg as usize).unwrap();
        prop_assume!(eval_clause(&clause, &facts));
        let lits: Vec<Literal> = clause
            .literals()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep >> i & 1 == 1)
            .map(|(_, l)| l.clone())
            .collect();
        prop_assume!(!lits.is_empty());
        let general = ClauseBody::new(lits).unwrap();
        prop_assert!(eval_clause(&general, &facts));
    }
}

#[test]
fn single_predicate_target() {
    let ex = examples(2, |f| f.contains_name("p0"));
    let r = induce(&bias(2), &ex, &SearchConfig::new(2, 2).unwrap()).unwrap();
    assert_eq!(r.hypothesis.render(), "h:- p0.");
    assert_eq!(r.coverage.accuracy, 1.0);
}

#[test]
fn no_positives_is_an_error() {
    let ex = examples(2, |_| false);
    assert!(matches!(
        induce(&bias(2), &ex, &SearchConfig::default()),
        Err(IlpError::NoPositives)
    ));
}

#[test]
fn conflicting_duplicates_are_rejected() {
    let f = FactSet::from_names(["p0"]);
    let ex = ExampleSet::new([1].into(), [2].into(), [(1, f.clone()), (2, f)].into()).unwrap();
    assert!(matches!(
        induce(&bias(2), &ex, &SearchConfig::default()),
        Err(IlpError::InconsistentExamples { pos: 1, neg: 2 })
    ));
}

#[test]
fn unreachable_target_is_flagged_incomplete() {
    // parity needs four two-literal clauses
    let ex = examples(2, |f| f.contains_name("p0") != f.contains_name("p1"));
    let r = induce(&bias(2), &ex, &SearchConfig::new(1, 2).unwrap()).unwrap();
    assert!(!r.complete);
    assert!(r.coverage.accuracy < 1.0);
}

#[test]
fn tiny_budget_reports_partial_result() {
    let ex = examples(5, |f| {
        f.contains_name("p0") && f.contains_name("p3") && !f.contains_name("p4")
    });
    let cfg = SearchConfig {
        max_literals: 3,
        time_budget: std::time::Duration::from_nanos(1),
        ..SearchConfig::default()
    };
    match induce(&bias(5), &ex, &cfg) {
        Err(IlpError::BudgetExhausted(partial)) => {
            assert!(!partial.complete || partial.coverage.accuracy == 1.0)
        }
        other => panic!("expected budget exhaustion, got {other:?}"),
    }
}
