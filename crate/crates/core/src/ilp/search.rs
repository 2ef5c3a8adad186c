use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rayon::prelude::*;

use super::cover::{select_cover, Candidate};
use super::{coverage, CoverageReport, Hypothesis, IlpError, InductionResult, SearchConfig};
use crate::knowledge::{BiasSpec, ExampleSet};
use crate::logic::{ClauseBody, FactSet, Literal};

/// A literal is `2 * predicate index + negated`; a clause is its sorted codes.
pub(super) type Code = u8;

fn mask(codes: &[Code]) -> u128 {
    codes.iter().fold(0u128, |m, &c| m | (1u128 << c))
}

fn max_pred(codes: &[Code]) -> usize {
    codes.last().map_or(0, |&c| c as usize / 2)
}

pub(super) fn to_clause(bias: &BiasSpec, codes: &[Code]) -> ClauseBody {
    let lits = codes
        .iter()
        .map(|&c| {
            let p = bias.body_preds()[c as usize / 2].clone();
            if c % 2 == 1 {
                Literal::neg(p)
            } else {
                Literal::pos(p)
            }
        })
        .collect();
    ClauseBody::new(lits).expect("generated clauses are well formed")
}

fn literal_codes(
    n_preds: usize,
    negation: bool,
    after: Option<usize>,
) -> impl Iterator<Item = Code> {
    let start = after.map_or(0, |p| p + 1);
    (start..n_preds).flat_map(move |p| {
        let pos = (2 * p) as Code;
        if negation {
            vec![pos, pos + 1]
        } else {
            vec![pos]
        }
    })
}

/// Next level by appending a literal on a later predicate, which keeps the
/// output in lexicographic code order when `parents` is.
fn extend<'a>(
    parents: impl Iterator<Item = &'a Vec<Code>> + 'a,
    n_preds: usize,
    negation: bool,
) -> impl Iterator<Item = Vec<Code>> + 'a {
    parents.flat_map(move |p| {
        literal_codes(n_preds, negation, Some(max_pred(p))).map(move |c| {
            let mut next = p.clone();
            next.push(c);
            next
        })
    })
}

/// Every clause of the hypothesis space, size first, then lexicographic by
/// (predicate index, positive before negated).
pub fn enumerate_clauses(bias: &BiasSpec, cfg: &SearchConfig) -> Result<Vec<ClauseBody>, IlpError> {
    cfg.validate()?;
    let n = bias.n_bp();
    if n > 64 {
        return Err(IlpError::TooManyPredicates(n));
    }
    let mut out = Vec::new();
    let mut level: Vec<Vec<Code>> = literal_codes(n, cfg.allow_negation, None)
        .map(|c| vec![c])
        .collect();
    for size in 1..=cfg.max_literals.min(n) {
        if size > 1 {
            level = extend(level.iter(), n, cfg.allow_negation).collect();
        }
        out.extend(level.iter().map(|c| to_clause(bias, c)));
    }
    Ok(out)
}

/// Per-literal example bitsets.
struct Table {
    pos_words: usize,
    neg_words: usize,
    n_pos: usize,
    pos: Vec<Vec<u64>>,
    neg: Vec<Vec<u64>>,
}

fn bitset(ids: impl Iterator<Item = bool>, words: usize) -> Vec<u64> {
    let mut v = vec![0u64; words];
    for (i, b) in ids.enumerate() {
        if b {
            v[i / 64] |= 1 << (i % 64);
        }
    }
    v
}

impl Table {
    fn new(bias: &BiasSpec, ex: &ExampleSet) -> Self {
        let pos_facts: Vec<&FactSet> = ex.pos().iter().map(|id| &ex.states()[id]).collect();
        let neg_facts: Vec<&FactSet> = ex.neg().iter().map(|id| &ex.states()[id]).collect();
        let pos_words = pos_facts.len().div_ceil(64);
        let neg_words = neg_facts.len().div_ceil(64);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for p in bias.body_preds() {
            for negated in [false, true] {
                pos.push(bitset(
                    pos_facts.iter().map(|f| f.contains(p) != negated),
                    pos_words,
                ));
                neg.push(bitset(
                    neg_facts.iter().map(|f| f.contains(p) != negated),
                    neg_words,
                ));
            }
        }
        Self {
            pos_words,
            neg_words,
            n_pos: pos_facts.len(),
            pos,
            neg,
        }
    }

    fn and(rows: &[Vec<u64>], codes: &[Code], words: usize) -> Vec<u64> {
        let mut acc = rows[codes[0] as usize].clone();
        for &c in &codes[1..] {
            for (a, b) in acc.iter_mut().zip(&rows[c as usize]) {
                *a &= b;
            }
        }
        debug_assert_eq!(acc.len(), words);
        acc
    }

    /// (positives covered, negatives covered, positive bitset when consistent).
    fn test(&self, codes: &[Code]) -> Outcome {
        let pos = Self::and(&self.pos, codes, self.pos_words);
        let neg = Self::and(&self.neg, codes, self.neg_words);
        let p = pos.iter().map(|w| w.count_ones() as usize).sum();
        let n = neg.iter().map(|w| w.count_ones() as usize).sum();
        Outcome {
            pos: p,
            neg: n,
            cover: (p > 0 && n == 0).then_some(pos),
        }
    }
}

struct Outcome {
    pos: usize,
    neg: usize,
    cover: Option<Vec<u64>>,
}

fn check_examples(ex: &ExampleSet) -> Result<(), IlpError> {
    if ex.pos().is_empty() {
        return Err(IlpError::NoPositives);
    }
    let by_facts: HashMap<&FactSet, u64> =
        ex.pos().iter().map(|id| (&ex.states()[id], *id)).collect();
    for id in ex.neg() {
        if let Some(&p) = by_facts.get(&ex.states()[id]) {
            return Err(IlpError::InconsistentExamples { pos: p, neg: *id });
        }
    }
    Ok(())
}

/// Progress shared by the normal and budget-exhausted exits.
struct State {
    consistent: Vec<Candidate>,
    signatures: HashSet<Vec<u64>>,
    union: Vec<u64>,
    best_single: Option<(f64, Vec<Code>)>,
    tested: u64,
    pruned: u64,
}

impl State {
    fn covers_all(&self, t: &Table) -> bool {
        self.union
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum::<usize>()
            == t.n_pos
    }
}

const CHUNK: usize = 4096;

/// Generate, test, constrain; then cover the positives with the accepted
/// clauses.
pub fn induce(
    bias: &BiasSpec,
    ex: &ExampleSet,
    cfg: &SearchConfig,
) -> Result<InductionResult, IlpError> {
    let start = Instant::now();
    cfg.validate()?;
    check_examples(ex)?;
    let n = bias.n_bp();
    if n > 64 {
        return Err(IlpError::TooManyPredicates(n));
    }
    let negation = cfg.allow_negation && bias.allow_negation();
    let table = Table::new(bias, ex);
    let mut st = State {
        consistent: Vec::new(),
        signatures: HashSet::new(),
        union: vec![0; table.pos_words],
        best_single: None,
        tested: 0,
        pruned: 0,
    };
    let branching =
        |codes: &[Code]| literal_codes(n, negation, Some(max_pred(codes))).count() as u64;

    let mut level: Vec<Vec<Code>> = literal_codes(n, negation, None).map(|c| vec![c]).collect();
    let mut out_of_time = false;
    let deepest = cfg.max_literals.min(n);
    'levels: for size in 1..=deepest {
        let extensible = size < deepest;
        let mut survivors: Vec<Vec<Code>> = Vec::new();
        for chunk in level.chunks(CHUNK) {
            // checked before each chunk except the very first, so a partial
            // result always exists
            if st.tested > 0 && start.elapsed() > cfg.time_budget {
                out_of_time = true;
                break 'levels;
            }
            let outcomes: Vec<Outcome> = if cfg.parallel {
                chunk.par_iter().map(|c| table.test(c)).collect()
            } else {
                chunk.iter().map(|c| table.test(c)).collect()
            };
            for (codes, o) in chunk.iter().zip(outcomes) {
                st.tested += 1;
                let precision = if o.pos + o.neg == 0 {
                    0.0
                } else {
                    o.pos as f64 / (o.pos + o.neg) as f64
                };
                let acc = (precision + o.pos as f64 / table.n_pos as f64) / 2.0;
                if st.best_single.as_ref().is_none_or(|(a, _)| acc > *a) {
                    st.best_single = Some((acc, codes.clone()));
                }
                if o.pos == 0 {
                    // useless: every specialization is useless too
                    if extensible {
                        st.pruned += branching(codes);
                    }
                } else if let Some(cover) = o.cover {
                    // consistent: specializations are subsumed
                    if extensible {
                        st.pruned += branching(codes);
                    }
                    if st.signatures.insert(cover.clone()) {
                        for (u, w) in st.union.iter_mut().zip(&cover) {
                            *u |= w;
                        }
                        st.consistent.push(Candidate {
                            index: st.consistent.len(),
                            clause: to_clause(bias, codes),
                            cover,
                        });
                    }
                } else {
                    survivors.push(codes.clone());
                }
            }
        }
        if st.covers_all(&table) || !extensible {
            break;
        }
        let open: HashSet<u128> = survivors.iter().map(|c| mask(c)).collect();
        let mut next = Vec::new();
        for cand in extend(survivors.iter(), n, negation) {
            let m = mask(&cand);
            // every immediate generalization must itself be open
            if cand.iter().all(|&c| open.contains(&(m & !(1u128 << c)))) {
                next.push(cand);
            } else {
                st.pruned += 1;
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }

    let result = finish(bias, ex, cfg, &table, st, start)?;
    if out_of_time {
        return Err(IlpError::BudgetExhausted(Box::new(result)));
    }
    Ok(result)
}

fn finish(
    bias: &BiasSpec,
    ex: &ExampleSet,
    cfg: &SearchConfig,
    table: &Table,
    st: State,
    start: Instant,
) -> Result<InductionResult, IlpError> {
    let head = bias.head().clone();
    let covers_all = st.covers_all(table);
    let chosen = select_cover(&st.consistent, &st.union, cfg.max_clauses);
    let mut complete = covers_all && chosen.complete;
    let mut hypothesis = Hypothesis {
        head: head.clone(),
        clauses: chosen.clauses,
    };
    let mut report: Option<CoverageReport> = None;
    if !hypothesis.clauses.is_empty() {
        report = Some(coverage(&hypothesis, ex)?);
    }
    if !complete {
        if let Some((_, codes)) = &st.best_single {
            let single = Hypothesis {
                head,
                clauses: vec![to_clause(bias, codes)],
            };
            let r = coverage(&single, ex)?;
            if report.is_none_or(|cur| r.accuracy > cur.accuracy) {
                hypothesis = single;
                report = Some(r);
                complete = false;
            }
        }
    }
    let coverage = report.expect("at least one clause was tested");
    debug_assert!(!complete || (coverage.fn_ == 0 && coverage.fp == 0));
    Ok(InductionResult {
        hypothesis,
        coverage,
        elapsed: start.elapsed(),
        candidates_tested: st.tested,
        pruned: st.pruned,
        complete,
    })
}
