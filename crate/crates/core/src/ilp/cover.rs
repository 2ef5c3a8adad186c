//! Choosing which accepted clauses form the disjunction.
//!
//! Preference: fewest clauses, then fewest literals, then the smallest
//! rendered body. Small candidate pools are solved exactly; large ones
//! greedily with a redundancy pass.

use crate::logic::ClauseBody;

#[derive(Debug, Clone)]
pub(super) struct Candidate {
    /// Acceptance order, which is also enumeration order.
    pub index: usize,
    pub clause: ClauseBody,
    /// Covered positives.
    pub cover: Vec<u64>,
}

pub(super) struct Chosen {
    pub clauses: Vec<ClauseBody>,
    /// Whether the chosen clauses cover the whole target.
    pub complete: bool,
}

const EXACT_LIMIT: usize = 64;
const DOMINANCE_LIMIT: usize = 5000;

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn count(a: &[u64]) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

fn minus(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & !y).collect()
}

/// Drops clauses whose coverage another clause matches with fewer
/// literals, or strictly exceeds with no more literals.
fn undominated(cands: &[Candidate]) -> Vec<&Candidate> {
    if cands.len() > DOMINANCE_LIMIT {
        return cands.iter().collect();
    }
    cands
        .iter()
        .filter(|a| {
            !cands.iter().any(|b| {
                b.index != a.index
                    && subset(&a.cover, &b.cover)
                    && (b.clause.len() < a.clause.len()
                        || (a.cover != b.cover && b.clause.len() <= a.clause.len()))
            })
        })
        .collect()
}

fn key(set: &[&Candidate]) -> (usize, String) {
    let mut sorted: Vec<&&Candidate> = set.iter().collect();
    sorted.sort_by_key(|c| c.index);
    let lits = sorted.iter().map(|c| c.clause.len()).sum();
    let text = sorted
        .iter()
        .map(|c| c.clause.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    (lits, text)
}

fn exact<'a>(
    pool: &[&'a Candidate],
    target: &[u64],
    max_clauses: usize,
) -> Option<Vec<&'a Candidate>> {
    fn dfs<'a>(
        pool: &[&'a Candidate],
        uncovered: &[u64],
        depth: usize,
        chosen: &mut Vec<&'a Candidate>,
        best: &mut Option<(usize, String, Vec<&'a Candidate>)>,
    ) {
        let Some(word) = uncovered.iter().position(|w| *w != 0) else {
            let (l, t) = key(chosen);
            if best.as_ref().is_none_or(|(bl, bt, _)| (l, &t) < (*bl, bt)) {
                *best = Some((l, t, chosen.clone()));
            }
            return;
        };
        if depth == 0 {
            return;
        }
        let bit = uncovered[word].trailing_zeros();
        for c in pool {
            if c.cover[word] >> bit & 1 == 1 && !chosen.iter().any(|x| x.index == c.index) {
                chosen.push(c);
                dfs(pool, &minus(uncovered, &c.cover), depth - 1, chosen, best);
                chosen.pop();
            }
        }
    }
    for k in 1..=max_clauses {
        let mut best = None;
        dfs(pool, target, k, &mut Vec::new(), &mut best);
        if let Some((_, _, set)) = best {
            return Some(set);
        }
    }
    None
}

fn greedy<'a>(pool: &[&'a Candidate], target: &[u64]) -> Vec<&'a Candidate> {
    let mut uncovered = target.to_vec();
    let mut picked: Vec<&Candidate> = Vec::new();
    while count(&uncovered) > 0 {
        let best = pool
            .iter()
            .filter(|c| !picked.iter().any(|p| p.index == c.index))
            .map(|c| {
                let gain: usize = c
                    .cover
                    .iter()
                    .zip(&uncovered)
                    .map(|(a, b)| (a & b).count_ones() as usize)
                    .sum();
                (c, gain)
            })
            .filter(|(_, g)| *g > 0)
            .min_by(|(a, ga), (b, gb)| {
                gb.cmp(ga)
                    .then(a.clause.len().cmp(&b.clause.len()))
                    .then_with(|| a.clause.to_string().cmp(&b.clause.to_string()))
            });
        let Some((c, _)) = best else { break };
        uncovered = minus(&uncovered, &c.cover);
        picked.push(c);
    }
    // reverse delete
    let mut i = picked.len();
    while i > 0 {
        i -= 1;
        let rest: Vec<u64> = picked
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .fold(vec![0; target.len()], |acc, (_, c)| {
                acc.iter().zip(&c.cover).map(|(a, b)| a | b).collect()
            });
        if subset(target, &rest) {
            picked.remove(i);
        }
    }
    picked
}

pub(super) fn select_cover(cands: &[Candidate], target: &[u64], max_clauses: usize) -> Chosen {
    if cands.is_empty() {
        return Chosen {
            clauses: Vec::new(),
            complete: count(target) == 0,
        };
    }
    let pool = undominated(cands);
    let mut set = if pool.len() <= EXACT_LIMIT {
        exact(&pool, target, max_clauses)
    } else {
        None
    };
    let mut complete = true;
    if set.is_none() {
        let mut g = greedy(&pool, target);
        if g.len() > max_clauses {
            g.truncate(max_clauses);
            complete = false;
        }
        set = Some(g);
    }
    let mut set = set.unwrap_or_default();
    set.sort_by_key(|c| c.index);
    let union = set.iter().fold(vec![0; target.len()], |acc, c| {
        acc.iter()
            .zip(&c.cover)
            .map(|(a, b)| a | b)
            .collect::<Vec<u64>>()
    });
    Chosen {
        complete: complete && subset(target, &union),
        clauses: set.into_iter().map(|c| c.clause.clone()).collect(),
    }
}
