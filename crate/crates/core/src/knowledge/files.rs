//! On-disk task layout: `bias.pl`, `exs.pl` and `bk.pl` in one directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{BiasSpec, ExampleSet, KnowledgeError};
use crate::domain::is_context_predicate;
use crate::fsutil::write_atomic;
use crate::logic::{FactSet, PredicateSymbol};

pub const BIAS_FILE: &str = "bias.pl";
pub const EXAMPLES_FILE: &str = "exs.pl";
pub const FACTS_FILE: &str = "bk.pl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskManifest {
    pub bias: PathBuf,
    pub examples: PathBuf,
    pub facts: PathBuf,
    pub positives: usize,
    pub negatives: usize,
    pub fact_lines: usize,
}

fn render_bias(bias: &BiasSpec) -> String {
    let mut s = format!("head_pred({}).\n", bias.head());
    for p in bias.body_preds() {
        let _ = writeln!(s, "body_pred({p}).");
    }
    let _ = writeln!(s, "allow_negation({}).", bias.allow_negation());
    s
}

fn render_examples(ex: &ExampleSet) -> String {
    let mut s = String::new();
    for id in ex.pos() {
        let _ = writeln!(s, "pos({id}).");
    }
    for id in ex.neg() {
        let _ = writeln!(s, "neg({id}).");
    }
    s
}

/// Facts ordered by id, then by the bias order with context predicates last.
fn render_facts(bias: &BiasSpec, ex: &ExampleSet) -> Result<(String, usize), KnowledgeError> {
    let rank: BTreeMap<&PredicateSymbol, usize> = bias
        .body_preds()
        .iter()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let mut s = String::new();
    let mut lines = 0;
    for (id, facts) in ex.states() {
        let mut ordered: Vec<(usize, &PredicateSymbol)> = Vec::with_capacity(facts.len());
        for p in facts.iter() {
            match rank.get(p) {
                Some(&r) => ordered.push((r, p)),
                None if is_context_predicate(p) => ordered.push((usize::MAX, p)),
                None => return Err(KnowledgeError::UnknownPredicate(p.to_string())),
            }
        }
        ordered.sort();
        for (_, p) in ordered {
            let _ = writeln!(s, "holds({id}, {p}).");
            lines += 1;
        }
    }
    Ok((s, lines))
}

pub fn write_task_files(
    bias: &BiasSpec,
    ex: &ExampleSet,
    dir: &Path,
) -> Result<TaskManifest, KnowledgeError> {
    let (facts, fact_lines) = render_facts(bias, ex)?;
    let manifest = TaskManifest {
        bias: dir.join(BIAS_FILE),
        examples: dir.join(EXAMPLES_FILE),
        facts: dir.join(FACTS_FILE),
        positives: ex.pos().len(),
        negatives: ex.neg().len(),
        fact_lines,
    };
    for (path, body) in [
        (&manifest.bias, render_bias(bias)),
        (&manifest.examples, render_examples(ex)),
        (&manifest.facts, facts),
    ] {
        write_atomic(path, body.as_bytes()).map_err(|source| KnowledgeError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(manifest)
}

/// One `name(arg, ...).` term per non-blank line.
struct Line<'a> {
    no: usize,
    functor: &'a str,
    args: Vec<&'a str>,
}

fn read_lines(path: &Path) -> Result<(String, PathBuf), KnowledgeError> {
    let text = std::fs::read_to_string(path).map_err(|source| KnowledgeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((text, path.to_path_buf()))
}

fn parse_terms<'a>(text: &'a str, file: &Path) -> Result<Vec<Line<'a>>, KnowledgeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| KnowledgeError::Syntax {
            file: file.to_path_buf(),
            line: no,
            message: message.to_string(),
        };
        let body = line
            .strip_suffix('.')
            .ok_or_else(|| err("missing terminating `.`"))?;
        let open = body.find('(').ok_or_else(|| err("expected `name(...)`"))?;
        let inner = body[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| err("unbalanced parentheses"))?;
        let functor = body[..open].trim();
        let args: Vec<&str> = inner.split(',').map(str::trim).collect();
        if args.iter().any(|a| a.is_empty()) {
            return Err(err("empty argument"));
        }
        out.push(Line { no, functor, args });
    }
    Ok(out)
}

fn syntax(file: &Path, line: usize, message: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Syntax {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn symbol(file: &Path, line: usize, s: &str) -> Result<PredicateSymbol, KnowledgeError> {
    PredicateSymbol::new(s)
        .map_err(|_| syntax(file, line, format!("{s:?} is not a predicate name")))
}

fn id(file: &Path, line: usize, s: &str) -> Result<u64, KnowledgeError> {
    s.parse()
        .map_err(|_| syntax(file, line, format!("{s:?} is not an example id")))
}

fn parse_bias(text: &str, file: &Path) -> Result<BiasSpec, KnowledgeError> {
    let mut head = None;
    let mut body = Vec::new();
    let mut negation = true;
    for l in parse_terms(text, file)? {
        match (l.functor, l.args.as_slice()) {
            ("head_pred", [name]) => {
                if head.is_some() {
                    return Err(syntax(file, l.no, "second head_pred"));
                }
                head = Some(symbol(file, l.no, name)?);
            }
            ("body_pred", [name]) => body.push(symbol(file, l.no, name)?),
            ("allow_negation", [flag]) => {
                negation = match *flag {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(syntax(
                            file,
                            l.no,
                            format!("expected true or false, found {other}"),
                        ))
                    }
                }
            }
            (f, _) => return Err(syntax(file, l.no, format!("unexpected directive {f}"))),
        }
    }
    let head = head.ok_or_else(|| syntax(file, 1, "no head_pred declared"))?;
    BiasSpec::new(head, body, negation)
}

/// Inverse of [`write_task_files`].
pub fn read_task_files(dir: &Path) -> Result<(BiasSpec, ExampleSet), KnowledgeError> {
    let (bias_text, bias_path) = read_lines(&dir.join(BIAS_FILE))?;
    let (ex_text, ex_path) = read_lines(&dir.join(EXAMPLES_FILE))?;
    let (bk_text, bk_path) = read_lines(&dir.join(FACTS_FILE))?;
    let bias = parse_bias(&bias_text, &bias_path)?;

    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    for l in parse_terms(&ex_text, &ex_path)? {
        let (set, other) = match (l.functor, l.args.len()) {
            ("pos", 1) => (&mut pos, &neg),
            ("neg", 1) => (&mut neg, &pos),
            (f, _) => return Err(syntax(&ex_path, l.no, format!("unexpected term {f}"))),
        };
        let n = id(&ex_path, l.no, l.args[0])?;
        if other.contains(&n) {
            return Err(KnowledgeError::DuplicateLabel(n));
        }
        set.insert(n);
    }

    let mut states: BTreeMap<u64, FactSet> = pos
        .iter()
        .chain(&neg)
        .map(|&i| (i, FactSet::new()))
        .collect();
    for l in parse_terms(&bk_text, &bk_path)? {
        match (l.functor, l.args.as_slice()) {
            ("holds", [n, name]) => {
                let n = id(&bk_path, l.no, n)?;
                let p = symbol(&bk_path, l.no, name)?;
                states.entry(n).or_default().insert(p);
            }
            (f, _) => return Err(syntax(&bk_path, l.no, format!("unexpected term {f}"))),
        }
    }
    Ok((bias, ExampleSet::new(pos, neg, states)?))
}
