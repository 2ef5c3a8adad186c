//! Recursive-descent parser for the rule dialect.
//!
//! ```text
//! rule    := ident ":-" body "."
//! body    := clause (";" clause)*
//! clause  := literal ("," literal)*
//! literal := "not" "(" ident ")" | ident
//! ident   := [a-z][A-Za-z0-9_]*
//! ```
//!
//! Whitespace is insignificant and `%` starts a comment running to end of line.

use super::{ClauseBody, Literal, LogicError, PredicateSymbol, Rule, RuleSet};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Neck,
    Comma,
    Semi,
    Dot,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Neck => "`:-`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> LogicError {
        syntax_error(self.src, offset, message)
    }

    fn skip_trivia(&mut self) {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'%' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    /// Next token with its starting byte offset, or `None` at end of input.
    fn next(&mut self) -> Result<Option<(usize, Tok)>, LogicError> {
        self.skip_trivia();
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok(None);
        };
        let tok = match b {
            b',' => Tok::Comma,
            b';' => Tok::Semi,
            b'.' => Tok::Dot,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b':' => {
                if bytes.get(start + 1) == Some(&b'-') {
                    self.pos += 2;
                    return Ok(Some((start, Tok::Neck)));
                }
                return Err(self.error(start, "expected `:-`"));
            }
            b'a'..=b'z' => {
                let mut end = start + 1;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                return Ok(Some((start, Tok::Ident(self.src[start..end].to_string()))));
            }
            _ => {
                let c = self.src[start..].chars().next().unwrap_or('?');
                return Err(self.error(start, format!("unexpected character {c:?}")));
            }
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }
}

fn syntax_error(src: &str, offset: usize, message: impl Into<String>) -> LogicError {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    LogicError::Syntax {
        offset,
        line,
        column,
        message: message.into(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(usize, Tok)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            lexer: Lexer::new(src),
            peeked: None,
        }
    }

    fn peek(&mut self) -> Result<Option<&(usize, Tok)>, LogicError> {
        if self.peeked.is_none() {
            self.peeked = self.lexer.next()?;
        }
        Ok(self.peeked.as_ref())
    }

    fn bump(&mut self) -> Result<Option<(usize, Tok)>, LogicError> {
        self.peek()?;
        Ok(self.peeked.take())
    }

    fn end_offset(&self) -> usize {
        self.lexer.src.len()
    }

    fn expect(&mut self, want: Tok) -> Result<usize, LogicError> {
        match self.bump()? {
            Some((at, t)) if t == want => Ok(at),
            Some((at, t)) => Err(self.lexer.error(
                at,
                format!("expected {}, found {}", want.describe(), t.describe()),
            )),
            None => Err(self.lexer.error(
                self.end_offset(),
                format!("expected {}, found end of input", want.describe()),
            )),
        }
    }

    fn ident(&mut self) -> Result<(usize, PredicateSymbol), LogicError> {
        match self.bump()? {
            Some((at, Tok::Ident(name))) => Ok((at, PredicateSymbol(name))),
            Some((at, t)) => Err(self
                .lexer
                .error(at, format!("expected identifier, found {}", t.describe()))),
            None => Err(self
                .lexer
                .error(self.end_offset(), "expected identifier, found end of input")),
        }
    }

    fn literal(&mut self) -> Result<Literal, LogicError> {
        let (_, name) = self.ident()?;
        if name.as_str() == "not" {
            if let Some((_, Tok::LParen)) = self.peek()? {
                self.bump()?;
                let (_, inner) = self.ident()?;
                self.expect(Tok::RParen)?;
                return Ok(Literal::neg(inner));
            }
        }
        Ok(Literal::pos(name))
    }

    fn clause(&mut self) -> Result<ClauseBody, LogicError> {
        let end = self.end_offset();
        let start = self.peek()?.map_or(end, |(at, _)| *at);
        let mut lits = vec![self.literal()?];
        while let Some((_, Tok::Comma)) = self.peek()? {
            self.bump()?;
            lits.push(self.literal()?);
        }
        ClauseBody::new(lits).map_err(|e| match e {
            LogicError::DuplicateLiteral(l) => self
                .lexer
                .error(start, format!("clause repeats literal {l}")),
            other => other,
        })
    }

    fn rule(&mut self) -> Result<Rule, LogicError> {
        let (_, head) = self.ident()?;
        self.expect(Tok::Neck)?;
        if let Some((at, Tok::Dot)) = self.peek()? {
            let at = *at;
            return Err(self.lexer.error(at, "empty body"));
        }
        let mut clauses = vec![self.clause()?];
        while let Some((_, Tok::Semi)) = self.peek()? {
            self.bump()?;
            clauses.push(self.clause()?);
        }
        self.expect(Tok::Dot)?;
        Rule::new(head, clauses)
    }
}

/// Parses exactly one rule. Trailing whitespace and comments are allowed.
pub fn parse_rule(text: &str) -> Result<Rule, LogicError> {
    let mut parser = Parser::new(text);
    let rule = parser.rule()?;
    if let Some((at, t)) = parser.bump()? {
        return Err(parser
            .lexer
            .error(at, format!("unexpected {} after rule", t.describe())));
    }
    Ok(rule)
}

/// Parses a file of rules, one rule per head.
pub fn parse_rule_set(text: &str) -> Result<RuleSet, LogicError> {
    let mut parser = Parser::new(text);
    let mut set = RuleSet::new();
    while parser.peek()?.is_some() {
        set.insert(parser.rule()?)?;
    }
    Ok(set)
}
