//! LTL syntax tree and an ASCII parser.
//!
//! Grammar, loosest binding first: `->` (right associative), `|`, `&`,
//! `U` (right associative), then the prefix operators `!`, `X`, `G`, `F`.
//! Atoms are `true`, `false`, declared propositions and parenthesized formulas.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ltl {
    True,
    False,
    Ap(String),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Implies(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Globally(Box<Ltl>),
    Finally(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
}

/// A parsed formula together with the proposition set it was checked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtlFormula {
    pub ap: Vec<String>,
    pub root: Ltl,
}

impl Ltl {
    pub fn ap(name: &str) -> Ltl {
        Ltl::Ap(name.to_string())
    }

    pub fn not(self) -> Ltl {
        Ltl::Not(Box::new(self))
    }

    pub fn and(self, rhs: Ltl) -> Ltl {
        Ltl::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Ltl) -> Ltl {
        Ltl::Or(Box::new(self), Box::new(rhs))
    }

    pub fn implies(self, rhs: Ltl) -> Ltl {
        Ltl::Implies(Box::new(self), Box::new(rhs))
    }

    pub fn next(self) -> Ltl {
        Ltl::Next(Box::new(self))
    }

    pub fn globally(self) -> Ltl {
        Ltl::Globally(Box::new(self))
    }

    pub fn finally(self) -> Ltl {
        Ltl::Finally(Box::new(self))
    }

    pub fn until(self, rhs: Ltl) -> Ltl {
        Ltl::Until(Box::new(self), Box::new(rhs))
    }

    /// True iff the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            Ltl::True | Ltl::False | Ltl::Ap(_) => true,
            Ltl::Not(a) => a.is_propositional(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) => {
                a.is_propositional() && b.is_propositional()
            }
            Ltl::Next(_) | Ltl::Globally(_) | Ltl::Finally(_) | Ltl::Until(..) => false,
        }
    }

    /// Evaluates a propositional formula on one letter.
    ///
    /// Temporal operators are treated as false; call only when
    /// [`Ltl::is_propositional`] holds.
    pub fn holds(&self, letter: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Ltl::True => true,
            Ltl::False => false,
            Ltl::Ap(p) => letter(p),
            Ltl::Not(a) => !a.holds(letter),
            Ltl::And(a, b) => a.holds(letter) && b.holds(letter),
            Ltl::Or(a, b) => a.holds(letter) || b.holds(letter),
            Ltl::Implies(a, b) => !a.holds(letter) || b.holds(letter),
            _ => false,
        }
    }

    fn collect_aps(&self, out: &mut BTreeSet<String>) {
        match self {
            Ltl::True | Ltl::False => {}
            Ltl::Ap(p) => {
                out.insert(p.clone());
            }
            Ltl::Not(a) | Ltl::Next(a) | Ltl::Globally(a) | Ltl::Finally(a) => a.collect_aps(out),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) | Ltl::Until(a, b) => {
                a.collect_aps(out);
                b.collect_aps(out);
            }
        }
    }

    /// Propositions referenced by the formula.
    pub fn propositions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_aps(&mut out);
        out
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltl::True => write!(f, "true"),
            Ltl::False => write!(f, "false"),
            Ltl::Ap(p) => write!(f, "{p}"),
            Ltl::Not(a) => write!(f, "!{a}"),
            Ltl::And(a, b) => write!(f, "({a} & {b})"),
            Ltl::Or(a, b) => write!(f, "({a} | {b})"),
            Ltl::Implies(a, b) => write!(f, "({a} -> {b})"),
            Ltl::Next(a) => write!(f, "X {a}"),
            Ltl::Globally(a) => write!(f, "G {a}"),
            Ltl::Finally(a) => write!(f, "F {a}"),
            Ltl::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'!' => Tok::Not,
            b'&' => Tok::And,
            b'|' => Tok::Or,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Implies
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..=i].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Ltl { offset: i, msg: format!("unknown operator '{ch}'") });
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    ap: &'a BTreeSet<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == word)
    }

    fn implication(&mut self) -> Result<Ltl> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            return Ok(lhs.implies(self.implication()?));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Ltl> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = lhs.or(self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ltl> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = lhs.and(self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ltl> {
        let lhs = self.unary()?;
        if self.is_keyword("U") && !self.ap.contains("U") {
            self.pos += 1;
            return Ok(lhs.until(self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ltl> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(self.unary()?.not())
            }
            Some(Tok::Ident(w)) if !self.ap.contains(&w) && is_prefix_chain(&w) => {
                self.pos += 1;
                let mut inner = self.unary()?;
                for op in w.chars().rev() {
                    inner = match op {
                        'X' => inner.next(),
                        'G' => inner.globally(),
                        _ => inner.finally(),
                    };
                }
                Ok(inner)
            }
            Some(Tok::Ident(w)) => {
                self.pos += 1;
                match w.as_str() {
                    "true" => Ok(Ltl::True),
                    "false" => Ok(Ltl::False),
                    _ if self.ap.contains(&w) => Ok(Ltl::Ap(w)),
                    _ => Err(Error::Ltl { offset, msg: format!("unknown proposition '{w}'") }),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.implication()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(Error::Ltl { offset, msg: "unbalanced parentheses: '(' is never closed".into() });
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::RParen) => {
                Err(Error::Ltl { offset, msg: "unbalanced parentheses: unexpected ')'".into() })
            }
            Some(tok) => Err(Error::Ltl { offset, msg: format!("unexpected {tok:?}") }),
            None => Err(Error::Ltl { offset, msg: "unexpected end of formula".into() }),
        }
    }
}

/// `X`, `G`, `F` and run-together chains such as `GF`.
fn is_prefix_chain(word: &str) -> bool {
    word.chars().all(|c| matches!(c, 'X' | 'G' | 'F'))
}

/// Parses `text` over the proposition set `ap`.
pub fn parse_ltl(text: &str, ap: &BTreeSet<String>) -> Result<LtlFormula> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0, end: text.len(), ap };
    let root = p.implication()?;
    if p.pos < p.toks.len() {
        let offset = p.offset();
        let msg = match p.peek() {
            Some(Tok::RParen) => "unbalanced parentheses: unexpected ')'".to_string(),
            Some(tok) => format!("unexpected {tok:?}"),
            None => unreachable!(),
        };
        return Err(Error::Ltl { offset, msg });
    }
    Ok(LtlFormula { ap: ap.iter().cloned().collect(), root })
}
