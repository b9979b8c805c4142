//! Deterministic Rabin automata over the alphabet of proposition subsets.
//!
//! A letter is a bitmask over [`Dra::ap`]: bit `i` set means `ap[i]` holds.
//!
//! Text format:
//! ```text
//! states 2
//! initial 0
//! ap pi
//! trans 0 {pi} 1
//! trans 0 default 0
//! trans 1 {pi} 1
//! trans 1 empty 0
//! pair L={} K={1}
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use crate::error::{Error, Result};

/// Letter of the automaton alphabet (bitmask over the proposition list).
pub type Symbol = u32;

const MAX_AP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RabinPair {
    pub l: BTreeSet<usize>,
    pub k: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dra {
    pub ap: Vec<String>,
    pub initial: usize,
    /// `delta[q][symbol]`, total over all `2^|ap|` symbols.
    pub delta: Vec<Vec<usize>>,
    pub pairs: Vec<RabinPair>,
}

impl Dra {
    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn num_symbols(&self) -> usize {
        1 << self.ap.len()
    }

    pub fn step(&self, q: usize, symbol: Symbol) -> usize {
        self.delta[q][symbol as usize]
    }

    /// The letter for a set of true propositions; unknown propositions are an error.
    pub fn symbol<S: AsRef<str>>(&self, props: impl IntoIterator<Item = S>) -> Result<Symbol> {
        let mut sym = 0;
        for p in props {
            let p = p.as_ref();
            let i = self
                .ap
                .iter()
                .position(|a| a == p)
                .ok_or_else(|| Error::InvalidAutomaton(format!("proposition '{p}' is outside the automaton alphabet")))?;
            sym |= 1 << i;
        }
        Ok(sym)
    }

    /// The letter read on a state labeled `props`; labels outside the
    /// alphabet are not observed by the automaton.
    pub fn label_symbol<S: AsRef<str>>(&self, props: impl IntoIterator<Item = S>) -> Symbol {
        props
            .into_iter()
            .filter_map(|p| self.ap.iter().position(|a| a == p.as_ref()))
            .fold(0, |sym, i| sym | 1 << i)
    }

    /// Propositions true in `symbol`.
    pub fn letter(&self, symbol: Symbol) -> Vec<&str> {
        (0..self.ap.len()).filter(|i| symbol >> i & 1 == 1).map(|i| self.ap[i].as_str()).collect()
    }

    /// Checks totality, state ranges and non-empty `K` sets.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_states();
        if self.ap.len() > MAX_AP {
            return Err(Error::InvalidAutomaton(format!("at most {MAX_AP} propositions are supported")));
        }
        if self.initial >= n {
            return Err(Error::InvalidAutomaton(format!("initial state {} is undeclared", self.initial)));
        }
        for (q, row) in self.delta.iter().enumerate() {
            if row.len() != self.num_symbols() {
                return Err(Error::InvalidAutomaton(format!("transition function of state {q} is not total")));
            }
            if let Some(t) = row.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidAutomaton(format!("state {q} moves to undeclared state {t}")));
            }
        }
        if self.pairs.is_empty() {
            return Err(Error::InvalidAutomaton("no acceptance pair".into()));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.k.is_empty() {
                return Err(Error::InvalidAutomaton(format!("acceptance pair {i} has an empty K set")));
            }
            if let Some(q) = pair.l.iter().chain(&pair.k).find(|&&q| q >= n) {
                return Err(Error::InvalidAutomaton(format!("acceptance pair {i} names undeclared state {q}")));
            }
        }
        Ok(())
    }

    /// Acceptance of the ultimately periodic word `prefix · cycle^ω`.
    pub fn accepts(&self, prefix: &[Symbol], cycle: &[Symbol]) -> Result<bool> {
        if cycle.is_empty() {
            return Err(Error::Invalid("the cycle of a lasso word must be non-empty".into()));
        }
        if let Some(s) = prefix.iter().chain(cycle).find(|&&s| s as usize >= self.num_symbols()) {
            return Err(Error::InvalidAutomaton(format!("symbol {s} is outside the alphabet")));
        }
        let mut q = prefix.iter().fold(self.initial, |q, &s| self.step(q, s));
        let mut first_seen = HashMap::new();
        let mut run = Vec::new();
        let mut i = 0;
        let loop_start = loop {
            if let Some(&at) = first_seen.get(&(q, i % cycle.len())) {
                break at;
            }
            first_seen.insert((q, i % cycle.len()), run.len());
            run.push(q);
            q = self.step(q, cycle[i % cycle.len()]);
            i += 1;
        };
        let inf: BTreeSet<usize> = run[loop_start..].iter().copied().collect();
        Ok(self.pairs.iter().any(|p| inf.is_disjoint(&p.l) && !inf.is_disjoint(&p.k)))
    }

    /// Serializes to the DRA text format with every transition listed.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states {}", self.num_states());
        let _ = writeln!(out, "initial {}", self.initial);
        let _ = writeln!(out, "ap {}", self.ap.join(" "));
        for (q, row) in self.delta.iter().enumerate() {
            for (sym, &t) in row.iter().enumerate() {
                let letter = self.letter(sym as Symbol);
                if letter.is_empty() {
                    let _ = writeln!(out, "trans {q} empty {t}");
                } else {
                    let _ = writeln!(out, "trans {q} {{{}}} {t}", letter.join(","));
                }
            }
        }
        for pair in &self.pairs {
            let _ = writeln!(out, "pair L={} K={}", set_text(&pair.l), set_text(&pair.k));
        }
        out
    }
}

fn set_text(set: &BTreeSet<usize>) -> String {
    let items: Vec<String> = set.iter().map(|q| q.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn parse_state(line: usize, word: &str, n: usize) -> Result<usize> {
    match word.parse::<usize>() {
        Ok(q) if q < n => Ok(q),
        _ => Err(Error::parse(line, format!("undeclared state '{word}'"))),
    }
}

fn parse_state_set(line: usize, text: &str, n: usize) -> Result<BTreeSet<usize>> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::parse(line, format!("expected a set '{{...}}', found '{text}'")))?;
    inner.split(',').map(str::trim).filter(|w| !w.is_empty()).map(|w| parse_state(line, w, n)).collect()
}

/// Loads and validates a DRA in the text format.
pub fn load_dra(text: &str) -> Result<Dra> {
    let mut n = None;
    let mut initial = None;
    let mut ap: Option<Vec<String>> = None;
    let mut explicit: HashMap<(usize, Symbol), (usize, usize)> = HashMap::new();
    let mut defaults: HashMap<usize, usize> = HashMap::new();
    let mut pairs = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        match words[0] {
            "states" => {
                let v = words.get(1).and_then(|w| w.parse::<usize>().ok()).filter(|&v| v > 0);
                n = Some(v.ok_or_else(|| Error::parse(line, "expected 'states <n>' with n > 0"))?);
            }
            "initial" => initial = Some((line, words.get(1).copied().unwrap_or(""))),
            "ap" => {
                let names: Vec<String> = words[1..].iter().map(|w| w.to_string()).collect();
                if names.len() > MAX_AP {
                    return Err(Error::parse(line, format!("at most {MAX_AP} propositions are supported")));
                }
                ap = Some(names);
            }
            "trans" => {
                let (Some(n), Some(ap)) = (n, ap.as_ref()) else {
                    return Err(Error::parse(line, "'states' and 'ap' must precede transitions"));
                };
                let [_, q, letter, t] = words.as_slice() else {
                    return Err(Error::parse(line, "expected 'trans <q> {<ap>,...}|empty|default <q'>'"));
                };
                let q = parse_state(line, q, n)?;
                let t = parse_state(line, t, n)?;
                match *letter {
                    "default" => {
                        if defaults.insert(q, t).is_some() {
                            return Err(Error::parse(line, format!("second default transition for state {q}")));
                        }
                    }
                    _ => {
                        let sym = parse_letter(line, letter, ap)?;
                        if let Some((_, prev)) = explicit.get(&(q, sym)) {
                            if *prev != t {
                                return Err(Error::parse(line, format!("conflicting transitions for state {q} on {letter}")));
                            }
                        }
                        explicit.insert((q, sym), (line, t));
                    }
                }
            }
            "pair" => {
                let Some(n) = n else {
                    return Err(Error::parse(line, "'states' must precede acceptance pairs"));
                };
                let (Some(l), Some(k)) = (
                    words.iter().find_map(|w| w.strip_prefix("L=")),
                    words.iter().find_map(|w| w.strip_prefix("K=")),
                ) else {
                    return Err(Error::parse(line, "expected 'pair L={...} K={...}'"));
                };
                pairs.push(RabinPair { l: parse_state_set(line, l, n)?, k: parse_state_set(line, k, n)? });
            }
            other => return Err(Error::parse(line, format!("unexpected declaration '{other}'"))),
        }
    }

    let n = n.ok_or_else(|| Error::InvalidAutomaton("missing 'states' declaration".into()))?;
    let ap = ap.unwrap_or_default();
    let initial = match initial {
        Some((line, w)) => parse_state(line, w, n)?,
        None => 0,
    };
    let symbols = 1usize << ap.len();
    let mut delta = vec![vec![0; symbols]; n];
    for (q, row) in delta.iter_mut().enumerate() {
        for (sym, slot) in row.iter_mut().enumerate() {
            *slot = match explicit.get(&(q, sym as Symbol)) {
                Some(&(_, t)) => t,
                None => match defaults.get(&q) {
                    Some(&t) => t,
                    None => {
                        let letter: Vec<&str> =
                            (0..ap.len()).filter(|i| sym >> i & 1 == 1).map(|i| ap[i].as_str()).collect();
                        return Err(Error::InvalidAutomaton(format!(
                            "transition function is not total: no successor for state {q} on {{{}}}",
                            letter.join(",")
                        )));
                    }
                },
            };
        }
    }
    let dra = Dra { ap, initial, delta, pairs };
    dra.validate()?;
    Ok(dra)
}

fn parse_letter(line: usize, word: &str, ap: &[String]) -> Result<Symbol> {
    if word == "empty" {
        return Ok(0);
    }
    let inner = word
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::parse(line, format!("expected '{{<ap>,...}}', 'empty' or 'default', found '{word}'")))?;
    let mut sym = 0;
    for name in inner.split(',').map(str::trim).filter(|w| !w.is_empty()) {
        let i = ap
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::parse(line, format!("undeclared proposition '{name}'")))?;
        sym |= 1 << i;
    }
    Ok(sym)
}
