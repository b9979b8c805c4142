//! Line-oriented model format.
//!
//! ```text
//! # comment
//! state s0 label pi,normal
//! state s1
//! initial s0
//! trans s0 a0 s1 1.0 cost 0.5
//! rmax 1
//! ```

use std::fmt::Write;

use super::{LabeledMdp, MdpBuilder, TransitionSystem};
use crate::error::{Error, Result};

struct Decl<'a> {
    line: usize,
    words: Vec<&'a str>,
}

fn declarations(text: &str) -> impl Iterator<Item = Decl<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = body.split_whitespace().collect();
        (!words.is_empty()).then_some(Decl { line: i + 1, words })
    })
}

fn number(line: usize, word: &str, what: &str) -> Result<f64> {
    word.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("invalid {what} '{word}'")))
}

fn lookup(b: &MdpBuilder, line: usize, name: &str) -> Result<usize> {
    b.state_id(name).ok_or_else(|| Error::parse(line, format!("undeclared state '{name}'")))
}

fn state_decl(b: &mut MdpBuilder, d: &Decl<'_>) -> Result<()> {
    let labels: Vec<&str> = match d.words.as_slice() {
        [_, _] => Vec::new(),
        [_, _, "label", list] => list.split(',').filter(|l| !l.is_empty()).collect(),
        _ => return Err(Error::parse(d.line, "expected 'state <name> [label <ap>,...]'")),
    };
    b.state(d.words[1], &labels);
    Ok(())
}

/// Parses a model in the text format; `trans` lines need probability and cost.
pub fn parse_model(text: &str) -> Result<LabeledMdp> {
    let mut b = MdpBuilder::new();
    let mut initial = None;
    let mut pending = Vec::new();
    for d in declarations(text) {
        match d.words[0] {
            "state" => state_decl(&mut b, &d)?,
            "initial" if d.words.len() == 2 => initial = Some((d.line, d.words[1])),
            "rmax" if d.words.len() == 2 => {
                let v = number(d.line, d.words[1], "rmax")?;
                b.rmax(v);
            }
            "trans" => pending.push(d),
            other => return Err(Error::parse(d.line, format!("unexpected declaration '{other}'"))),
        }
    }
    for d in pending {
        let [_, s, a, t, p, kw, c] = d.words.as_slice() else {
            return Err(Error::parse(d.line, "expected 'trans <s> <a> <t> <p> cost <c>'"));
        };
        if *kw != "cost" {
            return Err(Error::parse(d.line, "expected keyword 'cost'"));
        }
        let s = lookup(&b, d.line, s)?;
        let t = lookup(&b, d.line, t)?;
        let p = number(d.line, p, "probability")?;
        let c = number(d.line, c, "cost")?;
        let a = b.action(a);
        b.transition(s, a, t, p, c).map_err(|e| Error::parse(d.line, e.to_string()))?;
    }
    if let Some((line, name)) = initial {
        let s = lookup(&b, line, name)?;
        b.initial(s);
    }
    Ok(b.build())
}

/// Parses a structure file: the model format where probability and cost of
/// `trans` lines are optional and only the support is kept.
pub fn parse_structure(text: &str) -> Result<TransitionSystem> {
    let mut b = MdpBuilder::new();
    let mut initial = None;
    let mut rmax = None;
    let mut pending = Vec::new();
    for d in declarations(text) {
        match d.words[0] {
            "state" => state_decl(&mut b, &d)?,
            "initial" if d.words.len() == 2 => initial = Some((d.line, d.words[1])),
            "rmax" if d.words.len() == 2 => rmax = Some(number(d.line, d.words[1], "rmax")?),
            "trans" => pending.push(d),
            other => return Err(Error::parse(d.line, format!("unexpected declaration '{other}'"))),
        }
    }
    let mut relation = Vec::new();
    for d in pending {
        if d.words.len() < 4 {
            return Err(Error::parse(d.line, "expected 'trans <s> <a> <t> ...'"));
        }
        let s = lookup(&b, d.line, d.words[1])?;
        let t = lookup(&b, d.line, d.words[3])?;
        let a = b.action(d.words[2]);
        let positive = match d.words.get(4) {
            Some(p) => number(d.line, p, "probability")? > 0.0,
            None => true,
        };
        if positive {
            relation.push((s, a, t));
        }
    }
    let initial = match initial {
        Some((line, name)) => lookup(&b, line, name)?,
        None => 0,
    };
    let m = b.build();
    relation.sort_unstable();
    relation.dedup();
    Ok(TransitionSystem { states: m.states, initial, actions: m.actions, relation, labels: m.labels, rmax })
}

pub(super) fn emit_structure(ts: &TransitionSystem) -> String {
    let mut out = String::new();
    for (s, name) in ts.states.iter().enumerate() {
        if ts.labels[s].is_empty() {
            let _ = writeln!(out, "state {name}");
        } else {
            let labels: Vec<&str> = ts.labels[s].iter().map(String::as_str).collect();
            let _ = writeln!(out, "state {name} label {}", labels.join(","));
        }
    }
    let _ = writeln!(out, "initial {}", ts.states[ts.initial]);
    if let Some(r) = ts.rmax {
        let _ = writeln!(out, "rmax {r}");
    }
    for &(s, a, t) in &ts.relation {
        let _ = writeln!(out, "trans {} {} {}", ts.states[s], ts.actions[a], ts.states[t]);
    }
    out
}

pub(super) fn emit(m: &LabeledMdp) -> String {
    let mut out = String::new();
    for (s, name) in m.states.iter().enumerate() {
        if m.labels[s].is_empty() {
            let _ = writeln!(out, "state {name}");
        } else {
            let labels: Vec<&str> = m.labels[s].iter().map(String::as_str).collect();
            let _ = writeln!(out, "state {name} label {}", labels.join(","));
        }
    }
    let _ = writeln!(out, "initial {}", m.states[m.initial]);
    let _ = writeln!(out, "rmax {}", m.rmax);
    for (s, row) in m.choices.iter().enumerate() {
        for choice in row {
            for &(t, p) in &choice.successors {
                let _ = writeln!(
                    out,
                    "trans {} {} {} {} cost {}",
                    m.states[s], m.actions[choice.action], m.states[t], p, choice.cost
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_STATEB: &str = "\
state s0 label pi
state s1
state s2
initial s0
trans s0 a0 s1 1 cost 1
trans s1 a1 s2 1 cost 1
trans s2 a2 s0 0.4 cost 1
trans s2 a2 s1 0.6 cost 1
trans s2 a3 s0 0.5 cost 2
trans s2 a3 s1 0.5 cost 2
";

    #[test]
    fn round_trip() {
        let m = parse_model(THREE_STATEB).unwrap();
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.rmax, 2.0);
        let again = parse_model(&m.to_text()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn cost_mismatch_is_a_load_error() {
        let text = "state a\nstate b\ntrans a x b 0.5 cost 1\ntrans a x a 0.5 cost 2\n";
        match parse_model(text) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_state_is_rejected() {
        assert!(matches!(parse_model("state a\ntrans a x b 1 cost 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn structure_ignores_numbers() {
        let ts = parse_structure("state a\nstate b\ntrans a x b\ntrans a x a 0.3 cost 1\ntrans b y a 0 cost 1\n").unwrap();
        assert_eq!(ts.relation, vec![(0, 0, 0), (0, 0, 1)]);
    }
}
