//! Policy files.
//!
//! A finite-memory policy is written as the automaton (each line prefixed
//! with `dra `) followed by `(<state>,<q>) <action>` lines. A file without
//! automaton lines holds a memoryless policy as `<state> <action>` lines.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::automata::{load_dra, Dra, RabinPair};
use crate::error::{Error, Result};
use crate::mdp::LabeledMdp;
use crate::product::{product_name, split_product_name, FiniteMemoryPolicy};

/// The one-state automaton used as memory of a memoryless policy.
pub fn trivial_dra() -> Dra {
    Dra {
        ap: Vec::new(),
        initial: 0,
        delta: vec![vec![0]],
        pairs: vec![RabinPair { l: Default::default(), k: [0].into_iter().collect() }],
    }
}

/// A memoryless policy given as one optional action id per base state.
pub fn memoryless(m: &LabeledMdp, actions: &[Option<usize>]) -> FiniteMemoryPolicy {
    let table = actions.iter().enumerate().filter_map(|(s, a)| a.map(|a| ((s, 0), a))).collect();
    FiniteMemoryPolicy { dra: trivial_dra(), symbols: vec![0; m.num_states()], table }
}

pub fn write_policy(policy: &FiniteMemoryPolicy, m: &LabeledMdp) -> String {
    let mut out = String::new();
    let rows: BTreeMap<(usize, usize), usize> = policy.table.iter().map(|(&k, &a)| (k, a)).collect();
    if policy.is_memoryless() {
        for ((s, _), a) in rows {
            let _ = writeln!(out, "{} {}", m.states[s], m.actions[a]);
        }
        return out;
    }
    for line in policy.dra.to_text().lines() {
        let _ = writeln!(out, "dra {line}");
    }
    for ((s, q), a) in rows {
        let _ = writeln!(out, "{} {}", product_name(&m.states[s], q), m.actions[a]);
    }
    out
}

pub fn read_policy(text: &str, m: &LabeledMdp) -> Result<FiniteMemoryPolicy> {
    let mut dra_text = String::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("dra ") {
            dra_text.push_str(rest);
            dra_text.push('\n');
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        let [state, action] = words.as_slice() else {
            return Err(Error::parse(i + 1, "expected '<state> <action>'"));
        };
        entries.push((i + 1, state.to_string(), action.to_string()));
    }
    let state_ids: HashMap<&str, usize> = m.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lookup = |line: usize, name: &str| {
        state_ids.get(name).copied().ok_or_else(|| Error::parse(line, format!("unknown state '{name}'")))
    };
    let memoryless_file = dra_text.is_empty();
    let dra = if memoryless_file { trivial_dra() } else { load_dra(&dra_text)? };
    let symbols = if memoryless_file {
        vec![0; m.num_states()]
    } else {
        m.labels.iter().map(|l| dra.label_symbol(l.iter())).collect()
    };
    let mut table = HashMap::new();
    for (line, state, action) in entries {
        let (s, q) = if memoryless_file {
            (lookup(line, &state)?, 0)
        } else {
            let (base, q) = split_product_name(&state)
                .ok_or_else(|| Error::parse(line, format!("expected a product state '(s,q)', found '{state}'")))?;
            if q >= dra.num_states() {
                return Err(Error::parse(line, format!("automaton state {q} is undeclared")));
            }
            (lookup(line, base)?, q)
        };
        let a = m.action_index(&action).ok_or_else(|| Error::parse(line, format!("unknown action '{action}'")))?;
        if m.choice(s, a).is_none() {
            return Err(Error::UnavailableAction { state: m.states[s].clone(), action });
        }
        if table.insert((s, q), a).is_some() {
            return Err(Error::parse(line, format!("second action for {state}")));
        }
    }
    Ok(FiniteMemoryPolicy { dra, symbols, table })
}
