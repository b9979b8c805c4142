//! Product of a labeled MDP with a DRA, and projection of product policies
//! back to finite-memory policies on the MDP.

use std::collections::{HashMap, VecDeque};

use crate::automata::{Dra, Symbol};
use crate::error::Result;
use crate::mdp::{Choice, LabeledMdp};

/// Lifted acceptance pair: `l[x]` / `k[x]` tell whether product state `x`
/// lies in `S × L(i)` / `S × K(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceSets {
    pub l: Vec<bool>,
    pub k: Vec<bool>,
}

/// Reachable part of `M × R`, itself stored as a [`LabeledMdp`] whose states
/// are named `(s,q)` and carry the labels of `s`.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    pub mdp: LabeledMdp,
    /// `(base state, automaton state)` of every product state.
    pub origin: Vec<(usize, usize)>,
    pub base_states: usize,
    pub dra: Dra,
    pub pairs: Vec<AcceptanceSets>,
    /// Cycle markers `S_π × Q`.
    pub markers: Vec<bool>,
    pub pi_label: String,
    /// Automaton letter of every base state.
    pub symbols: Vec<Symbol>,
    index: HashMap<(usize, usize), usize>,
}

impl ProductMdp {
    pub fn num_states(&self) -> usize {
        self.origin.len()
    }

    /// `|S|·|Q|`, the size of the product before reachability pruning.
    pub fn full_size(&self) -> usize {
        self.base_states * self.dra.num_states()
    }

    pub fn index_of(&self, s: usize, q: usize) -> Option<usize> {
        self.index.get(&(s, q)).copied()
    }

    /// Product states lying in some `K_P(i)`.
    pub fn accepting_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&x| self.pairs.iter().any(|p| p.k[x])).collect()
    }

    /// Marker membership of a base state.
    pub fn is_marker_base(&self, m: &LabeledMdp, s: usize) -> bool {
        m.has_label(s, &self.pi_label)
    }
}

pub fn product_name(state: &str, q: usize) -> String {
    format!("({state},{q})")
}

/// Splits a product state name `(s,q)` into its parts.
pub fn split_product_name(name: &str) -> Option<(&str, usize)> {
    let inner = name.strip_prefix('(')?.strip_suffix(')')?;
    let (s, q) = inner.rsplit_once(',')?;
    Some((s, q.parse().ok()?))
}

/// Builds the reachable product from `(ŝ, q0)`. The automaton moves on the
/// label of the state being left: `q' = δ(q, L(s))`.
pub fn build_product(m: &LabeledMdp, dra: &Dra, pi_label: &str) -> Result<ProductMdp> {
    let symbols: Vec<Symbol> = m.labels.iter().map(|l| dra.label_symbol(l.iter())).collect();
    let start = (m.initial, dra.initial);
    let mut index = HashMap::from([(start, 0usize)]);
    let mut origin = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut choices = Vec::new();
    while let Some((s, q)) = queue.pop_front() {
        let q2 = dra.step(q, symbols[s]);
        let mut row = Vec::with_capacity(m.choices[s].len());
        for choice in &m.choices[s] {
            let successors = choice
                .successors
                .iter()
                .map(|&(t, p)| {
                    let id = *index.entry((t, q2)).or_insert_with(|| {
                        origin.push((t, q2));
                        queue.push_back((t, q2));
                        origin.len() - 1
                    });
                    (id, p)
                })
                .collect();
            row.push(Choice { action: choice.action, successors, cost: choice.cost });
        }
        choices.push(row);
    }
    let states = origin.iter().map(|&(s, q)| product_name(&m.states[s], q)).collect();
    let labels = origin.iter().map(|&(s, _)| m.labels[s].clone()).collect();
    let pairs = dra
        .pairs
        .iter()
        .map(|pair| AcceptanceSets {
            l: origin.iter().map(|(_, q)| pair.l.contains(q)).collect(),
            k: origin.iter().map(|(_, q)| pair.k.contains(q)).collect(),
        })
        .collect();
    let markers = origin.iter().map(|&(s, _)| m.has_label(s, pi_label)).collect();
    let mdp = LabeledMdp { states, initial: 0, actions: m.actions.clone(), choices, labels, rmax: m.rmax };
    Ok(ProductMdp {
        mdp,
        origin,
        base_states: m.num_states(),
        dra: dra.clone(),
        pairs,
        markers,
        pi_label: pi_label.to_string(),
        symbols,
        index,
    })
}

/// A policy on the base MDP that keeps the automaton state as memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMemoryPolicy {
    pub dra: Dra,
    /// Automaton letter of every base state.
    pub symbols: Vec<Symbol>,
    /// Action id played at `(s, q)`.
    pub table: HashMap<(usize, usize), usize>,
}

impl FiniteMemoryPolicy {
    pub fn initial_memory(&self) -> usize {
        self.dra.initial
    }

    pub fn action(&self, s: usize, q: usize) -> Option<usize> {
        self.table.get(&(s, q)).copied()
    }

    /// Memory after leaving base state `s` with memory `q`.
    pub fn next_memory(&self, q: usize, s: usize) -> usize {
        self.dra.step(q, self.symbols[s])
    }

    /// True when the automaton has a single state, i.e. the policy is memoryless.
    pub fn is_memoryless(&self) -> bool {
        self.dra.num_states() == 1
    }
}

/// Turns a memoryless product policy (action id per product state) into a
/// finite-memory policy on the base MDP.
pub fn project_policy(p: &ProductMdp, policy: &[Option<usize>]) -> FiniteMemoryPolicy {
    let table = policy
        .iter()
        .enumerate()
        .filter_map(|(x, a)| a.map(|a| (p.origin[x], a)))
        .collect();
    FiniteMemoryPolicy { dra: p.dra.clone(), symbols: p.symbols.clone(), table }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let name = product_name("w0|r0|t0|f0", 7);
        assert_eq!(name, "(w0|r0|t0|f0,7)");
        assert_eq!(split_product_name(&name), Some(("w0|r0|t0|f0", 7)));
        assert_eq!(split_product_name("w0"), None);
    }
}
