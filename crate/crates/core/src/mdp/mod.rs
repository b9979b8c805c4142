//! Labeled MDPs with costs, their structure-only view, and policy-induced chains.

mod compose;
mod text;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub use compose::{compose, parallel_compose, CostRule};
pub use text::{parse_model, parse_structure};

/// Absolute tolerance used for row sums and probability range checks.
pub const PROB_TOL: f64 = 1e-9;

/// One enabled action at a state: its successor distribution and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub successors: Vec<(usize, f64)>,
    pub cost: f64,
}

/// A finite MDP whose states carry atomic-proposition labels and whose
/// state-action pairs carry non-negative costs bounded by `rmax`.
///
/// `choices[s]` lists the enabled actions of state `s` in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMdp {
    pub states: Vec<String>,
    pub initial: usize,
    pub actions: Vec<String>,
    pub choices: Vec<Vec<Choice>>,
    pub labels: Vec<BTreeSet<String>>,
    pub rmax: f64,
}

/// A violated model invariant, with the coordinates of the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    InitialOutOfRange { initial: usize },
    NoActions { state: String },
    NotStochastic { state: String, action: String, sum: f64 },
    ProbabilityOutOfRange { state: String, action: String, successor: String, prob: f64 },
    CostOutOfRange { state: String, action: String, cost: f64, rmax: f64 },
    DuplicateAction { state: String, action: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::InitialOutOfRange { initial } => {
                write!(f, "initial state index {initial} is out of range")
            }
            Diagnostic::NoActions { state } => write!(f, "state {state} has no enabled action"),
            Diagnostic::NotStochastic { state, action, sum } => {
                write!(f, "P({state},{action},.) sums to {sum}")
            }
            Diagnostic::ProbabilityOutOfRange { state, action, successor, prob } => {
                write!(f, "P({state},{action},{successor}) = {prob} is outside [0,1]")
            }
            Diagnostic::CostOutOfRange { state, action, cost, rmax } => {
                write!(f, "c({state},{action}) = {cost} is outside [0,{rmax}]")
            }
            Diagnostic::DuplicateAction { state, action } => {
                write!(f, "action {action} is declared twice in state {state}")
            }
        }
    }
}

/// Incremental constructor used by the loaders, the composer and tests.
#[derive(Debug, Clone, Default)]
pub struct MdpBuilder {
    states: Vec<String>,
    state_index: HashMap<String, usize>,
    actions: Vec<String>,
    action_index: HashMap<String, usize>,
    choices: Vec<Vec<Choice>>,
    labels: Vec<BTreeSet<String>>,
    initial: Option<usize>,
    rmax: Option<f64>,
}

impl MdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a state (or returns the existing index) and adds `labels` to it.
    pub fn state<S: AsRef<str>>(&mut self, name: &str, labels: &[S]) -> usize {
        let id = match self.state_index.get(name) {
            Some(&id) => id,
            None => {
                let id = self.states.len();
                self.states.push(name.to_string());
                self.state_index.insert(name.to_string(), id);
                self.choices.push(Vec::new());
                self.labels.push(BTreeSet::new());
                id
            }
        };
        self.labels[id].extend(labels.iter().map(|l| l.as_ref().to_string()));
        id
    }

    pub fn state_id(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn action(&mut self, name: &str) -> usize {
        if let Some(&id) = self.action_index.get(name) {
            return id;
        }
        let id = self.actions.len();
        self.actions.push(name.to_string());
        self.action_index.insert(name.to_string(), id);
        id
    }

    pub fn initial(&mut self, state: usize) -> &mut Self {
        self.initial = Some(state);
        self
    }

    pub fn rmax(&mut self, rmax: f64) -> &mut Self {
        self.rmax = Some(rmax);
        self
    }

    /// Adds `P(s,a,t) = p` with cost `c(s,a) = cost`.
    ///
    /// Costs must agree across the successors of one `(s,a)`; probabilities
    /// outside `[-1e-9, 1+1e-9]` are rejected and the rest clamped to `[0,1]`.
    pub fn transition(&mut self, s: usize, a: usize, t: usize, p: f64, cost: f64) -> Result<()> {
        if !(p >= -PROB_TOL && p <= 1.0 + PROB_TOL) {
            return Err(Error::InvalidModel(format!(
                "P({},{},{}) = {p} is outside [0,1]",
                self.states[s], self.actions[a], self.states[t]
            )));
        }
        let p = p.clamp(0.0, 1.0);
        let row = &mut self.choices[s];
        match row.iter_mut().find(|c| c.action == a) {
            Some(choice) => {
                if choice.cost != cost {
                    return Err(Error::InvalidModel(format!(
                        "cost of ({},{}) declared as both {} and {cost}",
                        self.states[s], self.actions[a], choice.cost
                    )));
                }
                match choice.successors.iter_mut().find(|(x, _)| *x == t) {
                    Some(entry) => entry.1 += p,
                    None => choice.successors.push((t, p)),
                }
            }
            None => row.push(Choice { action: a, successors: vec![(t, p)], cost }),
        }
        Ok(())
    }

    /// Adds a whole choice at once, bypassing the per-entry checks.
    pub fn choice(&mut self, s: usize, choice: Choice) {
        self.choices[s].push(choice);
    }

    /// Finishes construction. No invariant is enforced here; see [`LabeledMdp::validate`].
    pub fn build(self) -> LabeledMdp {
        let rmax = self.rmax.unwrap_or_else(|| {
            self.choices.iter().flatten().map(|c| c.cost).fold(0.0, f64::max)
        });
        LabeledMdp {
            states: self.states,
            initial: self.initial.unwrap_or(0),
            actions: self.actions,
            choices: self.choices,
            labels: self.labels,
            rmax,
        }
    }
}

impl LabeledMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    /// The enabled choice for global action id `a` at state `s`.
    pub fn choice(&self, s: usize, a: usize) -> Option<&Choice> {
        self.choices[s].iter().find(|c| c.action == a)
    }

    pub fn has_label(&self, s: usize, ap: &str) -> bool {
        self.labels[s].contains(ap)
    }

    /// All atomic propositions occurring in some state label.
    pub fn atomic_propositions(&self) -> BTreeSet<String> {
        self.labels.iter().flatten().cloned().collect()
    }

    /// Actions that are enabled somewhere (the composition alphabet).
    pub fn alphabet(&self) -> BTreeSet<usize> {
        self.choices.iter().flatten().map(|c| c.action).collect()
    }

    /// Checks every model invariant and reports each violation.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.initial >= self.states.len() {
            out.push(Diagnostic::InitialOutOfRange { initial: self.initial });
        }
        for (s, row) in self.choices.iter().enumerate() {
            let state = &self.states[s];
            if row.is_empty() {
                out.push(Diagnostic::NoActions { state: state.clone() });
            }
            let mut seen = BTreeSet::new();
            for choice in row {
                let action = &self.actions[choice.action];
                if !seen.insert(choice.action) {
                    out.push(Diagnostic::DuplicateAction { state: state.clone(), action: action.clone() });
                }
                for &(t, p) in &choice.successors {
                    if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
                        out.push(Diagnostic::ProbabilityOutOfRange {
                            state: state.clone(),
                            action: action.clone(),
                            successor: self.states[t].clone(),
                            prob: p,
                        });
                    }
                }
                let sum: f64 = choice.successors.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    out.push(Diagnostic::NotStochastic { state: state.clone(), action: action.clone(), sum });
                }
                if !(choice.cost >= 0.0 && choice.cost <= self.rmax) {
                    out.push(Diagnostic::CostOutOfRange {
                        state: state.clone(),
                        action: action.clone(),
                        cost: choice.cost,
                        rmax: self.rmax,
                    });
                }
            }
        }
        out
    }

    /// Fixes the policy `policy[s]` (a global action id) at every state.
    pub fn induce_dtmc(&self, policy: &[usize]) -> Result<Dtmc> {
        if policy.len() != self.num_states() {
            return Err(Error::Invalid(format!(
                "policy covers {} states, model has {}",
                policy.len(),
                self.num_states()
            )));
        }
        let mut rows = Vec::with_capacity(policy.len());
        let mut cost = Vec::with_capacity(policy.len());
        for (s, &a) in policy.iter().enumerate() {
            let choice = self.choice(s, a).ok_or_else(|| Error::UnavailableAction {
                state: self.states[s].clone(),
                action: self.actions.get(a).cloned().unwrap_or_else(|| format!("#{a}")),
            })?;
            rows.push(choice.successors.clone());
            cost.push(choice.cost);
        }
        Ok(Dtmc {
            states: self.states.clone(),
            initial: self.initial,
            rows,
            cost,
            labels: self.labels.clone(),
        })
    }

    /// The probability-free view: `(s,a,t)` is related iff `P(s,a,t) > 0`.
    pub fn structure(&self) -> TransitionSystem {
        let mut relation = Vec::new();
        for (s, row) in self.choices.iter().enumerate() {
            for choice in row {
                for &(t, p) in &choice.successors {
                    if p > 0.0 {
                        relation.push((s, choice.action, t));
                    }
                }
            }
        }
        relation.sort_unstable();
        relation.dedup();
        TransitionSystem {
            states: self.states.clone(),
            initial: self.initial,
            actions: self.actions.clone(),
            relation,
            labels: self.labels.clone(),
            rmax: Some(self.rmax),
        }
    }

    /// States reachable from the initial state through positive-probability transitions.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(s) = queue.pop_front() {
            for choice in &self.choices[s] {
                for &(t, p) in &choice.successors {
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        seen
    }

    /// Serializes to the line-oriented model text format.
    pub fn to_text(&self) -> String {
        text::emit(self)
    }
}

/// Structure-only view of an MDP: states, labels and the support relation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSystem {
    pub states: Vec<String>,
    pub initial: usize,
    pub actions: Vec<String>,
    /// Sorted, duplicate-free `(state, action, successor)` triples.
    pub relation: Vec<(usize, usize, usize)>,
    pub labels: Vec<BTreeSet<String>>,
    pub rmax: Option<f64>,
}

impl TransitionSystem {
    /// Successors of `(s,a)` in declaration order of the relation.
    pub fn successors(&self, s: usize, a: usize) -> Vec<usize> {
        let lo = self.relation.partition_point(|&(x, y, _)| (x, y) < (s, a));
        self.relation[lo..].iter().take_while(|&&(x, y, _)| (x, y) == (s, a)).map(|r| r.2).collect()
    }

    /// Enabled actions of `s`, in increasing action-id order.
    pub fn enabled(&self, s: usize) -> Vec<usize> {
        let lo = self.relation.partition_point(|&(x, _, _)| x < s);
        let mut out: Vec<usize> =
            self.relation[lo..].iter().take_while(|r| r.0 == s).map(|r| r.1).collect();
        out.dedup();
        out
    }

    /// Serializes to the structure file format.
    pub fn to_text(&self) -> String {
        text::emit_structure(self)
    }

    /// An MDP over this structure with uniform probabilities and zero cost.
    ///
    /// Everything computed from it that depends only on the support (end
    /// components, probability-0/1 sets, cycle bounds) is exact for any MDP
    /// sharing the structure.
    pub fn uniform_mdp(&self) -> LabeledMdp {
        let mut choices = vec![Vec::new(); self.states.len()];
        for s in 0..self.states.len() {
            for a in self.enabled(s) {
                let succ = self.successors(s, a);
                let p = 1.0 / succ.len() as f64;
                choices[s].push(Choice { action: a, successors: succ.into_iter().map(|t| (t, p)).collect(), cost: 0.0 });
            }
        }
        LabeledMdp {
            states: self.states.clone(),
            initial: self.initial,
            actions: self.actions.clone(),
            choices,
            labels: self.labels.clone(),
            rmax: self.rmax.unwrap_or(0.0),
        }
    }
}

/// A discrete-time Markov chain with per-state cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    pub states: Vec<String>,
    pub initial: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub labels: Vec<BTreeSet<String>>,
}

impl Dtmc {
    pub fn is_stochastic(&self) -> bool {
        self.rows
            .iter()
            .all(|row| (row.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() <= PROB_TOL)
    }

    /// Closed strongly connected components of the positive-probability graph.
    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        let succ: Vec<Vec<usize>> = self
            .rows
            .iter()
            .map(|row| row.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t).collect())
            .collect();
        crate::graph::closed_classes(&succ)
    }
}
