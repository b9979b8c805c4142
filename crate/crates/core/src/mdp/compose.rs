use std::collections::{HashMap, VecDeque};

use super::{Choice, LabeledMdp};
use crate::error::{Error, Result};

/// How the costs of the components taking part in one composite step are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostRule {
    /// Sum of the participating components' costs; `R_max` is the sum of the bounds.
    #[default]
    Sum,
    /// Arithmetic mean over the participating components; `R_max` is the largest bound.
    Mean,
}

impl CostRule {
    fn combine(self, costs: &[f64]) -> f64 {
        let sum: f64 = costs.iter().sum();
        match self {
            CostRule::Sum => sum,
            CostRule::Mean => sum / costs.len() as f64,
        }
    }
}

/// Binary parallel composition with summed costs.
pub fn parallel_compose(m1: &LabeledMdp, m2: &LabeledMdp) -> Result<LabeledMdp> {
    compose(&[m1, m2], CostRule::Sum)
}

/// Parallel composition of any number of components.
///
/// An action is shared by every component whose action set declares it. A
/// composite step on action `a` is defined iff `a` is enabled in all sharing
/// components; those move jointly (probabilities multiply) while the others
/// stay put. Composite states are named `s1|s2|...`, labels are unions, and
/// only states reachable from the joint initial state are kept.
pub fn compose(components: &[&LabeledMdp], rule: CostRule) -> Result<LabeledMdp> {
    if components.is_empty() {
        return Err(Error::Invalid("nothing to compose".into()));
    }
    let mut actions: Vec<String> = Vec::new();
    for m in components {
        for a in &m.actions {
            if !actions.contains(a) {
                actions.push(a.clone());
            }
        }
    }
    // local[k][a] = id of composite action a inside component k, if declared there
    let local: Vec<Vec<Option<usize>>> = components
        .iter()
        .map(|m| actions.iter().map(|a| m.action_index(a)).collect())
        .collect();

    let start: Vec<usize> = components.iter().map(|m| m.initial).collect();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut tuples = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    let mut choices: Vec<Vec<Choice>> = Vec::new();

    while let Some(tuple) = queue.pop_front() {
        let mut row = Vec::new();
        for (a, _) in actions.iter().enumerate() {
            let mut parts = Vec::new();
            let mut enabled = true;
            for (k, m) in components.iter().enumerate() {
                if let Some(la) = local[k][a] {
                    match m.choice(tuple[k], la) {
                        Some(choice) => parts.push((k, choice)),
                        None => {
                            enabled = false;
                            break;
                        }
                    }
                }
            }
            if !enabled || parts.is_empty() {
                continue;
            }
            let mut dist: Vec<(Vec<usize>, f64)> = vec![(tuple.clone(), 1.0)];
            for (k, choice) in &parts {
                let mut next = Vec::with_capacity(dist.len() * choice.successors.len());
                for (t, p) in &dist {
                    for &(s, q) in &choice.successors {
                        let mut t2 = t.clone();
                        t2[*k] = s;
                        next.push((t2, p * q));
                    }
                }
                dist = next;
            }
            let costs: Vec<f64> = parts.iter().map(|(_, c)| c.cost).collect();
            let mut successors = Vec::with_capacity(dist.len());
            for (t, p) in dist {
                let id = match index.get(&t) {
                    Some(&id) => id,
                    None => {
                        let id = tuples.len();
                        index.insert(t.clone(), id);
                        tuples.push(t.clone());
                        queue.push_back(t);
                        id
                    }
                };
                successors.push((id, p));
            }
            row.push(Choice { action: a, successors, cost: rule.combine(&costs) });
        }
        if row.is_empty() {
            return Err(Error::DeadState(tuple_name(components, &tuple)));
        }
        choices.push(row);
    }

    let states = tuples.iter().map(|t| tuple_name(components, t)).collect();
    let labels = tuples
        .iter()
        .map(|t| t.iter().enumerate().flat_map(|(k, &s)| components[k].labels[s].iter().cloned()).collect())
        .collect();
    let rmax = match rule {
        CostRule::Sum => components.iter().map(|m| m.rmax).sum(),
        CostRule::Mean => components.iter().map(|m| m.rmax).fold(0.0, f64::max),
    };
    Ok(LabeledMdp { states, initial: 0, actions, choices, labels, rmax })
}

fn tuple_name(components: &[&LabeledMdp], tuple: &[usize]) -> String {
    tuple
        .iter()
        .enumerate()
        .map(|(k, &s)| components[k].states[s].as_str())
        .collect::<Vec<_>>()
        .join("|")
}
