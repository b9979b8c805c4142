//! End components, accepting end components, maximal reachability, the
//! entrance of an end component and the cycle bound `D`.

use std::collections::{BTreeSet, VecDeque};

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::mdp::LabeledMdp;
use crate::product::ProductMdp;

/// Convergence threshold of value iteration (absolute, sup norm).
pub const VI_TOLERANCE: f64 = 1e-10;
const VI_MAX_ITERATIONS: usize = 10_000_000;

/// Strongly connected components of a successor-list graph, each sorted,
/// listed by smallest member.
pub fn sccs(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(succ.len(), 0);
    let nodes: Vec<NodeIndex> = (0..succ.len()).map(|_| g.add_node(())).collect();
    for (u, out) in succ.iter().enumerate() {
        for &v in out {
            g.add_edge(nodes[u], nodes[v], ());
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

/// SCCs without edges leaving them (the recurrent classes of a chain).
pub fn closed_classes(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = sccs(succ);
    let mut id = vec![0; succ.len()];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            id[s] = i;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&s| succ[s].iter().all(|&t| id[t] == *i)))
        .map(|(_, c)| c)
        .collect()
}

/// Forward reachability from `start` in a successor-list graph.
pub fn reachable_from(succ: &[Vec<usize>], start: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; succ.len()];
    let mut queue: VecDeque<usize> = start.iter().copied().collect();
    for &s in start {
        seen[s] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn positive_successors(m: &LabeledMdp, s: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
    m.choice(s, a)
        .into_iter()
        .flat_map(|c| c.successors.iter())
        .filter(|(_, p)| *p > 0.0)
        .map(|(t, _)| *t)
}

/// An end component: a state set with, per state, the retained actions
/// (global action ids) whose successors all stay inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    /// Sorted member states.
    pub states: Vec<usize>,
    /// Retained actions, aligned with `states`.
    pub actions: Vec<Vec<usize>>,
    /// Index of the acceptance pair this component was found for.
    pub pair: Option<usize>,
    pub accepting: bool,
}

impl EndComponent {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    /// Position of `s` within `states`.
    pub fn position(&self, s: usize) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &s in &self.states {
            mask[s] = true;
        }
        mask
    }

    /// Successor lists over component positions using the retained actions.
    pub fn local_graph(&self, m: &LabeledMdp) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(&s, acts)| {
                let set: BTreeSet<usize> = acts
                    .iter()
                    .flat_map(|&a| positive_successors(m, s, a))
                    .filter_map(|t| self.position(t))
                    .collect();
                set.into_iter().collect()
            })
            .collect()
    }
}

/// Maximal end components of `m` restricted to the states with `allowed[s]`.
///
/// Alternates an SCC decomposition with removal of actions that can leave
/// their SCC (and of states left without actions) until nothing changes.
pub fn maximal_end_components(m: &LabeledMdp, allowed: &[bool]) -> Vec<EndComponent> {
    let n = m.num_states();
    let mut alive = allowed.to_vec();
    let mut acts: Vec<Vec<usize>> = (0..n)
        .map(|s| if alive[s] { m.choices[s].iter().map(|c| c.action).collect() } else { Vec::new() })
        .collect();
    let mut comp = vec![usize::MAX; n];
    loop {
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !alive[s] {
                    return Vec::new();
                }
                acts[s]
                    .iter()
                    .flat_map(|&a| positive_successors(m, s, a))
                    .filter(|&t| alive[t])
                    .collect()
            })
            .collect();
        comp.fill(usize::MAX);
        for (i, c) in sccs(&succ).into_iter().enumerate() {
            for s in c {
                if alive[s] {
                    comp[s] = i;
                }
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let before = acts[s].len();
            let cs = comp[s];
            acts[s].retain(|&a| positive_successors(m, s, a).all(|t| alive[t] && comp[t] == cs));
            if acts[s].len() != before {
                changed = true;
            }
            if acts[s].is_empty() {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for s in 0..n {
        if !alive[s] {
            continue;
        }
        match groups.iter_mut().find(|(c, _)| *c == comp[s]) {
            Some((_, members)) => members.push(s),
            None => groups.push((comp[s], vec![s])),
        }
    }
    groups
        .into_iter()
        .map(|(_, states)| EndComponent {
            actions: states.iter().map(|&s| acts[s].clone()).collect(),
            states,
            pair: None,
            accepting: false,
        })
        .collect()
}

/// Accepting maximal end components: per acceptance pair `i`, the MECs of
/// the product without `L_P(i)` that contain a `K_P(i)` state.
pub fn accepting_mecs(p: &ProductMdp) -> Vec<EndComponent> {
    let mut out: Vec<EndComponent> = Vec::new();
    for (i, pair) in p.pairs.iter().enumerate() {
        let allowed: Vec<bool> = pair.l.iter().map(|&l| !l).collect();
        for mut c in maximal_end_components(&p.mdp, &allowed) {
            if c.states.iter().any(|&s| pair.k[s]) && !out.iter().any(|o| o.states == c.states) {
                c.pair = Some(i);
                c.accepting = true;
                out.push(c);
            }
        }
    }
    out
}

/// True iff the retained actions connect every ordered pair of member states.
pub fn is_communicating(m: &LabeledMdp, c: &EndComponent) -> bool {
    !c.is_empty() && sccs(&c.local_graph(m)).len() == 1
}

/// Result of a maximal reachability computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityResult {
    /// `P_max` of reaching the target from every state.
    pub values: Vec<f64>,
    /// Action id for every state outside the target with positive value.
    pub policy: Vec<Option<usize>>,
    /// States with `P_max = 0`, decided on the graph.
    pub prob0: Vec<bool>,
    /// States with `P_max = 1`, decided on the graph.
    pub prob1: Vec<bool>,
    pub iterations: usize,
}

/// States from which the target is unreachable under every policy.
fn prob0_max(m: &LabeledMdp, target: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for c in &m.choices[s] {
            for &(t, p) in &c.successors {
                if p > 0.0 {
                    pred[t].push(s);
                }
            }
        }
    }
    let start: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    let can = reachable_from(&pred, &start);
    can.into_iter().map(|c| !c).collect()
}

/// States from which some policy reaches the target almost surely.
fn prob1_max(m: &LabeledMdp, target: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut u = vec![true; n];
    loop {
        let mut r = target.to_vec();
        loop {
            let mut grew = false;
            for s in 0..n {
                if r[s] || !u[s] {
                    continue;
                }
                let ok = m.choices[s].iter().any(|c| {
                    let pos = || c.successors.iter().filter(|(_, p)| *p > 0.0);
                    pos().all(|&(t, _)| u[t]) && pos().any(|&(t, _)| r[t])
                });
                if ok {
                    r[s] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Maximal probability of reaching `target`, with a policy attaining it.
///
/// Probability-0 and probability-1 states are fixed from the graph; the rest
/// are solved by value iteration. The policy picks, among value-optimal
/// actions, one that moves closer to the target (attractor layering), lowest
/// action id first, so that it reaches the target with the optimal probability.
pub fn max_reach_probability(m: &LabeledMdp, target: &[bool]) -> ReachabilityResult {
    let n = m.num_states();
    let prob0 = prob0_max(m, target);
    let prob1 = prob1_max(m, target);
    let mut values: Vec<f64> = (0..n).map(|s| if prob1[s] { 1.0 } else { 0.0 }).collect();
    let unknown: Vec<usize> = (0..n).filter(|&s| !prob0[s] && !prob1[s]).collect();
    let q = |values: &[f64], c: &crate::mdp::Choice| c.successors.iter().map(|&(t, p)| p * values[t]).sum::<f64>();
    let mut iterations = 0;
    while !unknown.is_empty() && iterations < VI_MAX_ITERATIONS {
        iterations += 1;
        let mut diff: f64 = 0.0;
        let next: Vec<f64> = unknown
            .iter()
            .map(|&s| m.choices[s].iter().map(|c| q(&values, c)).fold(0.0, f64::max))
            .collect();
        for (&s, v) in unknown.iter().zip(next) {
            diff = diff.max((v - values[s]).abs());
            values[s] = v;
        }
        if diff < VI_TOLERANCE {
            break;
        }
    }

    let optimal: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            if target[s] || prob0[s] {
                return Vec::new();
            }
            m.choices[s]
                .iter()
                .filter(|c| {
                    if prob1[s] {
                        c.successors.iter().all(|&(t, p)| p == 0.0 || prob1[t])
                    } else {
                        q(&values, c) >= values[s] - 1e-9
                    }
                })
                .map(|c| c.action)
                .collect()
        })
        .collect();
    let mut policy: Vec<Option<usize>> = vec![None; n];
    let mut attracted = target.to_vec();
    loop {
        let mut layer = Vec::new();
        for s in 0..n {
            if attracted[s] || optimal[s].is_empty() {
                continue;
            }
            if let Some(&a) = optimal[s].iter().find(|&&a| positive_successors(m, s, a).any(|t| attracted[t])) {
                layer.push((s, a));
            }
        }
        if layer.is_empty() {
            break;
        }
        for (s, a) in layer {
            attracted[s] = true;
            policy[s] = Some(a);
        }
    }
    for s in 0..n {
        if policy[s].is_none() && !target[s] && !optimal[s].is_empty() {
            policy[s] = Some(optimal[s][0]);
        }
    }
    ReachabilityResult { values, policy, prob0, prob1, iterations }
}

/// The entrance of `c`: the unique component state first hit by every
/// policy reaching `c` almost surely (the initial state when it lies in `c`).
///
/// Candidates are component states entered from a reachable outside state
/// that can still reach `c` almost surely, through an action keeping that
/// certainty. Fails with an assumption-3 violation unless there is exactly one
/// candidate and it is a cycle marker.
pub fn entrance(p: &ProductMdp, c: &EndComponent) -> Result<usize> {
    let m = &p.mdp;
    let init = m.initial;
    let check = |x: usize| {
        if p.markers[x] {
            Ok(x)
        } else {
            Err(Error::assumption(3, format!("entrance {} is not a cycle-marker state", m.states[x])))
        }
    };
    if c.contains(init) {
        return check(init);
    }
    let target = c.mask(m.num_states());
    let reach = max_reach_probability(m, &target);
    if !reach.prob1[init] {
        return Err(Error::assumption(
            3,
            format!("the component is reached with probability {:.6} < 1 from the initial state", reach.values[init]),
        ));
    }
    let safe = |s: usize| -> Vec<usize> {
        m.choices[s]
            .iter()
            .filter(|ch| ch.successors.iter().all(|&(t, pr)| pr == 0.0 || reach.prob1[t]))
            .flat_map(|ch| ch.successors.iter().filter(|(_, pr)| *pr > 0.0).map(|(t, _)| *t))
            .collect()
    };
    let mut seen = vec![false; m.num_states()];
    let mut queue = VecDeque::from([init]);
    seen[init] = true;
    let mut candidates = BTreeSet::new();
    while let Some(s) = queue.pop_front() {
        for t in safe(s) {
            if target[t] {
                candidates.insert(t);
            } else if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    match candidates.len() {
        1 => check(*candidates.iter().next().unwrap_or(&init)),
        _ => {
            let names: Vec<&str> = candidates.iter().map(|&x| m.states[x].as_str()).collect();
            Err(Error::assumption(3, format!("entrance is not unique; candidates: {}", names.join(", "))))
        }
    }
}

/// Longest number of steps from a marker state back to the marker set
/// inside `c` (the cycle bound `D`).
///
/// Marker states are split into a source copy (outgoing edges) and a sink
/// copy (incoming edges); the resulting graph must be acyclic, otherwise
/// some cycle avoids every marker (assumption-2 violation).
pub fn compute_cycle_bound(m: &LabeledMdp, c: &EndComponent, markers: &[bool]) -> Result<usize> {
    let local = c.local_graph(m);
    let k = c.len();
    if !c.states.iter().any(|&s| markers[s]) {
        return Err(Error::assumption(2, "the component contains no cycle-marker state"));
    }
    let mut g = DiGraph::<usize, ()>::new();
    let out_node: Vec<NodeIndex> = (0..k).map(|i| g.add_node(i)).collect();
    let in_node: Vec<NodeIndex> =
        (0..k).map(|i| if markers[c.states[i]] { g.add_node(i) } else { out_node[i] }).collect();
    for (u, succ) in local.iter().enumerate() {
        for &v in succ {
            g.add_edge(out_node[u], in_node[v], ());
        }
    }
    let order = match toposort(&g, None) {
        Ok(order) => order,
        Err(cycle) => {
            let start = g[cycle.node_id()];
            let local_marker: Vec<bool> = c.states.iter().map(|&s| markers[s]).collect();
            let path = marker_free_cycle(&local, &local_marker, start).unwrap_or_else(|| vec![start]);
            let names: Vec<&str> = path.iter().map(|&i| m.states[c.states[i]].as_str()).collect();
            return Err(Error::assumption(2, format!("cycle without a marker state: {}", names.join(" -> "))));
        }
    };
    let mut dist: Vec<Option<usize>> = vec![None; g.node_count()];
    for i in 0..k {
        if markers[c.states[i]] {
            dist[out_node[i].index()] = Some(0);
        }
    }
    for node in order {
        let Some(d) = dist[node.index()] else { continue };
        for next in g.neighbors(node) {
            let slot = &mut dist[next.index()];
            if slot.is_none_or(|x| x < d + 1) {
                *slot = Some(d + 1);
            }
        }
    }
    let bound = (0..k)
        .filter(|&i| markers[c.states[i]])
        .filter_map(|i| dist[in_node[i].index()])
        .max()
        .unwrap_or(0);
    Ok(bound)
}

/// A cycle through `start` that avoids marker states, as local positions.
fn marker_free_cycle(local: &[Vec<usize>], marker: &[bool], start: usize) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; local.len()];
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &local[u] {
            if v == start {
                let mut path = vec![u];
                let mut x = u;
                while x != start {
                    x = parent[x];
                    path.push(x);
                }
                path.reverse();
                path.push(start);
                return Some(path);
            }
            if !marker[v] && parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}
