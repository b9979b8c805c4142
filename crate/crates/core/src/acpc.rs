//! Average cost per cycle inside an end component: evaluation, optimization,
//! `T`-cycle evaluation and optimization, the ε-mixing cycle, and assembly of
//! the final product policy.
//!
//! A cycle is completed each time a marker state is entered; the start state
//! does not count. For a unichain policy with stationary distribution `ρ`,
//! the average cost per cycle is `Σ ρ(s) c(s) / Σ_{s marker} ρ(s)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{closed_classes, reachable_from, EndComponent, ReachabilityResult};
use crate::linalg::{self, DENSE_LIMIT};
use crate::mdp::LabeledMdp;
use crate::product::ProductMdp;

/// Strict-improvement threshold of policy iteration.
pub const IMPROVEMENT_TOL: f64 = 1e-10;
/// Values closer than this are ties in policy enumeration.
const TIE_TOL: f64 = 1e-12;

/// One retained action of a component state, with successors as local positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalChoice {
    pub action: usize,
    pub successors: Vec<(usize, f64)>,
    pub cost: f64,
}

/// An end component viewed as a stand-alone MDP over local positions `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleModel {
    /// Ids of the member states in the enclosing MDP.
    pub states: Vec<usize>,
    pub names: Vec<String>,
    pub choices: Vec<Vec<LocalChoice>>,
    pub marker: Vec<bool>,
    pub rmax: f64,
    /// Matrix size up to which linear systems are solved directly.
    pub dense_limit: usize,
}

/// A memoryless deterministic policy: `policy[i]` indexes `choices[i]`.
pub type MemorylessPolicy = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Infinite,
    Cycles(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcpcValue {
    /// Cost per cycle.
    pub j: f64,
    /// Infinite horizon: relative values `h` of the cycle-reset equation.
    /// `T` cycles: the `T`-cycle value from every start (NaN where undefined).
    pub per_state: Vec<f64>,
    pub horizon: Horizon,
}

impl CycleModel {
    /// Restricts `m` to `c`, keeping only the retained actions.
    pub fn new(m: &LabeledMdp, c: &EndComponent, markers: &[bool]) -> Result<Self> {
        let mut choices = Vec::with_capacity(c.len());
        for (&s, acts) in c.states.iter().zip(&c.actions) {
            let mut row = Vec::with_capacity(acts.len());
            for &a in acts {
                let choice = m.choice(s, a).ok_or_else(|| Error::UnavailableAction {
                    state: m.states[s].clone(),
                    action: m.actions[a].clone(),
                })?;
                let mut successors = Vec::with_capacity(choice.successors.len());
                for &(t, p) in &choice.successors {
                    if p == 0.0 {
                        continue;
                    }
                    let local = c.position(t).ok_or_else(|| {
                        Error::Invalid(format!("action {} leaves the component at {}", m.actions[a], m.states[s]))
                    })?;
                    successors.push((local, p));
                }
                row.push(LocalChoice { action: a, successors, cost: choice.cost });
            }
            if row.is_empty() {
                return Err(Error::Invalid(format!("component state {} keeps no action", m.states[s])));
            }
            choices.push(row);
        }
        Ok(CycleModel {
            states: c.states.clone(),
            names: c.states.iter().map(|&s| m.states[s].clone()).collect(),
            choices,
            marker: c.states.iter().map(|&s| markers[s]).collect(),
            rmax: m.rmax,
            dense_limit: DENSE_LIMIT,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Local position of an enclosing-MDP state.
    pub fn local(&self, state: usize) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// Number of memoryless deterministic policies (as a float; may be huge).
    pub fn policy_count(&self) -> f64 {
        self.choices.iter().map(|c| c.len() as f64).product()
    }

    /// Global action ids chosen by `policy`, aligned with `states`.
    pub fn actions_of(&self, policy: &[usize]) -> Vec<usize> {
        policy.iter().enumerate().map(|(i, &k)| self.choices[i][k].action).collect()
    }

    /// Policy choosing the given global action id at every state.
    pub fn policy_from_actions(&self, actions: &[usize]) -> Result<MemorylessPolicy> {
        actions
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                self.choices[i]
                    .iter()
                    .position(|c| c.action == a)
                    .ok_or_else(|| Error::Invalid(format!("action #{a} is not retained at {}", self.names[i])))
            })
            .collect()
    }

    /// Rows of the chain induced by `policy`.
    pub fn rows(&self, policy: &[usize]) -> Vec<Vec<(usize, f64)>> {
        policy.iter().enumerate().map(|(i, &k)| self.choices[i][k].successors.clone()).collect()
    }

    fn costs(&self, policy: &[usize]) -> Vec<f64> {
        policy.iter().enumerate().map(|(i, &k)| self.choices[i][k].cost).collect()
    }

    fn graph(&self, policy: &[usize]) -> Vec<Vec<usize>> {
        self.rows(policy).into_iter().map(|r| r.into_iter().map(|(j, _)| j).collect()).collect()
    }

    /// Recurrent classes of the chain induced by `policy`.
    pub fn recurrent_classes(&self, policy: &[usize]) -> Vec<Vec<usize>> {
        closed_classes(&self.graph(policy))
    }

    /// A policy under which every state reaches `target` almost surely,
    /// keeping `keep` where given (lowest choice index otherwise).
    fn route_to(&self, target: &[bool], keep: &[Option<usize>]) -> MemorylessPolicy {
        let n = self.len();
        let mut policy: Vec<Option<usize>> = keep.to_vec();
        let mut attracted: Vec<bool> = (0..n).map(|i| target[i] && keep[i].is_some()).collect();
        loop {
            let mut layer = Vec::new();
            for i in 0..n {
                if attracted[i] {
                    continue;
                }
                if let Some(k) = self.choices[i].iter().position(|c| c.successors.iter().any(|&(j, _)| attracted[j])) {
                    layer.push((i, k));
                }
            }
            if layer.is_empty() {
                break;
            }
            for (i, k) in layer {
                attracted[i] = true;
                policy[i] = Some(k);
            }
        }
        policy.into_iter().map(|k| k.unwrap_or(0)).collect()
    }
}

/// Evaluates `policy` by the stationary renewal-reward ratio.
///
/// Fails with an assumption-4 violation if the induced chain has more than
/// one recurrent class, and with a divergence error if its recurrent class
/// contains no marker.
pub fn evaluate_acpc(cm: &CycleModel, policy: &[usize]) -> Result<AcpcValue> {
    let classes = cm.recurrent_classes(policy);
    if classes.len() != 1 {
        let sizes: Vec<String> = classes.iter().map(|c| c.len().to_string()).collect();
        return Err(Error::assumption(
            4,
            format!("policy induces {} recurrent classes (sizes {})", classes.len(), sizes.join(", ")),
        ));
    }
    let class = &classes[0];
    let Some(reference) = class.iter().copied().find(|&i| cm.marker[i]) else {
        return Err(Error::Divergent("the recurrent class contains no marker state".into()));
    };
    let rows = cm.rows(policy);
    let costs = cm.costs(policy);
    let rho = linalg::stationary(&rows, cm.dense_limit)
        .ok_or_else(|| Error::Divergent("stationary distribution could not be computed".into()))?;
    let cost: f64 = rho.iter().zip(&costs).map(|(p, c)| p * c).sum();
    let rate: f64 = rho.iter().zip(&cm.marker).filter(|(_, &m)| m).map(|(p, _)| p).sum();
    if rate <= 1e-15 {
        return Err(Error::Divergent("markers are visited with zero frequency".into()));
    }
    let j = cost / rate;
    let r: Vec<f64> = (0..cm.len()).map(|i| costs[i] - if cm.marker[i] { j } else { 0.0 }).collect();
    let (_, h) = linalg::relative_values(&rows, &r, reference, cm.dense_limit)
        .ok_or_else(|| Error::Divergent("relative values could not be computed".into()))?;
    Ok(AcpcValue { j, per_state: h, horizon: Horizon::Infinite })
}

/// Ratio of cost to marker frequency on one closed class, using its own
/// stationary distribution; `None` when the class holds no marker.
fn class_ratio(cm: &CycleModel, policy: &[usize], class: &[usize]) -> Option<f64> {
    if !class.iter().any(|&i| cm.marker[i]) {
        return None;
    }
    let pos: Vec<Option<usize>> = {
        let mut pos = vec![None; cm.len()];
        for (k, &i) in class.iter().enumerate() {
            pos[i] = Some(k);
        }
        pos
    };
    let rows: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&i| cm.choices[i][policy[i]].successors.iter().filter_map(|&(j, p)| pos[j].map(|k| (k, p))).collect())
        .collect();
    let rho = linalg::stationary(&rows, cm.dense_limit)?;
    let cost: f64 = class.iter().zip(&rho).map(|(&i, p)| p * cm.choices[i][policy[i]].cost).sum();
    let rate: f64 = class.iter().zip(&rho).filter(|(&i, _)| cm.marker[i]).map(|(_, p)| p).sum();
    (rate > 1e-15).then(|| cost / rate)
}

/// Gain and relative values of a possibly multichain policy under reward `r`.
struct MultichainValues {
    gain: Vec<f64>,
    bias: Vec<f64>,
}

fn evaluate_multichain(cm: &CycleModel, policy: &[usize], r: &[f64]) -> Option<MultichainValues> {
    let n = cm.len();
    let classes = cm.recurrent_classes(policy);
    let mut gain = vec![0.0; n];
    let mut bias = vec![0.0; n];
    let mut recurrent = vec![false; n];
    for class in &classes {
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in class.iter().enumerate() {
            pos[i] = k;
            recurrent[i] = true;
        }
        let rows: Vec<Vec<(usize, f64)>> = class
            .iter()
            .map(|&i| cm.choices[i][policy[i]].successors.iter().map(|&(j, p)| (pos[j], p)).collect())
            .collect();
        let rr: Vec<f64> = class.iter().map(|&i| r[i]).collect();
        let (g, h) = linalg::relative_values(&rows, &rr, 0, cm.dense_limit)?;
        for (k, &i) in class.iter().enumerate() {
            gain[i] = g;
            bias[i] = h[k];
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !recurrent[i]).collect();
    if !transient.is_empty() {
        let t = transient.len();
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in transient.iter().enumerate() {
            pos[i] = k;
        }
        let mut a = DMatrix::<f64>::identity(t, t);
        let mut bg = DVector::<f64>::zeros(t);
        for (k, &i) in transient.iter().enumerate() {
            for &(j, p) in &cm.choices[i][policy[i]].successors {
                if recurrent[j] {
                    bg[k] += p * gain[j];
                } else {
                    a[(k, pos[j])] -= p;
                }
            }
        }
        let lu = a.lu();
        let gt = lu.solve(&bg)?;
        for (k, &i) in transient.iter().enumerate() {
            gain[i] = gt[k];
        }
        let mut bh = DVector::<f64>::zeros(t);
        for (k, &i) in transient.iter().enumerate() {
            bh[k] = r[i] - gain[i];
            for &(j, p) in &cm.choices[i][policy[i]].successors {
                if recurrent[j] {
                    bh[k] += p * bias[j];
                }
            }
        }
        let ht = lu.solve(&bh)?;
        for (k, &i) in transient.iter().enumerate() {
            bias[i] = ht[k];
        }
    }
    Some(MultichainValues { gain, bias })
}

/// Minimizes the average of reward `r_λ(s,a) = c(s,a) − λ·[s marker]` by
/// multichain policy iteration, starting from `policy`.
fn minimize_gain(cm: &CycleModel, lambda: f64, mut policy: MemorylessPolicy) -> Result<(MemorylessPolicy, MultichainValues)> {
    let n = cm.len();
    let reward = |i: usize, c: &LocalChoice| c.cost - if cm.marker[i] { lambda } else { 0.0 };
    let guard = 10_000 + 100 * n;
    for _ in 0..guard {
        let r: Vec<f64> = (0..n).map(|i| reward(i, &cm.choices[i][policy[i]])).collect();
        let v = evaluate_multichain(cm, &policy, &r)
            .ok_or_else(|| Error::Divergent("policy evaluation failed".into()))?;
        let expect = |c: &LocalChoice, x: &[f64]| c.successors.iter().map(|&(j, p)| p * x[j]).sum::<f64>();
        let mut changed = false;
        for i in 0..n {
            let current = expect(&cm.choices[i][policy[i]], &v.gain);
            let (best, value) = argmin(cm.choices[i].iter().map(|c| expect(c, &v.gain)));
            if value < current - IMPROVEMENT_TOL {
                policy[i] = best;
                changed = true;
            }
        }
        if !changed {
            for i in 0..n {
                let q = |c: &LocalChoice| reward(i, c) + expect(c, &v.bias);
                let current = q(&cm.choices[i][policy[i]]);
                let (best, value) = argmin(cm.choices[i].iter().map(|c| {
                    if expect(c, &v.gain) <= v.gain[i] + IMPROVEMENT_TOL {
                        q(c)
                    } else {
                        f64::INFINITY
                    }
                }));
                if value < current - IMPROVEMENT_TOL {
                    policy[i] = best;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok((policy, v));
        }
    }
    Err(Error::Invalid("policy iteration did not converge".into()))
}

/// Lowest index attaining the minimum (up to [`TIE_TOL`]).
fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let values: Vec<f64> = values.collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let idx = values.iter().position(|&v| v <= min + TIE_TOL).unwrap_or(0);
    (idx, values[idx])
}

/// Result of [`optimize_acpc`].
#[derive(Debug, Clone, PartialEq)]
pub struct AcpcSolution {
    pub policy: MemorylessPolicy,
    pub value: AcpcValue,
    /// Cost per cycle after each outer iteration (non-increasing).
    pub history: Vec<f64>,
}

/// Minimal average cost per cycle over memoryless policies.
///
/// Policy iteration on the cycle-reset equation
/// `h(s) = c(s,f(s)) − J·[s marker] + Σ P h`: the incumbent ratio `J` is fixed,
/// per-state improvements are applied until none is strict, and `J` is
/// re-evaluated. Intermediate policies may have several recurrent classes;
/// they are handled by multichain evaluation, and the best class is then
/// completed into a unichain policy by routing every other state into it.
/// The returned policy is always unichain.
pub fn optimize_acpc(cm: &CycleModel) -> Result<AcpcSolution> {
    let n = cm.len();
    let Some(first_marker) = cm.marker.iter().position(|&m| m) else {
        return Err(Error::Divergent("the component contains no marker state".into()));
    };
    let mut target = vec![false; n];
    target[first_marker] = true;
    let mut keep = vec![None; n];
    keep[first_marker] = Some(0);
    let mut current = cm.route_to(&target, &keep);
    let mut value = evaluate_acpc(cm, &current)?;
    let mut history = vec![value.j];
    let guard = 10_000 + 100 * n;
    for _ in 0..guard {
        let (candidate, v) = minimize_gain(cm, value.j, current.clone())?;
        let min_gain = v.gain.iter().copied().fold(f64::INFINITY, f64::min);
        if min_gain >= -IMPROVEMENT_TOL {
            break;
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for class in cm.recurrent_classes(&candidate) {
            if let Some(ratio) = class_ratio(cm, &candidate, &class) {
                if best.as_ref().is_none_or(|(b, _)| ratio < *b - TIE_TOL) {
                    best = Some((ratio, class));
                }
            }
        }
        let Some((ratio, class)) = best else { break };
        if ratio >= value.j - TIE_TOL {
            break;
        }
        let mut target = vec![false; n];
        let mut keep = vec![None; n];
        for &i in &class {
            target[i] = true;
            keep[i] = Some(candidate[i]);
        }
        // States outside the class keep their improved action when it already
        // leads into the class; the rest are routed there.
        let routed = cm.route_to(&target, &keep);
        current = routed;
        value = evaluate_acpc(cm, &current)?;
        history.push(value.j);
    }
    Ok(AcpcSolution { policy: current, value, history })
}

/// Precomputed `T`-cycle evaluator for one policy.
struct FirstPassage {
    /// States reachable from the start, as local positions.
    members: Vec<usize>,
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Transition mass into markers: `(row, column, p)` within `members`.
    into_marker: Vec<(usize, usize, f64)>,
    cost: DVector<f64>,
    pos: Vec<usize>,
}

impl FirstPassage {
    fn new(cm: &CycleModel, policy: &[usize], start: usize) -> Result<Self> {
        let graph = cm.graph(policy);
        let reach = reachable_from(&graph, &[start]);
        let members: Vec<usize> = (0..cm.len()).filter(|&i| reach[i]).collect();
        let mut pred = vec![Vec::new(); cm.len()];
        for (i, succ) in graph.iter().enumerate() {
            for &j in succ {
                pred[j].push(i);
            }
        }
        let markers: Vec<usize> = (0..cm.len()).filter(|&i| cm.marker[i]).collect();
        let can_finish = reachable_from(&pred, &markers);
        if let Some(&bad) = members.iter().find(|&&i| !can_finish[i]) {
            return Err(Error::Divergent(format!("no cycle can be completed from {}", cm.names[bad])));
        }
        let mut pos = vec![usize::MAX; cm.len()];
        for (k, &i) in members.iter().enumerate() {
            pos[i] = k;
        }
        let m = members.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut into_marker = Vec::new();
        let mut cost = DVector::<f64>::zeros(m);
        for (k, &i) in members.iter().enumerate() {
            let choice = &cm.choices[i][policy[i]];
            cost[k] = choice.cost;
            for &(j, p) in &choice.successors {
                if cm.marker[j] {
                    into_marker.push((k, pos[j], p));
                } else {
                    a[(k, pos[j])] -= p;
                }
            }
        }
        Ok(FirstPassage { members, lu: a.lu(), into_marker, cost, pos })
    }

    /// Expected cost until the `t`-th marker entry, from every member state.
    fn values(&self, t: usize) -> Result<DVector<f64>> {
        let m = self.members.len();
        let mut v = DVector::<f64>::zeros(m);
        for _ in 0..t {
            let mut b = self.cost.clone();
            for &(k, j, p) in &self.into_marker {
                b[k] += p * v[j];
            }
            v = self.lu.solve(&b).ok_or_else(|| Error::Divergent("first-passage system is singular".into()))?;
        }
        Ok(v)
    }
}

/// `J^{f,T}(start)`: expected cost until the `T`-th cycle completion, divided by `T`.
pub fn evaluate_t_cycle_acpc(cm: &CycleModel, policy: &[usize], t: usize, start: usize) -> Result<AcpcValue> {
    if t == 0 {
        return Err(Error::Invalid("the cycle horizon must be positive".into()));
    }
    let fp = FirstPassage::new(cm, policy, start)?;
    let v = fp.values(t)?;
    let mut per_state = vec![f64::NAN; cm.len()];
    for (k, &i) in fp.members.iter().enumerate() {
        per_state[i] = v[k] / t as f64;
    }
    Ok(AcpcValue { j: v[fp.pos[start]] / t as f64, per_state, horizon: Horizon::Cycles(t) })
}

fn t_cycle_value(cm: &CycleModel, policy: &[usize], t: usize, start: usize) -> f64 {
    FirstPassage::new(cm, policy, start)
        .and_then(|fp| fp.values(t).map(|v| v[fp.pos[start]] / t as f64))
        .unwrap_or(f64::INFINITY)
}

/// Result of [`optimize_t_cycle`].
#[derive(Debug, Clone, PartialEq)]
pub struct TCycleSolution {
    pub policy: MemorylessPolicy,
    pub value: AcpcValue,
    /// True when every memoryless policy was evaluated.
    pub exhaustive: bool,
    pub evaluated: u64,
    /// Optimal value over cycle-dependent policies; no memoryless policy does better.
    pub lower_bound: f64,
}

impl TCycleSolution {
    /// True when the policy is known to be optimal among memoryless policies.
    pub fn certified(&self) -> bool {
        self.exhaustive || self.value.j <= self.lower_bound + 1e-9
    }
}

/// Optimal `T`-cycle value from `start` when the action may depend on the
/// number of completed cycles: backward induction over cycles, each stage a
/// shortest-path problem into the markers solved by value iteration.
pub fn t_cycle_lower_bound(cm: &CycleModel, t: usize, start: usize) -> f64 {
    let n = cm.len();
    let mut previous = vec![0.0; n];
    for _ in 0..t {
        let mut v = vec![0.0; n];
        for _ in 0..1_000_000 {
            let mut diff: f64 = 0.0;
            for i in 0..n {
                let best = cm.choices[i]
                    .iter()
                    .map(|c| {
                        c.cost
                            + c.successors
                                .iter()
                                .map(|&(j, p)| p * if cm.marker[j] { previous[j] } else { v[j] })
                                .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                diff = diff.max((best - v[i]).abs());
                v[i] = best;
            }
            if diff < 1e-13 {
                break;
            }
        }
        previous = v;
    }
    previous[start] / t as f64
}

/// Default bound on the number of policies enumerated by [`optimize_t_cycle`].
pub const ENUMERATION_LIMIT: f64 = 1e6;

fn decode(cm: &CycleModel, mut index: u64) -> MemorylessPolicy {
    let mut policy = vec![0; cm.len()];
    for i in (0..cm.len()).rev() {
        let radix = cm.choices[i].len() as u64;
        policy[i] = (index % radix) as usize;
        index /= radix;
    }
    policy
}

/// Optimal `T`-cycle policy from `start`.
///
/// Enumerates every memoryless policy when there are at most `limit`;
/// ties go to the lexicographically smallest policy. Otherwise starts from
/// the infinite-horizon optimum and improves one state at a time until no
/// single change lowers the value. Such a result is a local optimum unless it
/// meets [`t_cycle_lower_bound`].
pub fn optimize_t_cycle(cm: &CycleModel, t: usize, start: usize, limit: f64) -> Result<TCycleSolution> {
    let count = cm.policy_count();
    if count <= limit {
        let total = count as u64;
        let (value, index) = (0..total)
            .into_par_iter()
            .map(|idx| (t_cycle_value(cm, &decode(cm, idx), t, start), idx))
            .reduce(
                || (f64::INFINITY, u64::MAX),
                |a, b| {
                    if b.0 < a.0 - TIE_TOL || ((b.0 - a.0).abs() <= TIE_TOL && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            );
        if !value.is_finite() {
            return Err(Error::Divergent("no policy completes cycles from the start state".into()));
        }
        let policy = decode(cm, index);
        let value = evaluate_t_cycle_acpc(cm, &policy, t, start)?;
        let lower_bound = t_cycle_lower_bound(cm, t, start);
        return Ok(TCycleSolution { policy, value, exhaustive: true, evaluated: total, lower_bound });
    }
    let mut policy = optimize_acpc(cm)?.policy;
    let mut best = t_cycle_value(cm, &policy, t, start);
    let mut evaluated = 1u64;
    loop {
        let mut improved = false;
        for i in 0..cm.len() {
            for k in 0..cm.choices[i].len() {
                if k == policy[i] {
                    continue;
                }
                let previous = policy[i];
                policy[i] = k;
                let v = t_cycle_value(cm, &policy, t, start);
                evaluated += 1;
                if v < best - IMPROVEMENT_TOL {
                    best = v;
                    improved = true;
                } else {
                    policy[i] = previous;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let value = evaluate_t_cycle_acpc(cm, &policy, t, start)?;
    let lower_bound = t_cycle_lower_bound(cm, t, start);
    Ok(TCycleSolution { policy, value, exhaustive: false, evaluated, lower_bound })
}

/// Smallest `T` with `J^{g,T}(start) − J^g < ε`, and the gaps evaluated on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingCycle {
    pub t: usize,
    pub gaps: Vec<(usize, f64)>,
}

/// Default cap on the ε-mixing cycle search.
pub const MIXING_CAP: usize = 100_000;

/// Searches the ε-mixing cycle of `policy` by doubling, then bisection.
pub fn estimate_mixing_cycle(cm: &CycleModel, policy: &[usize], epsilon: f64, start: usize, cap: usize) -> Result<MixingCycle> {
    let j = evaluate_acpc(cm, policy)?.j;
    let fp = FirstPassage::new(cm, policy, start)?;
    let s = fp.pos[start];
    let mut gaps = Vec::new();
    let mut gap_at = |t: usize| -> Result<f64> {
        let g = fp.values(t)?[s] / t as f64 - j;
        gaps.push((t, g));
        Ok(g)
    };
    let mut hi = 1;
    loop {
        if gap_at(hi)? < epsilon {
            break;
        }
        if hi >= cap {
            let trace: Vec<String> = gaps.iter().map(|(t, g)| format!("T={t}: {g:.6}")).collect();
            return Err(Error::Invalid(format!(
                "ε-mixing cycle exceeds the cap {cap}; gaps: {}",
                trace.join(", ")
            )));
        }
        hi = (hi * 2).min(cap);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if gap_at(mid)? < epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    gaps.sort_by_key(|g| g.0);
    gaps.dedup_by_key(|g| g.0);
    Ok(MixingCycle { t: hi, gaps })
}

/// Piecewise product policy: `cycle` (action ids aligned with `c.states`)
/// inside the component, `reach.policy` outside it.
///
/// Fails if a state reachable from the initial state under the assembled
/// policy has no action.
pub fn assemble_policy(p: &ProductMdp, reach: &ReachabilityResult, c: &EndComponent, cycle: &[usize]) -> Result<Vec<Option<usize>>> {
    let m = &p.mdp;
    let mut policy: Vec<Option<usize>> = reach.policy.clone();
    for (k, &s) in c.states.iter().enumerate() {
        policy[s] = Some(cycle[k]);
    }
    let mut seen = BTreeSet::from([m.initial]);
    let mut stack = vec![m.initial];
    while let Some(s) = stack.pop() {
        let Some(a) = policy[s] else {
            return Err(Error::Invalid(format!("assembled policy does not cover reachable state {}", m.states[s])));
        };
        let choice = m.choice(s, a).ok_or_else(|| Error::UnavailableAction {
            state: m.states[s].clone(),
            action: m.actions[a].clone(),
        })?;
        for &(t, pr) in &choice.successors {
            if pr > 0.0 && seen.insert(t) {
                stack.push(t);
            }
        }
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::maximal_end_components;
    use crate::mdp::{parse_model, LabeledMdp};

    fn whole(m: &LabeledMdp) -> CycleModel {
        let markers: Vec<bool> = (0..m.num_states()).map(|s| m.has_label(s, "pi")).collect();
        let c = &maximal_end_components(m, &vec![true; m.num_states()])[0];
        CycleModel::new(m, c, &markers).unwrap()
    }

    #[test]
    fn self_loop_costs_its_cost() {
        let m = parse_model("state s label pi\ninitial s\ntrans s a s 1 cost 0.7\n").unwrap();
        let cm = whole(&m);
        assert!((optimize_acpc(&cm).unwrap().value.j - 0.7).abs() < 1e-12);
        assert!((evaluate_t_cycle_acpc(&cm, &[0], 5, 0).unwrap().j - 0.7).abs() < 1e-12);
    }

    #[test]
    fn two_state_loop() {
        let m = parse_model("state s0 label pi\nstate s1\ninitial s0\ntrans s0 a s1 1 cost 1\ntrans s1 a s0 1 cost 2\n").unwrap();
        let cm = whole(&m);
        let v = evaluate_acpc(&cm, &[0, 0]).unwrap();
        assert!((v.j - 3.0).abs() < 1e-12);
        assert_eq!(v.horizon, Horizon::Infinite);
    }

    #[test]
    fn picks_the_cheaper_cycle() {
        // a: short expensive loop, b: two-step cheap loop
        let m = parse_model(
            "state s0 label pi\nstate s1\ninitial s0\n\
             trans s0 a s0 1 cost 3\ntrans s0 b s1 1 cost 1\ntrans s1 a s0 1 cost 1\n",
        )
        .unwrap();
        let cm = whole(&m);
        let sol = optimize_acpc(&cm).unwrap();
        assert!((sol.value.j - 2.0).abs() < 1e-12);
        assert_eq!(cm.actions_of(&sol.policy)[0], m.action_index("b").unwrap());
        let t = optimize_t_cycle(&cm, 3, 0, ENUMERATION_LIMIT).unwrap();
        assert!(t.exhaustive && t.certified());
        assert!((t.value.j - 2.0).abs() < 1e-12);
        assert!(t.lower_bound <= t.value.j + 1e-12);
    }

    #[test]
    fn no_marker_diverges() {
        let m = parse_model("state s\ninitial s\ntrans s a s 1 cost 1\n").unwrap();
        let c = &maximal_end_components(&m, &[true])[0];
        let cm = CycleModel::new(&m, c, &[false]).unwrap();
        assert!(matches!(optimize_acpc(&cm), Err(Error::Divergent(_))));
    }

    #[test]
    fn deterministic_cycle_mixes_at_once() {
        let m = parse_model("state s0 label pi\nstate s1\ninitial s0\ntrans s0 a s1 1 cost 1\ntrans s1 a s0 1 cost 2\n").unwrap();
        let cm = whole(&m);
        let mix = estimate_mixing_cycle(&cm, &[0, 0], 0.01, 0, MIXING_CAP).unwrap();
        assert_eq!(mix.t, 1);
    }

    #[test]
    fn t_cycle_matches_hand_computation() {
        // from s0: cost 1, then back to s0 w.p. 1/2 (cycle) or to s1 (cost 2, then s0)
        let m = parse_model(
            "state s0 label pi\nstate s1\ninitial s0\n\
             trans s0 a s0 0.5 cost 1\ntrans s0 a s1 0.5 cost 1\ntrans s1 a s0 1 cost 2\n",
        )
        .unwrap();
        let cm = whole(&m);
        let v = evaluate_t_cycle_acpc(&cm, &[0, 0], 1, 0).unwrap();
        assert!((v.j - 2.0).abs() < 1e-12);
        assert!((evaluate_acpc(&cm, &[0, 0]).unwrap().j - 2.0).abs() < 1e-12);
    }
}
