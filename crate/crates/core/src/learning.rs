//! Learning the transition probabilities inside accepting end components and
//! synthesizing the cycle policy on the learned model.
//!
//! Counts are kept on base-model transitions `(s, a, s')`; a product state is
//! known when every base transition it can take inside its component is known.

use std::collections::{BTreeMap, HashMap};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::acpc::{self, CycleModel, ENUMERATION_LIMIT, MIXING_CAP};
use crate::automata::Dra;
use crate::error::{Error, Result};
use crate::graph::{self, EndComponent};
use crate::mdp::{Choice, LabeledMdp, TransitionSystem};
use crate::product::{build_product, project_policy, FiniteMemoryPolicy, ProductMdp};
use crate::simulation::Simulator;
use crate::synthesis::restrict_to_reachable;

/// Maximum-likelihood estimate of one row `P(s, a, ·)` over its declared support.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEstimate {
    pub total: u64,
    /// Successor and its count, in support order.
    pub counts: Vec<(usize, u64)>,
    /// Cost observed on the first sample.
    pub cost: Option<f64>,
}

/// `c(n − c) / (n² (n + 1))` for `c` of `n` samples.
pub fn ml_variance(count: u64, total: u64) -> f64 {
    if total == 0 {
        return f64::INFINITY;
    }
    let (c, n) = (count as f64, total as f64);
    c * (n - c) / (n * n * (n + 1.0))
}

impl TransitionEstimate {
    pub fn new(support: &[usize]) -> Self {
        TransitionEstimate { total: 0, counts: support.iter().map(|&t| (t, 0)).collect(), cost: None }
    }

    /// Records one observed successor and cost.
    pub fn update(&mut self, next: usize, cost: f64) -> Result<()> {
        let Some(slot) = self.counts.iter_mut().find(|(t, _)| *t == next) else {
            return Err(Error::StructureViolation(format!("successor #{next} is outside the declared support")));
        };
        match self.cost {
            Some(c) if c != cost => {
                return Err(Error::StructureViolation(format!("cost changed from {c} to {cost}")));
            }
            _ => self.cost = Some(cost),
        }
        slot.1 += 1;
        self.total += 1;
        Ok(())
    }

    pub fn mean(&self, next: usize) -> f64 {
        match self.counts.iter().find(|(t, _)| *t == next) {
            Some(&(_, c)) if self.total > 0 => c as f64 / self.total as f64,
            _ => 0.0,
        }
    }

    pub fn variance(&self, next: usize) -> f64 {
        self.counts.iter().find(|(t, _)| *t == next).map_or(0.0, |&(_, c)| ml_variance(c, self.total))
    }

    /// Known when every support successor has been seen and each satisfies
    /// `σ² k ≤ θ`.
    pub fn is_known(&self, crit: &KnownnessCriterion) -> bool {
        self.total > 0
            && self.counts.iter().all(|&(_, c)| c > 0 && ml_variance(c, self.total) * crit.k <= crit.theta())
    }
}

/// The accuracy threshold `θ = ε / (N T R_max D²)` and critical value `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownnessCriterion {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub t: usize,
    pub rmax: f64,
    pub d: usize,
    pub k: f64,
    /// Multiplies `θ`; values above one relax the criterion.
    pub theta_scale: f64,
}

/// One-sided standard-normal quantile `z_{1−δ}`.
pub fn critical_value(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!("confidence parameter δ = {delta} must lie in (0,1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - delta))
}

impl KnownnessCriterion {
    pub fn new(epsilon: f64, delta: f64, n: usize, t: usize, rmax: f64, d: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Invalid(format!("accuracy ε = {epsilon} must be positive")));
        }
        if n == 0 || t == 0 || d == 0 || !(rmax > 0.0) {
            return Err(Error::Invalid("N, T, R_max and D must be positive".into()));
        }
        Ok(KnownnessCriterion { epsilon, delta, n, t, rmax, d, k: critical_value(delta)?, theta_scale: 1.0 })
    }

    pub fn theta(&self) -> f64 {
        self.theta_scale * self.epsilon / (self.n as f64 * self.t as f64 * self.rmax * (self.d * self.d) as f64)
    }

    /// Samples of a row with two equally likely successors needed to become known.
    pub fn worst_case_samples(&self) -> u64 {
        let mut n: u64 = 1;
        while ml_variance(n / 2, n) * self.k > self.theta() || n % 2 == 1 {
            n += 1;
        }
        n
    }
}

/// Counts for every transition of the structure.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub rows: BTreeMap<(usize, usize), TransitionEstimate>,
}

impl Estimates {
    pub fn new(ts: &TransitionSystem) -> Self {
        let mut rows = BTreeMap::new();
        for s in 0..ts.states.len() {
            for a in ts.enabled(s) {
                rows.insert((s, a), TransitionEstimate::new(&ts.successors(s, a)));
            }
        }
        Estimates { rows }
    }

    pub fn is_known(&self, s: usize, a: usize, crit: &KnownnessCriterion) -> bool {
        self.rows.get(&(s, a)).is_some_and(|e| e.is_known(crit))
    }

    /// The learned model: ML means over the structure. Rows never sampled
    /// are uniform over their support with zero cost.
    pub fn model(&self, ts: &TransitionSystem, rmax: f64) -> LabeledMdp {
        let mut choices = vec![Vec::new(); ts.states.len()];
        for (&(s, a), est) in &self.rows {
            let successors = if est.total == 0 {
                let p = 1.0 / est.counts.len() as f64;
                est.counts.iter().map(|&(t, _)| (t, p)).collect()
            } else {
                est.counts.iter().map(|&(t, c)| (t, c as f64 / est.total as f64)).collect()
            };
            choices[s].push(Choice { action: a, successors, cost: est.cost.unwrap_or(0.0) });
        }
        LabeledMdp {
            states: ts.states.clone(),
            initial: ts.initial,
            actions: ts.actions.clone(),
            choices,
            labels: ts.labels.clone(),
            rmax,
        }
    }
}

/// Exploration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Cycle horizon `T`; `None` bootstraps it from the learned model.
    pub mixing_cycles: Option<usize>,
    /// Overrides `z_{1−δ}`.
    pub critical_value: Option<f64>,
    pub theta_scale: f64,
    /// Overrides `N = |S|`.
    pub n_override: Option<usize>,
    /// Overrides the cost bound of the structure (1 when it declares none).
    pub rmax: Option<f64>,
    /// Maximum number of simulator steps.
    pub budget: u64,
    /// Steps between recomputations of the exploration policy.
    pub recompute_period: u64,
    pub enumeration_limit: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            epsilon: 0.35,
            delta: 0.1,
            mixing_cycles: None,
            critical_value: None,
            theta_scale: 1.0,
            n_override: None,
            rmax: None,
            budget: 100_000_000,
            recompute_period: 500,
            enumeration_limit: ENUMERATION_LIMIT,
        }
    }
}

/// Maps between the structure's ids and the simulator's ids by name.
#[derive(Debug, Clone)]
struct Alignment {
    state_from_sim: Vec<usize>,
    action_to_sim: Vec<usize>,
}

impl Alignment {
    fn new(ts: &TransitionSystem, sim: &Simulator) -> Result<Self> {
        let ids: HashMap<&str, usize> = ts.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let state_from_sim = (0..sim.num_states())
            .map(|s| {
                ids.get(sim.state_name(s))
                    .copied()
                    .ok_or_else(|| Error::StructureViolation(format!("state {} is not declared", sim.state_name(s))))
            })
            .collect::<Result<_>>()?;
        let action_to_sim = ts
            .actions
            .iter()
            .map(|a| sim.action_index(a).ok_or_else(|| Error::StructureViolation(format!("action {a} is unknown to the simulator"))))
            .collect::<Result<_>>()?;
        Ok(Alignment { state_from_sim, action_to_sim })
    }
}

/// Progress of one exploration phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplorationReport {
    pub steps: u64,
    pub cycles: u64,
    pub complete: bool,
    /// `(steps, known component states)` sampled every recompute period.
    pub progress: Vec<(u64, usize)>,
    /// Names of component states still unknown.
    pub unknown: Vec<String>,
}

/// The learner's view while walking the structural product.
struct Walker<'a> {
    sim: &'a mut Simulator,
    align: &'a Alignment,
    p: &'a ProductMdp,
    x: usize,
    q: usize,
    steps: u64,
    cycles: u64,
}

impl Walker<'_> {
    fn start(&mut self) -> Result<()> {
        let s = self.align.state_from_sim[self.sim.restart()];
        self.q = self.p.dra.initial;
        self.x = self.p.index_of(s, self.q).ok_or_else(|| Error::StructureViolation("initial state mismatch".into()))?;
        Ok(())
    }

    /// Plays `a` (structure id); returns the base transition observed.
    fn play(&mut self, a: usize, est: &mut Estimates) -> Result<()> {
        let (s, q) = self.p.origin[self.x];
        let step = self.sim.step(self.align.action_to_sim[a])?;
        let t = self.align.state_from_sim[step.next];
        est.rows
            .get_mut(&(s, a))
            .ok_or_else(|| Error::StructureViolation(format!("action {a} is not declared at state #{s}")))?
            .update(t, step.cost)?;
        self.q = self.p.dra.step(q, self.p.symbols[s]);
        self.x = self.p.index_of(t, self.q).ok_or_else(|| {
            Error::StructureViolation(format!("observed successor {} is outside the declared structure", self.p.mdp.states[self.x]))
        })?;
        self.steps += 1;
        if step.cycle_completed {
            self.cycles += 1;
        }
        Ok(())
    }
}

/// Learned view of a component: the retained actions with learned probabilities.
fn component_mdp(p: &ProductMdp, c: &EndComponent, est: &Estimates) -> LabeledMdp {
    let choices = c
        .states
        .iter()
        .zip(&c.actions)
        .map(|(&x, acts)| {
            let (s, _) = p.origin[x];
            acts.iter()
                .filter_map(|&a| {
                    let row = p.mdp.choice(x, a)?;
                    let e = est.rows.get(&(s, a))?;
                    let successors = row
                        .successors
                        .iter()
                        .filter_map(|&(y, _)| {
                            let local = c.position(y)?;
                            let pr = if e.total == 0 { 1.0 } else { e.mean(p.origin[y].0) };
                            (pr > 0.0).then_some((local, pr))
                        })
                        .collect();
                    Some(Choice { action: a, successors, cost: 0.0 })
                })
                .collect()
        })
        .collect();
    LabeledMdp {
        states: c.states.iter().map(|&x| p.mdp.states[x].clone()).collect(),
        initial: 0,
        actions: p.mdp.actions.clone(),
        choices,
        labels: vec![Default::default(); c.len()],
        rmax: 0.0,
    }
}

/// Explores `c` until all of its states are known or `budget` steps are used.
///
/// The walker must already be inside `c`. Unknown states play their retained
/// actions in round-robin order; known states follow a policy maximizing the
/// learned probability of reaching an unknown state.
fn explore(
    w: &mut Walker<'_>,
    c: &EndComponent,
    est: &mut Estimates,
    crit: &KnownnessCriterion,
    budget: u64,
    period: u64,
) -> Result<ExplorationReport> {
    let p = w.p;
    let mut report = ExplorationReport::default();
    let mut turn = vec![0usize; c.len()];
    let known_at = |est: &Estimates, i: usize| {
        let (s, _) = p.origin[c.states[i]];
        c.actions[i].iter().all(|&a| est.is_known(s, a, crit))
    };
    let mut known: Vec<bool> = (0..c.len()).map(|i| known_at(est, i)).collect();
    let mut guide: Vec<Option<usize>> = vec![None; c.len()];
    let mut since = u64::MAX;
    let (steps0, cycles0) = (w.steps, w.cycles);
    loop {
        if known.iter().all(|&k| k) {
            report.complete = true;
            break;
        }
        if w.steps - steps0 >= budget {
            break;
        }
        if since >= period {
            let target: Vec<bool> = known.iter().map(|k| !k).collect();
            let m = component_mdp(p, c, est);
            guide = graph::max_reach_probability(&m, &target).policy;
            report.progress.push((w.steps - steps0, known.iter().filter(|&&k| k).count()));
            since = 0;
        }
        let i = c.position(w.x).ok_or_else(|| Error::Invalid("exploration left the end component".into()))?;
        let a = if known[i] {
            guide[i].unwrap_or(c.actions[i][0])
        } else {
            let a = c.actions[i][turn[i] % c.actions[i].len()];
            turn[i] += 1;
            a
        };
        w.play(a, est)?;
        since += 1;
        if !known[i] {
            known[i] = known_at(est, i);
        }
    }
    report.steps = w.steps - steps0;
    report.cycles = w.cycles - cycles0;
    report.progress.push((report.steps, known.iter().filter(|&&k| k).count()));
    report.unknown = (0..c.len()).filter(|&i| !known[i]).map(|i| p.mdp.states[c.states[i]].clone()).collect();
    Ok(report)
}

/// Learns the transitions of one accepting end component of the structural
/// product `p`, driving there from the initial state first.
pub fn explore_amec(
    sim: &mut Simulator,
    ts: &TransitionSystem,
    p: &ProductMdp,
    c: &EndComponent,
    est: &mut Estimates,
    crit: &KnownnessCriterion,
    budget: u64,
    period: u64,
) -> Result<ExplorationReport> {
    let align = Alignment::new(ts, sim)?;
    let mut w = Walker { sim, align: &align, p, x: 0, q: 0, steps: 0, cycles: 0 };
    drive_into(&mut w, c, est, budget)?;
    let used = w.steps;
    let mut report = explore(&mut w, c, est, crit, budget.saturating_sub(used), period)?;
    report.steps += used;
    Ok(report)
}

/// Restarts and follows the almost-sure reachability policy into `c`.
fn drive_into(w: &mut Walker<'_>, c: &EndComponent, est: &mut Estimates, budget: u64) -> Result<()> {
    let p = w.p;
    let reach = graph::max_reach_probability(&p.mdp, &c.mask(p.num_states()));
    w.start()?;
    let start = w.steps;
    while !c.contains(w.x) {
        let Some(a) = reach.policy[w.x] else {
            return Err(Error::assumption(3, format!("{} cannot reach the component", p.mdp.states[w.x])));
        };
        if w.steps - start >= budget {
            return Err(Error::BudgetExhausted("the component was not reached".into()));
        }
        w.play(a, est)?;
    }
    Ok(())
}

/// Per-component outcome of learning.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedComponent {
    pub index: usize,
    pub size: usize,
    pub entrance: String,
    pub d: usize,
    pub t: usize,
    pub theta: f64,
    pub exploration: ExplorationReport,
    /// `T`-cycle cost from the entrance on the learned model.
    pub j: f64,
    pub certified: bool,
    /// Action ids aligned with the component states.
    pub cycle_policy: Vec<usize>,
}

/// Outcome of [`model_learning_and_policy_finding`].
#[derive(Debug, Clone)]
pub struct LearningReport {
    pub structural_product: ProductMdp,
    pub components: Vec<EndComponent>,
    pub learned: Vec<LearnedComponent>,
    /// Components skipped, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub chosen: usize,
    pub model: LabeledMdp,
    pub estimates: Estimates,
    pub product_policy: Vec<Option<usize>>,
    pub policy: FiniteMemoryPolicy,
    pub steps: u64,
    pub cycles: u64,
    pub t: usize,
}

impl LearningReport {
    pub fn chosen(&self) -> &LearnedComponent {
        &self.learned[self.chosen]
    }
}

/// End-to-end learning: for every accepting end component, drive to its
/// entrance, learn it, and compute the optimal `T`-cycle policy on the learned
/// model; return the cheapest component's piecewise policy.
pub fn model_learning_and_policy_finding(
    sim: &mut Simulator,
    ts: &TransitionSystem,
    dra: &Dra,
    pi_label: &str,
    cfg: &LearningConfig,
) -> Result<LearningReport> {
    let align = Alignment::new(ts, sim)?;
    let structure = ts.uniform_mdp();
    let p = build_product(&structure, dra, pi_label)?;
    let components = graph::accepting_mecs(&p);
    if components.is_empty() {
        return Err(Error::Invalid("the product has no accepting end component".into()));
    }
    let rmax = cfg.rmax.or(ts.rmax.filter(|&r| r > 0.0)).unwrap_or(1.0);
    let n = cfg.n_override.unwrap_or(ts.states.len());
    let mut est = Estimates::new(ts);
    let mut learned = Vec::new();
    let mut skipped = Vec::new();
    let mut w = Walker { sim, align: &align, p: &p, x: 0, q: 0, steps: 0, cycles: 0 };
    let mut first_error = None;
    for (index, c) in components.iter().enumerate() {
        let checks = graph::compute_cycle_bound(&p.mdp, c, &p.markers).and_then(|d| Ok((d, graph::entrance(&p, c)?)));
        let (d, entrance) = match checks {
            Ok(v) => v,
            Err(e) => {
                skipped.push((index, e.to_string()));
                first_error.get_or_insert(e);
                continue;
            }
        };
        let mut t = cfg.mixing_cycles.unwrap_or(1);
        let outcome = loop {
            let mut crit = KnownnessCriterion::new(cfg.epsilon, cfg.delta, n, t, rmax, d)?;
            crit.theta_scale = cfg.theta_scale;
            if let Some(k) = cfg.critical_value {
                crit.k = k;
            }
            let remaining = cfg.budget.saturating_sub(w.steps);
            let before = w.steps;
            drive_into(&mut w, c, &mut est, remaining)?;
            let used = w.steps - before;
            let mut exploration = explore(&mut w, c, &mut est, &crit, remaining.saturating_sub(used), cfg.recompute_period)?;
            exploration.steps += used;
            if !exploration.complete {
                return Err(Error::BudgetExhausted(format!(
                    "{} of {} component states still unknown after {} steps",
                    exploration.unknown.len(),
                    c.len(),
                    w.steps
                )));
            }
            let model = est.model(ts, rmax);
            let lp = build_product(&model, dra, pi_label)?;
            let cm = CycleModel::new(&lp.mdp, c, &lp.markers)?;
            let start = cm.local(entrance).ok_or_else(|| Error::Invalid("entrance outside the component".into()))?;
            if cfg.mixing_cycles.is_none() {
                let g = acpc::optimize_acpc(&cm)?;
                let tc = acpc::estimate_mixing_cycle(&cm, &g.policy, cfg.epsilon, start, MIXING_CAP)?.t;
                if tc > t {
                    t = tc;
                    continue;
                }
            }
            let sol = acpc::optimize_t_cycle(&cm, t, start, cfg.enumeration_limit)?;
            break LearnedComponent {
                index,
                size: c.len(),
                entrance: p.mdp.states[entrance].clone(),
                d,
                t,
                theta: crit.theta(),
                exploration,
                j: sol.value.j,
                certified: sol.certified(),
                cycle_policy: cm.actions_of(&sol.policy),
            };
        };
        learned.push(outcome);
    }
    let steps = w.steps;
    let cycles = w.cycles;
    let Some(chosen) = (0..learned.len()).min_by(|&a, &b| learned[a].j.total_cmp(&learned[b].j)) else {
        return Err(first_error.unwrap_or_else(|| Error::Invalid("no component could be learned".into())));
    };
    let model = est.model(ts, rmax);
    let c = &components[learned[chosen].index];
    let reach = graph::max_reach_probability(&p.mdp, &c.mask(p.num_states()));
    let product_policy = acpc::assemble_policy(&p, &reach, c, &learned[chosen].cycle_policy)?;
    let product_policy = restrict_to_reachable(&p.mdp, &product_policy);
    let policy = project_policy(&p, &product_policy);
    let t = learned[chosen].t;
    Ok(LearningReport {
        structural_product: p,
        components,
        learned,
        skipped,
        chosen,
        model,
        estimates: est,
        product_policy,
        policy,
        steps,
        cycles,
        t,
    })
}

/// Moves a component of one product onto another product over the same
/// structure, matching states and actions by name.
pub fn transfer_component(from: &ProductMdp, c: &EndComponent, to: &ProductMdp) -> Result<EndComponent> {
    let ids: HashMap<&str, usize> = to.mdp.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut pairs: Vec<(usize, Vec<usize>)> = c
        .states
        .iter()
        .zip(&c.actions)
        .map(|(&x, acts)| {
            let name = from.mdp.states[x].as_str();
            let y = *ids.get(name).ok_or_else(|| Error::StructureViolation(format!("state {name} is missing")))?;
            let acts = acts
                .iter()
                .map(|&a| {
                    to.mdp
                        .action_index(&from.mdp.actions[a])
                        .ok_or_else(|| Error::StructureViolation(format!("action {} is missing", from.mdp.actions[a])))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((y, acts))
        })
        .collect::<Result<_>>()?;
    pairs.sort_by_key(|p| p.0);
    let (states, actions) = pairs.into_iter().unzip();
    Ok(EndComponent { states, actions, pair: c.pair, accepting: c.accepting })
}

/// True cost per cycle of the learned policy: infinite-horizon value (when
/// the policy is unichain) and `T`-cycle value from the entrance, both on `truth`.
pub fn evaluate_on_truth(
    truth: &LabeledMdp,
    dra: &Dra,
    pi_label: &str,
    report: &LearningReport,
) -> Result<(Result<f64>, f64)> {
    let tp = build_product(truth, dra, pi_label)?;
    let chosen = report.chosen();
    let c = &report.components[chosen.index];
    let tc = transfer_component(&report.structural_product, c, &tp)?;
    let cm = CycleModel::new(&tp.mdp, &tc, &tp.markers)?;
    let actions: Vec<usize> = c
        .states
        .iter()
        .zip(&chosen.cycle_policy)
        .map(|(&x, &a)| {
            let name = &report.structural_product.mdp.states[x];
            let y = tp.mdp.state_index(name).unwrap_or(usize::MAX);
            let a = tp.mdp.action_index(&report.structural_product.mdp.actions[a]).unwrap_or(usize::MAX);
            (y, a)
        })
        .collect::<BTreeMap<usize, usize>>()
        .into_values()
        .collect();
    let policy = cm.policy_from_actions(&actions)?;
    let start = tp
        .mdp
        .state_index(&chosen.entrance)
        .and_then(|e| cm.local(e))
        .ok_or_else(|| Error::Invalid("entrance is missing from the true product".into()))?;
    let j_inf = acpc::evaluate_acpc(&cm, &policy).map(|v| v.j);
    let j_t = acpc::evaluate_t_cycle_acpc(&cm, &policy, chosen.t, start)?.j;
    Ok((j_inf, j_t))
}
