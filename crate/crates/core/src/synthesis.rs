//! Controller synthesis on a known model: product, accepting end components,
//! reachability into each, cycle-cost optimization inside each, and the
//! cheapest component's piecewise policy.

use crate::acpc::{self, CycleModel, Horizon, ENUMERATION_LIMIT, MIXING_CAP};
use crate::automata::Dra;
use crate::error::{Error, Result};
use crate::graph::{self, EndComponent, ReachabilityResult};
use crate::mdp::LabeledMdp;
use crate::product::{build_product, project_policy, FiniteMemoryPolicy, ProductMdp};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub horizon: Horizon,
    /// When set, the ε-mixing cycle of each optimal policy is reported.
    pub epsilon: Option<f64>,
    pub enumeration_limit: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { horizon: Horizon::Infinite, epsilon: None, enumeration_limit: ENUMERATION_LIMIT }
    }
}

/// Outcome for one accepting end component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub index: usize,
    pub size: usize,
    pub contains_initial: bool,
    pub reach_probability: f64,
    /// Entrance state or the assumption violation preventing one.
    pub entrance: std::result::Result<usize, String>,
    pub cycle_bound: std::result::Result<usize, String>,
    /// Cost per cycle of the optimal inside policy, or why it is unavailable.
    pub j: std::result::Result<f64, String>,
    pub mixing_cycle: Option<std::result::Result<usize, String>>,
    /// For `T`-cycle optimization: whether the policy is certified optimal.
    pub certified: Option<bool>,
    /// Action ids aligned with the component states.
    pub cycle_policy: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub product: ProductMdp,
    pub components: Vec<EndComponent>,
    pub reports: Vec<ComponentReport>,
    pub chosen: usize,
    /// Action per product state, `None` where the policy is never used.
    pub product_policy: Vec<Option<usize>>,
    pub policy: FiniteMemoryPolicy,
    pub reach: ReachabilityResult,
}

impl Synthesis {
    pub fn j(&self) -> f64 {
        self.reports[self.chosen].j.clone().unwrap_or(f64::NAN)
    }
}

/// Optimizes inside `c`. `start` is required for a finite horizon.
pub fn optimize_component(
    cm: &CycleModel,
    horizon: Horizon,
    start: Option<usize>,
    limit: f64,
) -> Result<(acpc::MemorylessPolicy, f64, Option<bool>)> {
    match horizon {
        Horizon::Infinite => {
            let sol = acpc::optimize_acpc(cm)?;
            Ok((sol.policy, sol.value.j, None))
        }
        Horizon::Cycles(t) => {
            let start = start.ok_or_else(|| Error::assumption(3, "a finite cycle horizon needs an entrance state"))?;
            let sol = acpc::optimize_t_cycle(cm, t, start, limit)?;
            let certified = sol.certified();
            Ok((sol.policy, sol.value.j, Some(certified)))
        }
    }
}

/// Synthesizes the minimum cost-per-cycle controller among the accepting end
/// components reached with the highest probability.
pub fn synthesize(m: &LabeledMdp, dra: &Dra, pi_label: &str, opts: &SynthesisOptions) -> Result<Synthesis> {
    let product = build_product(m, dra, pi_label)?;
    let components = graph::accepting_mecs(&product);
    if components.is_empty() {
        return Err(Error::Invalid("the product has no accepting end component".into()));
    }
    let n = product.num_states();
    let init = product.mdp.initial;
    let mut reports = Vec::new();
    for (index, c) in components.iter().enumerate() {
        let reach = graph::max_reach_probability(&product.mdp, &c.mask(n));
        let entrance = graph::entrance(&product, c);
        let cycle_bound = graph::compute_cycle_bound(&product.mdp, c, &product.markers).map_err(|e| e.to_string());
        let mut report = ComponentReport {
            index,
            size: c.len(),
            contains_initial: c.contains(init),
            reach_probability: reach.values[init],
            entrance: entrance.clone().map_err(|e| e.to_string()),
            cycle_bound,
            j: Err(String::new()),
            mixing_cycle: None,
            certified: None,
            cycle_policy: None,
        };
        let outcome = CycleModel::new(&product.mdp, c, &product.markers).and_then(|cm| {
            let start = entrance.as_ref().ok().and_then(|&e| cm.local(e));
            let (policy, j, certified) = optimize_component(&cm, opts.horizon, start, opts.enumeration_limit)?;
            let mixing = match (opts.epsilon, start) {
                (Some(eps), Some(s)) => Some(
                    acpc::estimate_mixing_cycle(&cm, &policy, eps, s, MIXING_CAP).map(|x| x.t).map_err(|e| e.to_string()),
                ),
                (Some(_), None) => Some(Err("no entrance".to_string())),
                _ => None,
            };
            Ok((cm.actions_of(&policy), j, certified, mixing))
        });
        match outcome {
            Ok((actions, j, certified, mixing)) => {
                report.j = Ok(j);
                report.certified = certified;
                report.mixing_cycle = mixing;
                report.cycle_policy = Some(actions);
            }
            Err(e) => report.j = Err(e.to_string()),
        }
        reports.push(report);
    }
    let best_prob = reports.iter().map(|r| r.reach_probability).fold(0.0, f64::max);
    if best_prob <= 0.0 {
        return Err(Error::Invalid("no accepting end component is reachable".into()));
    }
    let chosen = reports
        .iter()
        .filter(|r| r.reach_probability >= best_prob - 1e-9)
        .filter_map(|r| r.j.as_ref().ok().map(|&j| (r.index, j)))
        .fold(None::<(usize, f64)>, |acc, (i, j)| match acc {
            Some((_, bj)) if bj <= j => acc,
            _ => Some((i, j)),
        })
        .map(|(i, _)| i);
    let Some(chosen) = chosen else {
        let reasons: Vec<String> = reports.iter().filter_map(|r| r.j.as_ref().err().cloned()).collect();
        return Err(Error::Invalid(format!("no component admits a cycle policy: {}", reasons.join("; "))));
    };
    let c = &components[chosen];
    let reach = graph::max_reach_probability(&product.mdp, &c.mask(n));
    let cycle = reports[chosen].cycle_policy.clone().unwrap_or_default();
    let product_policy = acpc::assemble_policy(&product, &reach, c, &cycle)?;
    let policy = project_policy(&product, &restrict_to_reachable(&product.mdp, &product_policy));
    Ok(Synthesis { product, components, reports, chosen, product_policy, policy, reach })
}

/// Drops actions of states not reachable from the initial state under `policy`.
pub fn restrict_to_reachable(m: &LabeledMdp, policy: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut seen = vec![false; m.num_states()];
    let mut stack = vec![m.initial];
    seen[m.initial] = true;
    while let Some(s) = stack.pop() {
        let Some(ch) = policy[s].and_then(|a| m.choice(s, a)) else { continue };
        for &(t, p) in &ch.successors {
            if p > 0.0 && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    policy.iter().zip(seen).map(|(a, r)| if r { *a } else { None }).collect()
}
