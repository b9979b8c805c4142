//! The human-robot assembly scenario: task, robot, trust and fatigue models.
//!
//! Component state names: task `w0..w2`, robot `r0` (normal) / `r1`
//! (faulty), trust `t0..t2`, fatigue `f0..f2`. Actions: robot `a0r`, `a1r`,
//! human `a0h`, `a1h`, `a2h`, and `repair`. Composite states are named
//! `w|r|t|f` in that component order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::automata::{load_dra, parse_ltl, Dra, LtlFormula};
use crate::error::{Error, Result};
use crate::mdp::{compose, CostRule, LabeledMdp, MdpBuilder};

/// The specification: repeat the task forever, and repair right after a fault.
pub const SPEC: &str = "G F pi & G (faulty -> X normal)";
pub const PI_LABEL: &str = "pi";

/// Hand-built 9-state DRA for [`SPEC`].
pub const CASE_STUDY_DRA: &str = include_str!("../data/case_study.dra");

/// Parameters of the scenario; defaults give the reference scenario.
///
/// Arrays indexed by `i` refer to actions `a_i`; arrays of length three
/// indexed by level refer to fatigue `f0..f2` or trust `t0..t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Fault probability `p_i` of robot action `a_i^r`.
    pub fault_prob: [f64; 2],
    /// `f_i^r`: probability that fatigue stays put while the robot works.
    pub fatigue_stay_robot: [f64; 2],
    /// `f_i^h`: probability that fatigue stays put under human action `a_i^h`.
    pub fatigue_stay_human: [f64; 3],
    /// `f_repair`.
    pub fatigue_stay_repair: f64,
    /// `t_i^r`: probability that trust stays at `t0` or `t2` under `a_i^r`.
    pub trust_stay: [f64; 2],
    /// `t_{1,i}^r`: probability that trust stays at `t1` under `a_i^r`.
    pub trust_mid_stay: [f64; 2],
    pub task_cost: f64,
    pub robot_cost: [f64; 2],
    pub repair_cost: f64,
    pub fatigue_cost_robot: [f64; 3],
    pub fatigue_cost_human: [f64; 3],
    pub fatigue_cost_repair: [f64; 3],
    pub trust_cost_robot: [f64; 3],
    pub trust_cost_repair: [f64; 3],
    /// Cost bound of the composed model.
    pub r_max: f64,
    /// How component costs combine on a composite step.
    pub cost_rule: CostRuleName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostRuleName {
    Sum,
    Mean,
}

impl From<CostRuleName> for CostRule {
    fn from(r: CostRuleName) -> Self {
        match r {
            CostRuleName::Sum => CostRule::Sum,
            CostRuleName::Mean => CostRule::Mean,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            fault_prob: [0.6, 0.65],
            fatigue_stay_robot: [0.5, 0.4],
            fatigue_stay_human: [0.5, 0.4, 0.45],
            fatigue_stay_repair: 0.4,
            trust_stay: [0.5, 0.4],
            trust_mid_stay: [0.3, 0.4],
            task_cost: 0.7,
            robot_cost: [0.003, 0.07],
            repair_cost: 0.07,
            fatigue_cost_robot: [0.3, 0.1, 0.03],
            fatigue_cost_human: [0.03, 0.1, 0.3],
            fatigue_cost_repair: [0.03, 0.1, 0.3],
            trust_cost_robot: [0.3, 0.17, 0.03],
            trust_cost_repair: [0.17, 0.17, 0.5],
            r_max: 1.0,
            cost_rule: CostRuleName::Mean,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Invalid(format!("scenario config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Probabilities must lie in `[0,1]` and costs must be non-negative.
    pub fn validate(&self) -> Result<()> {
        let probs = self
            .fault_prob
            .iter()
            .chain(&self.fatigue_stay_robot)
            .chain(&self.fatigue_stay_human)
            .chain([&self.fatigue_stay_repair])
            .chain(&self.trust_stay)
            .chain(&self.trust_mid_stay);
        for p in probs {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Invalid(format!("scenario probability {p} is outside [0,1]")));
            }
        }
        let costs = self
            .robot_cost
            .iter()
            .chain([&self.task_cost, &self.repair_cost, &self.r_max])
            .chain(&self.fatigue_cost_robot)
            .chain(&self.fatigue_cost_human)
            .chain(&self.fatigue_cost_repair)
            .chain(&self.trust_cost_robot)
            .chain(&self.trust_cost_repair);
        for c in costs {
            if !(*c >= 0.0 && c.is_finite()) {
                return Err(Error::Invalid(format!("scenario cost {c} is negative")));
            }
        }
        Ok(())
    }
}

/// The four component models and the specification.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub task: LabeledMdp,
    pub robot: LabeledMdp,
    pub trust: LabeledMdp,
    pub fatigue: LabeledMdp,
}

const ROBOT: [&str; 2] = ["a0r", "a1r"];
const HUMAN: [&str; 3] = ["a0h", "a1h", "a2h"];

fn tr(b: &mut MdpBuilder, s: &str, a: &str, t: &str, p: f64, cost: f64) -> Result<()> {
    let s = b.state(s, &[] as &[&str]);
    let t = b.state(t, &[] as &[&str]);
    let a = b.action(a);
    if p > 0.0 {
        b.transition(s, a, t, p, cost)?;
    }
    Ok(())
}

/// Declares states in order so that state ids follow the level index.
fn states(b: &mut MdpBuilder, names: &[&str], labels: &[&[&str]]) {
    for (i, name) in names.iter().enumerate() {
        b.state(name, labels.get(i).copied().unwrap_or(&[]));
    }
}

fn task(cfg: &ScenarioConfig) -> Result<LabeledMdp> {
    let mut b = MdpBuilder::new();
    states(&mut b, &["w0", "w1", "w2"], &[&[PI_LABEL]]);
    let c = cfg.task_cost;
    for (i, next) in [(0, "w1"), (1, "w2")] {
        let from = format!("w{i}");
        tr(&mut b, &from, ROBOT[i], next, 1.0, c)?;
        tr(&mut b, &from, HUMAN[i], next, 1.0, c)?;
    }
    tr(&mut b, "w2", HUMAN[2], "w0", 1.0, c)?;
    b.rmax(c);
    Ok(b.build())
}

fn robot(cfg: &ScenarioConfig) -> Result<LabeledMdp> {
    let mut b = MdpBuilder::new();
    states(&mut b, &["r0", "r1"], &[&["normal"], &["faulty"]]);
    for i in 0..2 {
        let p = cfg.fault_prob[i];
        tr(&mut b, "r0", ROBOT[i], "r1", p, cfg.robot_cost[i])?;
        tr(&mut b, "r0", ROBOT[i], "r0", 1.0 - p, cfg.robot_cost[i])?;
    }
    tr(&mut b, "r1", "repair", "r0", 1.0, cfg.repair_cost)?;
    b.rmax(cfg.robot_cost.iter().copied().fold(cfg.repair_cost, f64::max));
    Ok(b.build())
}

fn trust(cfg: &ScenarioConfig) -> Result<LabeledMdp> {
    let mut b = MdpBuilder::new();
    states(&mut b, &["t0", "t1", "t2"], &[]);
    let cr = cfg.trust_cost_robot;
    for i in 0..2 {
        let a = ROBOT[i];
        let stay = cfg.trust_stay[i];
        let mid = cfg.trust_mid_stay[i];
        tr(&mut b, "t0", a, "t0", stay, cr[0])?;
        tr(&mut b, "t0", a, "t1", 1.0 - stay, cr[0])?;
        tr(&mut b, "t1", a, "t1", mid, cr[1])?;
        tr(&mut b, "t1", a, "t0", (1.0 - mid) / 2.0, cr[1])?;
        tr(&mut b, "t1", a, "t2", (1.0 - mid) / 2.0, cr[1])?;
        tr(&mut b, "t2", a, "t2", stay, cr[2])?;
        tr(&mut b, "t2", a, "t1", 1.0 - stay, cr[2])?;
    }
    let rep = cfg.trust_cost_repair;
    tr(&mut b, "t0", "repair", "t0", 1.0, rep[0])?;
    tr(&mut b, "t1", "repair", "t0", 1.0, rep[1])?;
    tr(&mut b, "t2", "repair", "t1", 1.0, rep[2])?;
    b.rmax(cr.iter().chain(&rep).copied().fold(0.0, f64::max));
    Ok(b.build())
}

fn fatigue(cfg: &ScenarioConfig) -> Result<LabeledMdp> {
    let mut b = MdpBuilder::new();
    let level = ["f0", "f1", "f2"];
    states(&mut b, &level, &[]);
    for k in 0..3 {
        let s = level[k];
        for i in 0..2 {
            let c = cfg.fatigue_cost_robot[k];
            if k == 0 {
                tr(&mut b, s, ROBOT[i], s, 1.0, c)?;
            } else {
                let stay = cfg.fatigue_stay_robot[i];
                tr(&mut b, s, ROBOT[i], s, stay, c)?;
                tr(&mut b, s, ROBOT[i], level[k - 1], 1.0 - stay, c)?;
            }
        }
        let busy = HUMAN
            .iter()
            .enumerate()
            .map(|(i, a)| (*a, cfg.fatigue_stay_human[i], cfg.fatigue_cost_human[k]))
            .chain([("repair", cfg.fatigue_stay_repair, cfg.fatigue_cost_repair[k])]);
        for (a, stay, c) in busy {
            if k == 2 {
                tr(&mut b, s, a, s, 1.0, c)?;
            } else {
                tr(&mut b, s, a, s, stay, c)?;
                tr(&mut b, s, a, level[k + 1], 1.0 - stay, c)?;
            }
        }
    }
    let all = cfg.fatigue_cost_robot.iter().chain(&cfg.fatigue_cost_human).chain(&cfg.fatigue_cost_repair);
    b.rmax(all.copied().fold(0.0, f64::max));
    Ok(b.build())
}

/// Builds the four component models from `cfg`.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    Ok(Scenario {
        config: cfg.clone(),
        task: task(cfg)?,
        robot: robot(cfg)?,
        trust: trust(cfg)?,
        fatigue: fatigue(cfg)?,
    })
}

impl Scenario {
    /// The components in composition order.
    pub fn components(&self) -> [(&'static str, &LabeledMdp); 4] {
        [("task", &self.task), ("robot", &self.robot), ("trust", &self.trust), ("fatigue", &self.fatigue)]
    }

    /// The composed system model with cost bound `config.r_max`.
    pub fn composed(&self) -> Result<LabeledMdp> {
        let mut m = compose(&[&self.task, &self.robot, &self.trust, &self.fatigue], self.config.cost_rule.into())?;
        m.rmax = self.config.r_max;
        Ok(m)
    }

    pub fn propositions() -> BTreeSet<String> {
        [PI_LABEL, "normal", "faulty"].iter().map(|s| s.to_string()).collect()
    }

    pub fn spec() -> Result<LtlFormula> {
        parse_ltl(SPEC, &Self::propositions())
    }

    /// The shipped 9-state automaton for [`SPEC`].
    pub fn dra() -> Result<Dra> {
        load_dra(CASE_STUDY_DRA)
    }
}
