//! Seeded ground-truth simulator.
//!
//! The generator is Xoshiro256++ seeded through SplitMix64 (`seed_from_u64`).
//! A successor is drawn by inverse CDF over the declared successor order
//! using `u = (x >> 11) · 2^-53` from one 64-bit output `x`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::mdp::LabeledMdp;
use crate::product::FiniteMemoryPolicy;

/// Outcome of one simulated step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: usize,
    pub cost: f64,
    pub labels: BTreeSet<String>,
    /// True when `next` is a marker state.
    pub cycle_completed: bool,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    truth: LabeledMdp,
    markers: Vec<bool>,
    state: usize,
    rng: Xoshiro256PlusPlus,
    pub steps: u64,
    pub cycles: u64,
}

/// Uniform double in `[0, 1)` from the top 53 bits.
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl Simulator {
    pub fn new(truth: LabeledMdp, pi_label: &str, seed: u64) -> Self {
        let markers = (0..truth.num_states()).map(|s| truth.has_label(s, pi_label)).collect();
        let state = truth.initial;
        Simulator { truth, markers, state, rng: Xoshiro256PlusPlus::seed_from_u64(seed), steps: 0, cycles: 0 }
    }

    /// Reseeds, returns to the initial state and clears the counters.
    pub fn reset(&mut self, seed: u64) -> usize {
        self.rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        self.steps = 0;
        self.cycles = 0;
        self.restart()
    }

    /// Returns to the initial state, keeping the generator stream and counters.
    pub fn restart(&mut self) -> usize {
        self.state = self.truth.initial;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Moves to `s` without sampling; used to probe single rows.
    pub fn jump_to(&mut self, s: usize) {
        assert!(s < self.truth.num_states(), "state {s} is out of range");
        self.state = s;
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.truth.states[s]
    }

    pub fn labels(&self, s: usize) -> &BTreeSet<String> {
        &self.truth.labels[s]
    }

    pub fn num_states(&self) -> usize {
        self.truth.num_states()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.truth.action_index(name)
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.truth.actions[a]
    }

    pub fn is_marker(&self, s: usize) -> bool {
        self.markers[s]
    }

    /// The hidden model. Learners must not read it; reports and oracles may.
    pub fn truth(&self) -> &LabeledMdp {
        &self.truth
    }

    pub fn step(&mut self, action: usize) -> Result<Step> {
        let s = self.state;
        let choice = self.truth.choice(s, action).ok_or_else(|| Error::UnavailableAction {
            state: self.truth.states[s].clone(),
            action: self.truth.actions.get(action).cloned().unwrap_or_else(|| format!("#{action}")),
        })?;
        let u = unit_f64(self.rng.next_u64());
        let mut acc = 0.0;
        let mut next = None;
        for &(t, p) in &choice.successors {
            acc += p;
            if p > 0.0 && u < acc {
                next = Some(t);
                break;
            }
        }
        // Rounding can leave u above the last partial sum.
        let next = next.unwrap_or_else(|| choice.successors.iter().rev().find(|(_, p)| *p > 0.0).map_or(s, |x| x.0));
        let cost = choice.cost;
        self.state = next;
        self.steps += 1;
        let cycle_completed = self.markers[next];
        if cycle_completed {
            self.cycles += 1;
        }
        Ok(Step { next, cost, labels: self.truth.labels[next].clone(), cycle_completed })
    }

    /// Runs `controller` from the current state until the horizon is met.
    pub fn run_policy(&mut self, controller: &mut dyn Controller, horizon: RunHorizon, record: bool) -> Result<RunSummary> {
        controller.start(self.state);
        let mut summary = RunSummary::default();
        let done = |s: &RunSummary| match horizon {
            RunHorizon::Steps(n) => s.steps >= n,
            RunHorizon::Cycles(n) => s.cycles >= n,
        };
        while !done(&summary) {
            let s = self.state;
            let a = controller.act(s).ok_or_else(|| {
                Error::Invalid(format!("policy has no action for state {}", self.truth.states[s]))
            })?;
            let step = self.step(a)?;
            controller.advance(s, step.next);
            summary.steps += 1;
            summary.total_cost += step.cost;
            if step.cycle_completed {
                summary.cycles += 1;
            }
            if record {
                summary.trajectory.push(TraceRow {
                    step: summary.steps,
                    state: s,
                    action: a,
                    cost: step.cost,
                    next: step.next,
                    cycle_completed: step.cycle_completed,
                });
            }
            if let RunHorizon::Cycles(_) = horizon {
                if summary.steps >= MAX_RUN_STEPS {
                    return Err(Error::Divergent(format!("no cycle horizon reached within {MAX_RUN_STEPS} steps")));
                }
            }
        }
        Ok(summary)
    }

    /// Tab-separated trace: step, state, action, cost, labels of the
    /// successor, and the cycle flag.
    pub fn trace_tsv(&self, rows: &[TraceRow]) -> String {
        let mut out = String::from("step\tstate\taction\tcost\tlabels\tcycle\n");
        for r in rows {
            let labels: Vec<&str> = self.truth.labels[r.next].iter().map(String::as_str).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.step,
                self.truth.states[r.state],
                self.truth.actions[r.action],
                r.cost,
                labels.join(","),
                u8::from(r.cycle_completed)
            );
        }
        out
    }
}

/// Cap on steps of a cycle-bounded run.
pub const MAX_RUN_STEPS: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunHorizon {
    Steps(u64),
    Cycles(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub next: usize,
    pub cycle_completed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub cycles: u64,
    pub total_cost: f64,
    pub trajectory: Vec<TraceRow>,
}

impl RunSummary {
    /// Total cost over completed cycles; `None` when no cycle completed.
    pub fn acpc(&self) -> Option<f64> {
        (self.cycles > 0).then(|| self.total_cost / self.cycles as f64)
    }
}

/// Chooses actions on the base MDP, possibly keeping internal memory.
pub trait Controller {
    fn start(&mut self, state: usize);
    fn act(&mut self, state: usize) -> Option<usize>;
    /// Called after moving from `from` to `to`.
    fn advance(&mut self, from: usize, to: usize);
}

/// A memoryless controller: one action id per base state.
#[derive(Debug, Clone, PartialEq)]
pub struct Memoryless(pub Vec<Option<usize>>);

impl Controller for Memoryless {
    fn start(&mut self, _: usize) {}

    fn act(&mut self, state: usize) -> Option<usize> {
        self.0.get(state).copied().flatten()
    }

    fn advance(&mut self, _: usize, _: usize) {}
}

/// Runs a [`FiniteMemoryPolicy`] with the automaton state as memory.
#[derive(Debug, Clone)]
pub struct FiniteMemory<'a> {
    pub policy: &'a FiniteMemoryPolicy,
    pub memory: usize,
}

impl<'a> FiniteMemory<'a> {
    pub fn new(policy: &'a FiniteMemoryPolicy) -> Self {
        FiniteMemory { policy, memory: policy.initial_memory() }
    }
}

impl Controller for FiniteMemory<'_> {
    fn start(&mut self, _: usize) {
        self.memory = self.policy.initial_memory();
    }

    fn act(&mut self, state: usize) -> Option<usize> {
        self.policy.action(state, self.memory)
    }

    fn advance(&mut self, from: usize, _: usize) {
        self.memory = self.policy.next_memory(self.memory, from);
    }
}
