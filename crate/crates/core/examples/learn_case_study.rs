//! Learns the scenario's transition probabilities from simulation and
//! synthesizes on the estimate. Pass `full` for the untightened threshold.

use cyclesynth::learning::{evaluate_on_truth, model_learning_and_policy_finding, LearningConfig};
use cyclesynth::scenario::{build_scenario, Scenario, ScenarioConfig};
use cyclesynth::simulation::Simulator;

fn main() -> cyclesynth::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let truth = build_scenario(&ScenarioConfig::default())?.composed()?;
    let dra = Scenario::dra()?;
    let cfg = LearningConfig {
        epsilon: 0.35,
        delta: 0.1,
        mixing_cycles: Some(10),
        theta_scale: if full { 1.0 } else { 50.0 },
        ..Default::default()
    };
    let mut sim = Simulator::new(truth.clone(), "pi", 1);
    let started = std::time::Instant::now();
    let report = model_learning_and_policy_finding(&mut sim, &truth.structure(), &dra, "pi", &cfg)?;
    let c = report.chosen();
    println!("threshold θ = {:.3e}, D = {}, T = {}", c.theta, c.d, c.t);
    println!("{} steps, {} cycles in {:.1?}", report.steps, report.cycles, started.elapsed());
    for (steps, known) in c.exploration.progress.iter().step_by(50) {
        println!("  after {steps:>9} steps: {known}/{} states known", c.size);
    }
    let (j_inf, j_t) = evaluate_on_truth(&truth, &dra, "pi", &report)?;
    println!("learned-model J^T = {:.5}", c.j);
    println!("true J^T = {j_t:.5}, true J = {:.5}", j_inf?);
    Ok(())
}
