//! Runs the synthesized controller on the scenario and compares the
//! empirical cost per cycle with the computed one.

use cyclesynth::scenario::{build_scenario, Scenario, ScenarioConfig};
use cyclesynth::simulation::{FiniteMemory, RunHorizon, Simulator};
use cyclesynth::synthesis::{synthesize, SynthesisOptions};

fn main() -> cyclesynth::Result<()> {
    let m = build_scenario(&ScenarioConfig::default())?.composed()?;
    let s = synthesize(&m, &Scenario::dra()?, "pi", &SynthesisOptions::default())?;
    println!("computed J = {:.5}", s.j());

    let mut sim = Simulator::new(m, "pi", 2024);
    let mut ctrl = FiniteMemory::new(&s.policy);
    let run = sim.run_policy(&mut ctrl, RunHorizon::Steps(1_000_000), false)?;
    println!("{} steps, {} cycles, empirical J = {:.5}", run.steps, run.cycles, run.acpc().unwrap_or(f64::NAN));

    sim.reset(7);
    let short = sim.run_policy(&mut ctrl, RunHorizon::Cycles(2), true)?;
    print!("{}", sim.trace_tsv(&short.trajectory));
    Ok(())
}
