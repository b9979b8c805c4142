//! Builds the assembly scenario components and composes them.

use cyclesynth::product::build_product;
use cyclesynth::scenario::{build_scenario, Scenario, ScenarioConfig};

fn main() -> cyclesynth::Result<()> {
    let sc = build_scenario(&ScenarioConfig::default())?;
    for (name, m) in sc.components() {
        println!("{name}: {} states, actions {:?}", m.num_states(), m.actions);
    }
    let m = sc.composed()?;
    println!("composed: {} states", m.num_states());
    let dra = Scenario::dra()?;
    let p = build_product(&m, &dra, "pi")?;
    println!("product: {} states in the full product, {} reachable", p.full_size(), p.num_states());
    let amecs = cyclesynth::graph::accepting_mecs(&p);
    for c in &amecs {
        println!("AMEC with {} states, contains the initial state: {}", c.len(), c.contains(p.mdp.initial));
    }
    println!("\nfirst lines of the composed model:");
    for line in m.to_text().lines().take(8) {
        println!("  {line}");
    }
    Ok(())
}
