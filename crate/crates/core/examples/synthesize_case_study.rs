//! Optimal cost per cycle on the assembly scenario: infinite horizon,
//! ten cycles, and the ε-mixing cycle.

use cyclesynth::acpc::{estimate_mixing_cycle, optimize_acpc, optimize_t_cycle, CycleModel, ENUMERATION_LIMIT};
use cyclesynth::graph::{accepting_mecs, entrance};
use cyclesynth::product::build_product;
use cyclesynth::scenario::{build_scenario, Scenario, ScenarioConfig};

fn main() -> cyclesynth::Result<()> {
    let m = build_scenario(&ScenarioConfig::default())?.composed()?;
    let p = build_product(&m, &Scenario::dra()?, "pi")?;
    let c = &accepting_mecs(&p)[0];
    let cm = CycleModel::new(&p.mdp, c, &p.markers)?;
    let start = cm.local(entrance(&p, c)?).expect("entrance lies in the component");

    let inf = optimize_acpc(&cm)?;
    println!("J (infinite horizon) = {:.5}, iterations {:?}", inf.value.j, inf.history);

    let t10 = optimize_t_cycle(&cm, 10, start, ENUMERATION_LIMIT)?;
    println!(
        "J (10 cycles) = {:.5}, lower bound {:.5}, exhaustive {}, policies evaluated {}",
        t10.value.j, t10.lower_bound, t10.exhaustive, t10.evaluated
    );
    let differing = (0..cm.len()).filter(|&i| inf.policy[i] != t10.policy[i]).count();
    println!("states where the two policies differ: {differing}");

    for eps in [0.35, 0.01, 0.001] {
        let mix = estimate_mixing_cycle(&cm, &inf.policy, eps, start, 100_000)?;
        println!("ε = {eps}: mixing cycle {}", mix.t);
    }

    println!("\npolicy at the cycle-marker states:");
    for i in (0..cm.len()).filter(|&i| cm.marker[i]) {
        println!("  {} -> {}", cm.names[i], p.mdp.actions[cm.choices[i][inf.policy[i]].action]);
    }
    Ok(())
}
