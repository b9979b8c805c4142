//! The three-state example: product with the `G F pi` automaton, its
//! accepting end component, and the cheapest cycle policy.

use cyclesynth::automata::load_dra;
use cyclesynth::graph::{accepting_mecs, compute_cycle_bound, max_reach_probability};
use cyclesynth::mdp::parse_model;
use cyclesynth::product::build_product;
use cyclesynth::synthesis::{synthesize, SynthesisOptions};

fn main() -> cyclesynth::Result<()> {
    let m = parse_model(include_str!("../data/three_state.mdp"))?;
    let dra = load_dra(include_str!("../data/gf_pi.dra"))?;
    let p = build_product(&m, &dra, "pi")?;

    println!("product states: {}", p.num_states());
    for (x, name) in p.mdp.states.iter().enumerate() {
        for c in &p.mdp.choices[x] {
            let succ: Vec<String> = c.successors.iter().map(|&(y, pr)| format!("{} {pr}", p.mdp.states[y])).collect();
            println!("  {name} --{}--> {}", p.mdp.actions[c.action], succ.join(", "));
        }
    }
    let k: Vec<&str> = p.accepting_states().iter().map(|&x| p.mdp.states[x].as_str()).collect();
    println!("K_P: {}", k.join(" "));

    for c in accepting_mecs(&p) {
        let names: Vec<&str> = c.states.iter().map(|&x| p.mdp.states[x].as_str()).collect();
        let reach = max_reach_probability(&p.mdp, &c.mask(p.num_states()));
        println!("AMEC {{{}}}: reached with probability {}", names.join(", "), reach.values[p.mdp.initial]);
        println!("cycle bound D = {}", compute_cycle_bound(&p.mdp, &c, &p.markers)?);
    }

    let s = synthesize(&m, &dra, "pi", &SynthesisOptions::default())?;
    println!("optimal cost per cycle: {:.4}", s.j());
    print!("{}", cyclesynth::policy::write_policy(&s.policy, &m));
    Ok(())
}
