//! Small models that break the structural assumptions, and the errors
//! the checks raise.

use cyclesynth::acpc::{evaluate_acpc, CycleModel};
use cyclesynth::automata::load_dra;
use cyclesynth::graph::{accepting_mecs, compute_cycle_bound, entrance, maximal_end_components};
use cyclesynth::mdp::parse_model;
use cyclesynth::product::build_product;

const ALWAYS: &str = "states 1\ninitial 0\nap pi\ntrans 0 default 0\npair L={} K={0}\n";

fn main() -> cyclesynth::Result<()> {
    // A loop through s1 and s2 never passes the marker s0.
    let loop_model = parse_model(
        "state s0 label pi\nstate s1\nstate s2\ninitial s0\n\
         trans s0 a s1 1 cost 1\ntrans s1 a s2 1 cost 1\ntrans s2 a s1 0.5 cost 1\ntrans s2 a s0 0.5 cost 1\n",
    )?;
    let p = build_product(&loop_model, &load_dra(ALWAYS)?, "pi")?;
    let c = &accepting_mecs(&p)[0];
    println!("marker-free loop: {}", compute_cycle_bound(&p.mdp, c, &p.markers).unwrap_err());

    // The component {m1, m2} can be entered at either state.
    let two_doors = parse_model(
        "state s0\nstate m1 label pi\nstate m2 label pi\ninitial s0\n\
         trans s0 a m1 0.5 cost 1\ntrans s0 a m2 0.5 cost 1\n\
         trans m1 b m2 1 cost 1\ntrans m2 b m1 1 cost 1\n",
    )?;
    let p = build_product(&two_doors, &load_dra(ALWAYS)?, "pi")?;
    let c = &accepting_mecs(&p)[0];
    println!("two entrances: {}", entrance(&p, c).unwrap_err());

    // Staying put at either marker gives two recurrent classes.
    let split = parse_model(
        "state m0 label pi\nstate m1 label pi\ninitial m0\n\
         trans m0 stay m0 1 cost 1\ntrans m0 go m1 1 cost 1\n\
         trans m1 stay m1 1 cost 2\ntrans m1 go m0 1 cost 1\n",
    )?;
    let all = vec![true; split.num_states()];
    let c = &maximal_end_components(&split, &all)[0];
    let markers = vec![true, true];
    let cm = CycleModel::new(&split, c, &markers)?;
    println!("multichain policy: {}", evaluate_acpc(&cm, &[0, 0]).unwrap_err());
    Ok(())
}
