//! Parses formulas of the supported fragment, translates them to Rabin
//! automata and checks a few lasso words.

use std::collections::BTreeSet;

use cyclesynth::automata::{letter_of, parse_ltl, translate_fragment};

fn main() -> cyclesynth::Result<()> {
    let ap: BTreeSet<String> = ["pi", "normal", "faulty"].iter().map(|s| s.to_string()).collect();
    for text in ["G F pi", "G F pi & G (faulty -> X normal)", "F G normal", "G !faulty"] {
        let f = parse_ltl(text, &ap)?;
        let dra = translate_fragment(&f)?;
        println!("{f}: {} states, {} pair(s)", dra.num_states(), dra.pairs.len());
    }

    let dra = translate_fragment(&parse_ltl("G F pi & G (faulty -> X normal)", &ap)?)?;
    let pi = letter_of(&dra, &["pi", "normal"])?;
    let ok = letter_of(&dra, &["normal"])?;
    let bad = letter_of(&dra, &["faulty"])?;
    println!("(normal pi)^w accepted: {}", dra.accepts(&[], &[ok, pi])?);
    println!("(faulty normal pi)^w accepted: {}", dra.accepts(&[], &[bad, ok, pi])?);
    println!("faulty faulty (pi)^w accepted: {}", dra.accepts(&[bad, bad], &[pi])?);
    println!("(normal)^w accepted: {}", dra.accepts(&[], &[ok])?);

    match parse_ltl("pi U normal", &ap).and_then(|f| translate_fragment(&f)) {
        Ok(_) => println!("unexpected translation"),
        Err(e) => println!("outside the fragment: {e}"),
    }
    print!("\n{}", dra.to_text());
    Ok(())
}
