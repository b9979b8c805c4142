//! Translation of a conjunctive LTL fragment into a single-pair DRA.
//!
//! Supported clauses, with `p`, `q` propositional: `G F p`, `F G p`,
//! `G (p -> X q)`, `G p` (which covers `G (p -> q)`), and `true`.
//!
//! The automaton state records what the letters read so far imply:
//! a safety monitor per `G` clause (a shared absorbing trap on violation),
//! a round-robin counter over the `G F` clauses, and whether the last letter
//! satisfied every `F G` clause. A single Rabin pair is produced:
//! `L` holds the trap and, with `F G` clauses, the states whose last letter
//! violated them; `K` holds the states where the counter completed a round.

use std::collections::{HashMap, VecDeque};

use super::dra::{Dra, RabinPair, Symbol};
use super::ltl::{Ltl, LtlFormula};
use crate::error::{Error, Result};

enum Clause {
    Invariant(Ltl),
    Response(Ltl, Ltl),
    Recurrence(Ltl),
    Persistence(Ltl),
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    trapped: bool,
    pending: Vec<bool>,
    counter: usize,
    stable: bool,
}

fn conjuncts(f: &Ltl, out: &mut Vec<Ltl>) {
    match f {
        Ltl::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        other => out.push(other.clone()),
    }
}

fn classify(f: &Ltl) -> Result<Option<Clause>> {
    let unsupported = || Err(Error::UnsupportedFragment(format!("clause {f}")));
    match f {
        Ltl::True => Ok(None),
        Ltl::Globally(g) => match g.as_ref() {
            Ltl::Finally(p) if p.is_propositional() => Ok(Some(Clause::Recurrence((**p).clone()))),
            Ltl::Implies(p, x) if p.is_propositional() => match x.as_ref() {
                Ltl::Next(q) if q.is_propositional() => Ok(Some(Clause::Response((**p).clone(), (**q).clone()))),
                _ if x.is_propositional() => Ok(Some(Clause::Invariant((**g).clone()))),
                _ => unsupported(),
            },
            p if p.is_propositional() => Ok(Some(Clause::Invariant(p.clone()))),
            _ => unsupported(),
        },
        Ltl::Finally(g) => match g.as_ref() {
            Ltl::Globally(p) if p.is_propositional() => Ok(Some(Clause::Persistence((**p).clone()))),
            _ => unsupported(),
        },
        _ => unsupported(),
    }
}

/// Builds a DRA over `f.ap` accepting exactly the words satisfying `f`.
pub fn translate_fragment(f: &LtlFormula) -> Result<Dra> {
    let mut parts = Vec::new();
    conjuncts(&f.root, &mut parts);
    let mut safety = Vec::new();
    let mut recurrence = Vec::new();
    let mut persistence = Vec::new();
    for part in &parts {
        match classify(part)? {
            None => {}
            Some(c @ (Clause::Invariant(_) | Clause::Response(..))) => safety.push(c),
            Some(Clause::Recurrence(p)) => recurrence.push(p),
            Some(Clause::Persistence(p)) => persistence.push(p),
        }
    }
    let ap = &f.ap;
    let symbols = 1usize << ap.len();
    let holds = |p: &Ltl, sym: usize| {
        p.holds(&|name: &str| ap.iter().position(|a| a == name).is_some_and(|i| sym >> i & 1 == 1))
    };
    let k = recurrence.len();

    let step = |n: &Node, sym: usize| -> Node {
        let trap = Node { trapped: true, pending: vec![false; safety.len()], counter: 0, stable: false };
        if n.trapped {
            return trap;
        }
        let mut pending = vec![false; safety.len()];
        for (i, clause) in safety.iter().enumerate() {
            match clause {
                Clause::Invariant(p) => {
                    if !holds(p, sym) {
                        return trap;
                    }
                }
                Clause::Response(p, q) => {
                    if n.pending[i] && !holds(q, sym) {
                        return trap;
                    }
                    pending[i] = holds(p, sym);
                }
                _ => unreachable!(),
            }
        }
        let mut counter = if n.counter == k { 0 } else { n.counter };
        while counter < k && holds(&recurrence[counter], sym) {
            counter += 1;
        }
        let stable = !persistence.is_empty() && persistence.iter().all(|p| holds(p, sym));
        Node { trapped: false, pending, counter, stable }
    };

    let start = Node { trapped: false, pending: vec![false; safety.len()], counter: 0, stable: false };
    let mut index = HashMap::from([(start.clone(), 0usize)]);
    let mut nodes = vec![start.clone()];
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        let mut row = Vec::with_capacity(symbols);
        for sym in 0..symbols {
            let m = step(&n, sym);
            let id = *index.entry(m.clone()).or_insert_with(|| {
                nodes.push(m.clone());
                queue.push_back(m);
                nodes.len() - 1
            });
            row.push(id);
        }
        delta.push(row);
    }

    let mut pair = RabinPair { l: Default::default(), k: Default::default() };
    for (q, n) in nodes.iter().enumerate() {
        let unstable = !persistence.is_empty() && !n.stable;
        if n.trapped || unstable {
            pair.l.insert(q);
        } else if k == 0 || n.counter == k {
            pair.k.insert(q);
        }
    }
    if pair.k.is_empty() {
        // Every run is trapped: keep a well-formed automaton that accepts nothing.
        pair.k = pair.l.clone();
    }
    let dra = Dra { ap: ap.clone(), initial: 0, delta, pairs: vec![pair] };
    dra.validate()?;
    Ok(dra)
}

/// Convenience: the letter of `dra` in which exactly `props` hold.
pub fn letter_of(dra: &Dra, props: &[&str]) -> Result<Symbol> {
    dra.symbol(props.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::ltl::parse_ltl;
    use std::collections::BTreeSet;

    fn formula(text: &str, aps: &[&str]) -> LtlFormula {
        let ap: BTreeSet<String> = aps.iter().map(|s| s.to_string()).collect();
        parse_ltl(text, &ap).unwrap()
    }

    #[test]
    fn recurrence_gives_two_states() {
        let d = translate_fragment(&formula("G F pi", &["pi"])).unwrap();
        assert_eq!(d.delta, vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(d.initial, 0);
        assert_eq!(d.pairs, vec![RabinPair { l: BTreeSet::new(), k: BTreeSet::from([1]) }]);
    }

    #[test]
    fn always_true_is_universal() {
        let d = translate_fragment(&formula("G true", &["p"])).unwrap();
        assert_eq!(d.num_states(), 1);
        assert_eq!(d.pairs, vec![RabinPair { l: BTreeSet::new(), k: BTreeSet::from([0]) }]);
        let d = translate_fragment(&formula("true", &[])).unwrap();
        assert_eq!(d.num_states(), 1);
    }

    #[test]
    fn unsupported_clause() {
        let err = translate_fragment(&formula("p U q", &["p", "q"])).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFragment(_)));
        assert!(err.to_string().contains("--dra"));
        assert!(translate_fragment(&formula("G F X p", &["p"])).is_err());
        assert!(translate_fragment(&formula("p", &["p"])).is_err());
    }

    #[test]
    fn response_monitor() {
        let d = translate_fragment(&formula("G (faulty -> X normal)", &["faulty", "normal"])).unwrap();
        let f = letter_of(&d, &["faulty"]).unwrap();
        let n = letter_of(&d, &["normal"]).unwrap();
        assert!(d.accepts(&[], &[f, n]).unwrap());
        assert!(!d.accepts(&[f, f], &[n]).unwrap());
        assert!(d.accepts(&[], &[n]).unwrap());
    }
}
