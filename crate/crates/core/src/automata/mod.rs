//! LTL formulas, deterministic Rabin automata and the fragment translator.

mod dra;
mod ltl;
mod translate;

pub use dra::{load_dra, Dra, RabinPair, Symbol};
pub use ltl::{parse_ltl, Ltl, LtlFormula};
pub use translate::{letter_of, translate_fragment};
