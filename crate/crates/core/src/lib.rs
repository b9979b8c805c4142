pub mod acpc;
pub mod automata;
pub mod cli;
pub mod error;
pub mod graph;
pub mod learning;
pub mod linalg;
pub mod mdp;
pub mod policy;
pub mod product;
pub mod report;
pub mod simulation;
pub mod synthesis;
pub mod scenario;

pub use error::{Error, Result};
