//! Optimal best-first planning for finite-horizon decentralized POMDPs.
//!
//! A problem is a [`model::DecPomdp`]; solutions are [`policy::PolicyVector`]s
//! holding one observation-indexed action tree per agent. [`search::maa_star`]
//! returns an optimal vector given an admissible [`heuristics::HeuristicTable`].

pub mod cli;
pub mod evaluation;
pub mod heuristics;
pub mod model;
pub mod policy;
pub mod search;

pub use evaluation::evaluate;
pub use heuristics::{build_table, HeuristicKind, HeuristicTable};
pub use model::DecPomdp;
pub use policy::{PolicyTree, PolicyVector};
pub use search::{brute_force, maa_star, Options, SearchResult};
