//! Published optimal values and search statistics for the built-in problems.
//! Only the values are checked; the counts depend on expansion order and are
//! shown for inspection.

use crate::heuristics::HeuristicKind;

/// Published values are rounded to two decimals.
pub const VALUE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub problem: &'static str,
    pub heuristic: HeuristicKind,
    pub horizon: usize,
    pub value: f64,
    pub evaluated: u64,
    pub max_open: u64,
}

const fn row(
    problem: &'static str,
    heuristic: HeuristicKind,
    horizon: usize,
    value: f64,
    evaluated: u64,
    max_open: u64,
) -> PublishedRow {
    PublishedRow { problem, heuristic, horizon, value, evaluated, max_open }
}

use HeuristicKind::{Mdp, Recursive};

pub const PUBLISHED: &[PublishedRow] = &[
    row("tiger-a", Mdp, 2, -4.00, 252, 8),
    row("tiger-a", Mdp, 3, 5.19, 105_228, 248),
    row("tiger-a", Mdp, 4, 4.80, 944_512_102, 19_752),
    row("tiger-b", Mdp, 2, 20.00, 171, 8),
    row("tiger-b", Mdp, 3, 30.00, 26_496, 168),
    row("tiger-b", Mdp, 4, 40.00, 344_426_508, 26_488),
    row("channel", Mdp, 2, 2.00, 9, 3),
    row("channel", Mdp, 3, 2.99, 1_044, 10),
    row("channel", Mdp, 4, 3.89, 33_556_500, 1_038),
    row("tiger-a", Recursive, 2, -4.00, 252, 8),
    row("tiger-a", Recursive, 3, 5.19, 105_066, 88),
    row("tiger-a", Recursive, 4, 4.80, 879_601_444, 18_020),
    row("tiger-b", Recursive, 2, 20.00, 171, 8),
    row("tiger-b", Recursive, 3, 30.00, 26_415, 158),
    row("tiger-b", Recursive, 4, 40.00, 344_400_183, 25_102),
    row("channel", Recursive, 2, 2.00, 9, 3),
    row("channel", Recursive, 3, 2.99, 263, 6),
    row("channel", Recursive, 4, 3.89, 16_778_260, 461),
];

pub fn lookup(problem: &str, heuristic: HeuristicKind, horizon: usize) -> Option<&'static PublishedRow> {
    PUBLISHED.iter().find(|r| r.problem == problem && r.heuristic == heuristic && r.horizon == horizon)
}

pub fn value_matches(published: f64, value: f64) -> bool {
    (published - value).abs() <= VALUE_TOLERANCE
}
