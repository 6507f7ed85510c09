//! Per-state value bounds `h^k(s)` for `k` remaining steps, and the policy
//! vector heuristic built from them.
//!
//! The heuristic of a depth-`t` vector is the expectation of `h^(T-t)` under
//! the state distribution the vector reaches. It is admissible whenever every
//! `h^k(s)` bounds the best decentralized `k`-step value from `s`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::evaluation::reachable_distribution;
use crate::model::{DecPomdp, StateDistribution};
use crate::policy::PolicyVector;
use crate::search::{maa_star, Options, SearchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeuristicKind {
    /// Finite-horizon values of the fully observable, centralized MDP.
    Mdp,
    /// Exact decentralized optima from point-mass starts.
    Recursive,
    /// Supplied by the caller.
    External,
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::Mdp => "mdp",
            HeuristicKind::Recursive => "recursive",
            HeuristicKind::External => "external",
        })
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mdp" => Ok(HeuristicKind::Mdp),
            "recursive" => Ok(HeuristicKind::Recursive),
            other => Err(format!("unknown heuristic `{other}` (expected mdp or recursive)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("heuristic table has no row for {needed} remaining steps (it covers 0..={available})")]
    TableTooShort { needed: usize, available: usize },
    #[error("row 0 of a heuristic table must be all zeros")]
    NonZeroBase,
    #[error("heuristic row {row} has {got} entries for {states} states")]
    RowLength { row: usize, got: usize, states: usize },
    #[error("vector depth {depth} exceeds horizon {horizon}")]
    TooDeep { depth: usize, horizon: usize },
    #[error("recursive subsearch for state {state}, horizon {horizon} did not finish within its budget")]
    SubsearchUnfinished { state: usize, horizon: usize },
    #[error(transparent)]
    Search(Box<SearchError>),
}

/// `rows[k][s]` bounds the best `k`-step value from state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicTable {
    kind: HeuristicKind,
    horizon: usize,
    rows: Vec<Vec<f64>>,
    build_evaluations: u64,
}

impl HeuristicTable {
    /// Wraps caller-supplied rows; `rows[0]` must be zero.
    pub fn external(rows: Vec<Vec<f64>>, n_states: usize) -> Result<Self, HeuristicError> {
        check_rows(&rows, n_states)?;
        let horizon = rows.len().saturating_sub(1);
        Ok(HeuristicTable { kind: HeuristicKind::External, horizon, rows, build_evaluations: 0 })
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    /// Horizon the table was built for.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Largest remaining-step count with a row.
    pub fn max_remaining(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, remaining: usize) -> Option<&[f64]> {
        self.rows.get(remaining).map(Vec::as_slice)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Policy vectors evaluated by searches run while building the table.
    pub fn build_evaluations(&self) -> u64 {
        self.build_evaluations
    }
}

fn check_rows(rows: &[Vec<f64>], n_states: usize) -> Result<(), HeuristicError> {
    let Some(base) = rows.first() else {
        return Err(HeuristicError::TableTooShort { needed: 0, available: 0 });
    };
    for (row, values) in rows.iter().enumerate() {
        if values.len() != n_states {
            return Err(HeuristicError::RowLength { row, got: values.len(), states: n_states });
        }
    }
    if base.iter().any(|&v| v != 0.0) {
        return Err(HeuristicError::NonZeroBase);
    }
    Ok(())
}

/// `max_ja [R(s, ja) + sum_s' P(s'|s, ja) next(s')]`, first maximizer in
/// joint-action order.
fn bellman_backup(model: &DecPomdp, next: &[f64]) -> Vec<f64> {
    (0..model.n_states())
        .map(|s| {
            let mut best = f64::NEG_INFINITY;
            for ja in 0..model.n_joint_actions() {
                let future: f64 = model.transition_row(s, ja).iter().zip(next).map(|(p, v)| p * v).sum();
                let q = model.reward(s, ja) + future;
                if q > best {
                    best = q;
                }
            }
            best
        })
        .collect()
}

/// Finite-horizon value iteration on the underlying centralized MDP, rows
/// `0..=horizon`. Observations are ignored.
pub fn mdp_values(model: &DecPomdp, horizon: usize) -> HeuristicTable {
    let mut rows = vec![vec![0.0; model.n_states()]];
    for k in 1..=horizon {
        let next = bellman_backup(model, &rows[k - 1]);
        rows.push(next);
    }
    HeuristicTable { kind: HeuristicKind::Mdp, horizon, rows, build_evaluations: 0 }
}

/// Exact decentralized values `V*^k(s)` for `k` in `0..horizon`, built
/// bottom-up. Row 1 is the best immediate joint reward; each later row runs
/// one search per state from a point-mass start, using the rows already
/// built as its heuristic. Row `horizon` itself is not computed since a
/// horizon-`T` search never needs it.
///
/// `node_budget` bounds every subsearch; an unfinished subsearch is an error.
pub fn recursive_values(model: &DecPomdp, horizon: usize, node_budget: Option<u64>) -> Result<HeuristicTable, HeuristicError> {
    let n = model.n_states();
    let mut rows = vec![vec![0.0; n]];
    if horizon >= 2 {
        rows.push(bellman_backup(model, &rows[0]));
    }
    let mut build_evaluations = 0;
    for k in 2..horizon {
        let partial = HeuristicTable { kind: HeuristicKind::Recursive, horizon: k, rows: rows.clone(), build_evaluations: 0 };
        let mut row = Vec::with_capacity(n);
        for s in 0..n {
            let sub = model.with_start(StateDistribution::point_mass(n, s));
            let options = Options { node_budget, ..Options::new(k) };
            let result = maa_star(&sub, &options, &partial).map_err(|e| HeuristicError::Search(Box::new(e)))?;
            build_evaluations += result.stats.evaluated_count;
            if !result.proven_optimal {
                return Err(HeuristicError::SubsearchUnfinished { state: s, horizon: k });
            }
            row.push(result.value);
        }
        rows.push(row);
    }
    Ok(HeuristicTable { kind: HeuristicKind::Recursive, horizon, rows, build_evaluations })
}

/// Builds the table a horizon-`horizon` search needs.
pub fn build_table(model: &DecPomdp, kind: HeuristicKind, horizon: usize) -> Result<HeuristicTable, HeuristicError> {
    match kind {
        HeuristicKind::Mdp => Ok(mdp_values(model, horizon)),
        HeuristicKind::Recursive => recursive_values(model, horizon, None),
        HeuristicKind::External => Err(HeuristicError::TableTooShort { needed: horizon, available: 0 }),
    }
}

/// Expected `h^(T-t)` under the distribution a depth-`t` vector reaches.
pub fn heuristic_h(model: &DecPomdp, delta: &PolicyVector, table: &HeuristicTable, horizon: usize) -> Result<f64, HeuristicError> {
    let t = delta.depth();
    if t > horizon {
        return Err(HeuristicError::TooDeep { depth: t, horizon });
    }
    let remaining = horizon - t;
    let row = table
        .row(remaining)
        .ok_or(HeuristicError::TableTooShort { needed: remaining, available: table.max_remaining() })?;
    Ok(reachable_distribution(model, delta).dot(row))
}
