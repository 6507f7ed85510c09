//! Best-first search over policy vectors.
//!
//! Nodes are depth-`t` policy vectors ordered by `V + w·H`, where `V` is the
//! exact expected reward of the first `t` steps and `H` the heuristic bound
//! on the remaining `T - t`. A selected node produces one child per step
//! through its expansion cursor and stays open until the cursor is exhausted.
//! Full-depth children never enter the open list; the best one seen so far is
//! the incumbent, and every open node whose `V + H` does not exceed it is
//! discarded. The search is over once the open list is empty.

mod brute;
mod open;

use std::rc::Rc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::evaluation::Frontier;
use crate::heuristics::HeuristicTable;
use crate::model::{DecPomdp, Violation};
use crate::policy::{ExpansionCursor, PolicyError, PolicyVector};

pub use brute::{brute_force, brute_force_capped, enumerate_trees, BruteForceResult, DEFAULT_PAIR_CAP};
pub use open::{Handle, OpenList, Prioritized};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search options: {0}")]
    InvalidOptions(String),
    #[error("model fails validation ({} violations)", .0.len())]
    InvalidModel(Vec<Violation>),
    #[error("heuristic table covers 0..={available} remaining steps but {needed} are needed")]
    TableTooShort { needed: usize, available: usize },
    #[error("heuristic table has {got} states, model has {expected}")]
    TableShape { got: usize, expected: usize },
    #[error("brute force would enumerate {pairs} vectors, above the cap of {cap}")]
    CapExceeded { pairs: String, cap: u64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub horizon: usize,
    /// Heuristic weight in selection keys, in `(0, 1]`.
    pub weight: f64,
    /// Stop after this many evaluated vectors.
    pub node_budget: Option<u64>,
    pub time_budget: Option<Duration>,
    /// Discard open nodes dominated by the incumbent. Turning this off keeps
    /// every generated node and runs until the open list drains.
    pub prune: bool,
}

impl Options {
    pub fn new(horizon: usize) -> Self {
        Options { horizon, weight: 1.0, node_budget: None, time_budget: None, prune: true }
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Options { weight, ..self }
    }

    fn check(&self) -> Result<(), SearchError> {
        if self.horizon == 0 {
            return Err(SearchError::InvalidOptions("horizon must be at least 1".into()));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(SearchError::InvalidOptions(format!("weight {} is outside (0, 1]", self.weight)));
        }
        Ok(())
    }
}

/// One incumbent improvement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub elapsed: Duration,
    pub value: f64,
    /// Value of `evaluated_count` when the improving vector was evaluated.
    pub evaluated: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    /// Vectors created and evaluated, roots included.
    pub evaluated_count: u64,
    /// Peak number of live open nodes.
    pub max_open_size: usize,
    pub incumbent_trace: Vec<TracePoint>,
    /// Evaluations spent building the heuristic table.
    pub subsearch_evaluated: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Best full-depth vector found; `None` only if a budget ran out first.
    pub vector: Option<PolicyVector>,
    /// Its value, or negative infinity without a vector.
    pub value: f64,
    pub stats: SearchStats,
    pub proven_optimal: bool,
}

/// Passed to the anytime callback.
#[derive(Debug)]
pub struct Improvement<'a> {
    pub elapsed: Duration,
    pub value: f64,
    pub evaluated: u64,
    pub vector: &'a PolicyVector,
}

/// An open search node.
#[derive(Debug)]
pub struct SearchNode {
    vector: Rc<PolicyVector>,
    prefix_value: f64,
    heuristic_value: f64,
    f_value: f64,
    selection_key: f64,
    expansion: Option<Box<Expansion>>,
}

impl SearchNode {
    pub fn vector(&self) -> &PolicyVector {
        &self.vector
    }

    pub fn prefix_value(&self) -> f64 {
        self.prefix_value
    }

    pub fn heuristic_value(&self) -> f64 {
        self.heuristic_value
    }
}

impl Prioritized for SearchNode {
    fn selection_key(&self) -> f64 {
        self.selection_key
    }

    fn f_value(&self) -> f64 {
        self.f_value
    }

    fn depth(&self) -> usize {
        self.vector.depth()
    }
}

/// Child-evaluation tables of one parent.
///
/// For each joint history of the parent with nonzero probability, the
/// expected immediate reward and expected next-step bound of every joint
/// action, weighted by that history's state weights. A child's step reward
/// is then one table lookup per history.
#[derive(Debug)]
struct Expansion {
    cursor: ExpansionCursor,
    /// Cursor digit holding the leaf action of agent `i` at live history `θ`,
    /// at `θ * n_agents + i`.
    digit_of: Vec<usize>,
    reward: Vec<f64>,
    /// Empty when children are full depth.
    bound: Vec<f64>,
    live: usize,
}

enum Flow {
    Exhausted,
    Yield,
    OutOfBudget,
}

struct Search<'a, F> {
    model: &'a DecPomdp,
    options: &'a Options,
    /// `q[k][s * JA + ja] = sum_s' P(s' | s, ja) h^k(s')`.
    q: Vec<Vec<f64>>,
    strides: Vec<usize>,
    open: OpenList<SearchNode>,
    incumbent: Option<PolicyVector>,
    incumbent_value: f64,
    stats: SearchStats,
    start: Instant,
    on_improvement: F,
}

impl<F: FnMut(&Improvement)> Search<'_, F> {
    fn expansion(&self, vector: &PolicyVector) -> Result<Expansion, SearchError> {
        let model = self.model;
        let t = vector.depth();
        let cursor = ExpansionCursor::new(model, t)?;
        let frontier = Frontier::of_vector(model, vector);
        let n_agents = model.n_agents();
        let n_ja = model.n_joint_actions();
        let remaining = self.options.horizon - t - 1;
        let q = &self.q[remaining];

        let mut offsets = vec![0; n_agents];
        for i in 1..n_agents {
            offsets[i] = offsets[i - 1] + frontier.per_agent()[i - 1];
        }
        let mut ranks = vec![0; n_agents];
        let mut digit_of = Vec::new();
        let mut reward = Vec::new();
        let mut bound = Vec::new();
        let mut live = 0;
        for theta in 0..frontier.n_histories() {
            let w = frontier.weights(theta);
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            live += 1;
            frontier.decode_into(theta, &mut ranks);
            digit_of.extend(ranks.iter().zip(&offsets).map(|(r, o)| r + o));
            for ja in 0..n_ja {
                reward.push(w.iter().enumerate().map(|(s, ws)| ws * model.reward(s, ja)).sum());
                if remaining > 0 {
                    bound.push(w.iter().enumerate().map(|(s, ws)| ws * q[s * n_ja + ja]).sum());
                }
            }
        }
        Ok(Expansion { cursor, digit_of, reward, bound, live })
    }

    fn out_of_budget(&self) -> bool {
        if let Some(budget) = self.options.node_budget {
            if self.stats.evaluated_count >= budget {
                return true;
            }
        }
        if let Some(limit) = self.options.time_budget {
            if self.stats.evaluated_count.is_multiple_of(1024) && self.start.elapsed() >= limit {
                return true;
            }
        }
        false
    }

    /// Produces children of one parent until it is exhausted or, for a real
    /// parent, until it may no longer be the best open node.
    fn expand(
        &mut self,
        parent: Option<Handle>,
        vector: &PolicyVector,
        prefix_value: f64,
        exp: &mut Expansion,
    ) -> Flow {
        let n_agents = self.model.n_agents();
        let n_ja = self.model.n_joint_actions();
        let full_depth = vector.depth() + 1 == self.options.horizon;
        loop {
            if self.out_of_budget() {
                return Flow::OutOfBudget;
            }
            let digits = exp.cursor.digits();
            let mut step = 0.0;
            let mut h = 0.0;
            for theta in 0..exp.live {
                let mut ja = 0;
                for i in 0..n_agents {
                    ja += digits[exp.digit_of[theta * n_agents + i]] * self.strides[i];
                }
                step += exp.reward[theta * n_ja + ja];
                if !full_depth {
                    h += exp.bound[theta * n_ja + ja];
                }
            }
            let v = prefix_value + step;
            self.stats.evaluated_count += 1;

            let mut stay = true;
            if full_depth {
                if v > self.incumbent_value {
                    let child = vector.extend(digits);
                    self.improve(child, v);
                    if self.options.prune {
                        self.open.prune(v);
                        stay = parent.is_none_or(|p| self.open.contains(p));
                    }
                }
            } else {
                let f = v + h;
                if !self.options.prune || f > self.incumbent_value {
                    let node = SearchNode {
                        vector: Rc::new(vector.extend(digits)),
                        prefix_value: v,
                        heuristic_value: h,
                        f_value: f,
                        selection_key: v + self.options.weight * h,
                        expansion: None,
                    };
                    self.open.push(node);
                    stay = parent.is_none();
                }
            }

            exp.cursor.advance();
            if exp.cursor.is_exhausted() {
                return Flow::Exhausted;
            }
            if !stay {
                return Flow::Yield;
            }
        }
    }

    fn improve(&mut self, vector: PolicyVector, value: f64) {
        let elapsed = self.start.elapsed();
        let evaluated = self.stats.evaluated_count;
        self.stats.incumbent_trace.push(TracePoint { elapsed, value, evaluated });
        (self.on_improvement)(&Improvement { elapsed, value, evaluated, vector: &vector });
        self.incumbent = Some(vector);
        self.incumbent_value = value;
    }

    fn run(&mut self) -> Result<bool, SearchError> {
        let root = PolicyVector::empty(self.model);
        let mut exp = self.expansion(&root)?;
        if let Flow::OutOfBudget = self.expand(None, &root, 0.0, &mut exp) {
            return Ok(false);
        }
        while let Some(handle) = self.open.peek() {
            let node = self.open.get_mut(handle).expect("peeked node is live");
            let vector = Rc::clone(&node.vector);
            let prefix_value = node.prefix_value;
            let mut exp = match node.expansion.take() {
                Some(exp) => exp,
                None => Box::new(self.expansion(&vector)?),
            };
            match self.expand(Some(handle), &vector, prefix_value, &mut exp) {
                Flow::Exhausted => {
                    self.open.remove(handle);
                }
                Flow::Yield => {
                    if let Some(node) = self.open.get_mut(handle) {
                        node.expansion = Some(exp);
                    }
                }
                Flow::OutOfBudget => return Ok(false),
            }
        }
        Ok(true)
    }
}

fn successor_bounds(model: &DecPomdp, table: &HeuristicTable, horizon: usize) -> Result<Vec<Vec<f64>>, SearchError> {
    let needed = horizon - 1;
    if table.max_remaining() < needed {
        return Err(SearchError::TableTooShort { needed, available: table.max_remaining() });
    }
    let n = model.n_states();
    let n_ja = model.n_joint_actions();
    let mut q = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let row = table.row(k).expect("checked above");
        if row.len() != n {
            return Err(SearchError::TableShape { got: row.len(), expected: n });
        }
        let mut qk = vec![0.0; n * n_ja];
        if k > 0 {
            for s in 0..n {
                for ja in 0..n_ja {
                    qk[s * n_ja + ja] = model.transition_row(s, ja).iter().zip(row).map(|(p, h)| p * h).sum();
                }
            }
        }
        q.push(qk);
    }
    Ok(q)
}

/// Optimal depth-`T` policy vector under an admissible table, with `weight`
/// affecting only the order in which nodes are selected.
pub fn maa_star(model: &DecPomdp, options: &Options, table: &HeuristicTable) -> Result<SearchResult, SearchError> {
    maa_star_with(model, options, table, |_| {})
}

/// As [`maa_star`], reporting every incumbent improvement to `on_improvement`.
pub fn maa_star_with<F>(
    model: &DecPomdp,
    options: &Options,
    table: &HeuristicTable,
    on_improvement: F,
) -> Result<SearchResult, SearchError>
where
    F: FnMut(&Improvement),
{
    options.check()?;
    model.validate().map_err(SearchError::InvalidModel)?;
    let q = successor_bounds(model, table, options.horizon)?;
    let mut strides = vec![1; model.n_agents()];
    for i in (0..model.n_agents().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * model.n_actions(i + 1);
    }
    let mut search = Search {
        model,
        options,
        q,
        strides,
        open: OpenList::new(),
        incumbent: None,
        incumbent_value: f64::NEG_INFINITY,
        stats: SearchStats { subsearch_evaluated: table.build_evaluations(), ..SearchStats::default() },
        start: Instant::now(),
        on_improvement,
    };
    let proven_optimal = search.run()?;
    let mut stats = search.stats;
    stats.max_open_size = search.open.max_len();
    stats.wall_time = search.start.elapsed();
    Ok(SearchResult { vector: search.incumbent, value: search.incumbent_value, stats, proven_optimal })
}

/// Weighted search with `0 < weight < 1`: selection leans on the exact prefix
/// value, so incumbents tend to appear earlier, while pruning and termination
/// still use the unweighted bound.
pub fn anytime_run<F>(
    model: &DecPomdp,
    options: &Options,
    table: &HeuristicTable,
    on_improvement: F,
) -> Result<SearchResult, SearchError>
where
    F: FnMut(&Improvement),
{
    if !(options.weight > 0.0 && options.weight < 1.0) {
        return Err(SearchError::InvalidOptions(format!(
            "anytime runs need a weight strictly between 0 and 1, got {}",
            options.weight
        )));
    }
    maa_star_with(model, options, table, on_improvement)
}
