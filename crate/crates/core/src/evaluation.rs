//! Exact expected values of policy vectors.
//!
//! All routines walk the joint observation histories of a vector depth
//! first, carrying an unnormalized state weight vector: the weight of state
//! `s` at a history is the joint probability of reaching `s` while observing
//! that history. Branches whose total weight is exactly zero are skipped.
//! The cost is one `O(|S|^2)` step per reachable history node.

use thiserror::Error;

use crate::model::{DecPomdp, StateDistribution};
use crate::policy::{PolicyError, PolicyTree, PolicyVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("completion depth {completion} does not complete a depth-{prefix} vector to horizon {horizon}")]
    DepthMismatch { prefix: usize, completion: usize, horizon: usize },
    #[error("completion has no tree for agent {agent}, history rank {rank}")]
    MissingHistory { agent: usize, rank: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// The joint action `delta` prescribes at `level` for per-agent history ranks.
#[inline]
fn joint_action_at(model: &DecPomdp, delta: &PolicyVector, level: usize, ranks: &[usize]) -> usize {
    let mut ja = 0;
    for (i, tree) in delta.trees().iter().enumerate() {
        ja = ja * model.n_actions(i) + tree.action_at_rank(level, ranks[i]);
    }
    ja
}

/// `pred(s') = sum_s w(s) P(s' | s, ja)`.
#[inline]
fn predict(model: &DecPomdp, weights: &[f64], ja: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(model.transition_row(s, ja)) {
            *o += w * p;
        }
    }
}

struct Walk<'a, F> {
    model: &'a DecPomdp,
    delta: &'a PolicyVector,
    ranks: Vec<usize>,
    joint_obs: Vec<Vec<usize>>,
    visit: F,
}

impl<F> Walk<'_, F>
where
    F: FnMut(usize, &[usize], &[f64], usize, &[f64]),
{
    /// `stack[..S]` holds the current weights; deeper levels use the rest.
    /// The visitor receives `(level, ranks, weights, joint action, prediction)`.
    fn run(&mut self, level: usize, stack: &mut [f64]) {
        let n = self.model.n_states();
        let (cur, rest) = stack.split_at_mut(n);
        let ja = joint_action_at(self.model, self.delta, level, &self.ranks);
        let (pred, rest) = rest.split_at_mut(n);
        predict(self.model, cur, ja, pred);
        (self.visit)(level, &self.ranks, cur, ja, pred);
        if level + 1 == self.delta.depth() {
            return;
        }
        for jo in 0..self.model.n_joint_observations() {
            let next = &mut rest[..n];
            let mut total = 0.0;
            for (s2, slot) in next.iter_mut().enumerate() {
                *slot = pred[s2] * self.model.observation(s2, ja, jo);
                total += *slot;
            }
            if total == 0.0 {
                continue;
            }
            for (i, r) in self.ranks.iter_mut().enumerate() {
                *r = *r * self.model.n_observations(i) + self.joint_obs[jo][i];
            }
            self.run(level + 1, rest);
            for (i, r) in self.ranks.iter_mut().enumerate() {
                *r = (*r - self.joint_obs[jo][i]) / self.model.n_observations(i);
            }
        }
    }
}

fn walk<F>(model: &DecPomdp, delta: &PolicyVector, visit: F)
where
    F: FnMut(usize, &[usize], &[f64], usize, &[f64]),
{
    if delta.depth() == 0 {
        return;
    }
    let n = model.n_states();
    let mut stack = vec![0.0; n * (2 * delta.depth() + 1)];
    stack[..n].copy_from_slice(model.start().weights());
    let joint_obs = (0..model.n_joint_observations()).map(|jo| model.split_joint_observation(jo)).collect();
    let mut w = Walk { model, delta, ranks: vec![0; model.n_agents()], joint_obs, visit };
    w.run(0, &mut stack);
}

/// Expected total reward of executing `delta` from the model's start
/// distribution; the reward of step `t` is taken on the state before the
/// `t`-th transition.
pub fn evaluate(model: &DecPomdp, delta: &PolicyVector) -> f64 {
    let mut value = 0.0;
    walk(model, delta, |_, _, w, ja, _| {
        for (s, &ws) in w.iter().enumerate() {
            value += ws * model.reward(s, ja);
        }
    });
    value
}

/// State distribution after executing all levels of `delta`, marginalized
/// over observation histories.
pub fn reachable_distribution(model: &DecPomdp, delta: &PolicyVector) -> StateDistribution {
    if delta.depth() == 0 {
        return model.start().clone();
    }
    let last = delta.depth() - 1;
    let mut out = vec![0.0; model.n_states()];
    walk(model, delta, |level, _, _, _, pred| {
        if level == last {
            out.iter_mut().zip(pred).for_each(|(o, p)| *o += p);
        }
    });
    StateDistribution::from_raw(out)
}

/// Unnormalized state weights for every joint observation history of one
/// length `t`.
///
/// Joint histories are indexed by the mixed-radix combination of per-agent
/// history ranks, agent 0 most significant. The weights at a history sum to
/// that history's probability; dividing gives the history-conditional state
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    depth: usize,
    n_states: usize,
    per_agent: Vec<usize>,
    weights: Vec<f64>,
}

impl Frontier {
    /// The empty history carrying the start distribution.
    pub fn initial(model: &DecPomdp) -> Self {
        Frontier {
            depth: 0,
            n_states: model.n_states(),
            per_agent: vec![1; model.n_agents()],
            weights: model.start().weights().to_vec(),
        }
    }

    fn zeros(model: &DecPomdp, depth: usize) -> Self {
        let per_agent: Vec<usize> = (0..model.n_agents()).map(|i| model.n_observations(i).pow(depth as u32)).collect();
        let count: usize = per_agent.iter().product();
        Frontier { depth, n_states: model.n_states(), per_agent, weights: vec![0.0; count * model.n_states()] }
    }

    /// Weights after executing all of `delta`, by depth-first traversal.
    pub fn of_vector(model: &DecPomdp, delta: &PolicyVector) -> Self {
        if delta.depth() == 0 {
            return Self::initial(model);
        }
        let mut out = Self::zeros(model, delta.depth());
        let last = delta.depth() - 1;
        let n = model.n_states();
        walk(model, delta, |level, ranks, _, ja, pred| {
            if level != last {
                return;
            }
            for jo in 0..model.n_joint_observations() {
                let obs = model.split_joint_observation(jo);
                let next: Vec<usize> =
                    ranks.iter().enumerate().map(|(i, &r)| r * model.n_observations(i) + obs[i]).collect();
                let theta = out.index_of(&next);
                for s2 in 0..n {
                    out.weights[theta * n + s2] = pred[s2] * model.observation(s2, ja, jo);
                }
            }
        });
        out
    }

    /// Weights one level deeper, given the joint action taken at each
    /// history of this frontier.
    pub fn advance(&self, model: &DecPomdp, mut joint_action_at: impl FnMut(usize) -> usize) -> Frontier {
        let n = self.n_states;
        let mut out = Self::zeros(model, self.depth + 1);
        let mut pred = vec![0.0; n];
        let mut ranks = vec![0; self.per_agent.len()];
        let mut next = vec![0; self.per_agent.len()];
        for theta in 0..self.n_histories() {
            let w = self.weights(theta);
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            let ja = joint_action_at(theta);
            predict(model, w, ja, &mut pred);
            self.decode_into(theta, &mut ranks);
            for jo in 0..model.n_joint_observations() {
                let obs = model.split_joint_observation(jo);
                for i in 0..ranks.len() {
                    next[i] = ranks[i] * model.n_observations(i) + obs[i];
                }
                let idx = out.index_of(&next);
                for s2 in 0..n {
                    out.weights[idx * n + s2] = pred[s2] * model.observation(s2, ja, jo);
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_histories(&self) -> usize {
        self.weights.len() / self.n_states
    }

    /// Number of length-`t` histories of each agent.
    pub fn per_agent(&self) -> &[usize] {
        &self.per_agent
    }

    pub fn weights(&self, theta: usize) -> &[f64] {
        &self.weights[theta * self.n_states..(theta + 1) * self.n_states]
    }

    pub fn probability(&self, theta: usize) -> f64 {
        self.weights(theta).iter().sum()
    }

    pub fn index_of(&self, ranks: &[usize]) -> usize {
        ranks.iter().zip(&self.per_agent).fold(0, |acc, (&r, &n)| acc * n + r)
    }

    pub fn decode_into(&self, mut theta: usize, ranks: &mut [usize]) {
        for (r, &n) in ranks.iter_mut().zip(&self.per_agent).rev() {
            *r = theta % n;
            theta /= n;
        }
    }

    /// Sum of the weights over all histories.
    pub fn marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for theta in 0..self.n_histories() {
            out.iter_mut().zip(self.weights(theta)).for_each(|(o, w)| *o += w);
        }
        out
    }
}

/// Trees to run after a depth-`t` prefix: one depth-`(T - t)` tree for every
/// length-`t` history of every agent, indexed `[agent][history rank]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    horizon_remaining: usize,
    trees: Vec<Vec<PolicyTree>>,
}

impl Completion {
    pub fn new(horizon_remaining: usize, trees: Vec<Vec<PolicyTree>>) -> Result<Self, EvalError> {
        for (agent, per_history) in trees.iter().enumerate() {
            for tree in per_history {
                if tree.depth() != horizon_remaining || tree.agent() != agent {
                    return Err(EvalError::DepthMismatch {
                        prefix: 0,
                        completion: tree.depth(),
                        horizon: horizon_remaining,
                    });
                }
            }
        }
        Ok(Completion { horizon_remaining, trees })
    }

    pub fn horizon_remaining(&self) -> usize {
        self.horizon_remaining
    }

    pub fn tree(&self, agent: usize, rank: usize) -> Option<&PolicyTree> {
        self.trees.get(agent).and_then(|t| t.get(rank))
    }
}

/// Attaches the completion below every leaf history of `delta`.
pub fn stitch(delta: &PolicyVector, completion: &Completion) -> Result<PolicyVector, EvalError> {
    let t = delta.depth();
    let rest = completion.horizon_remaining;
    let mut trees = Vec::with_capacity(delta.trees().len());
    for (agent, prefix) in delta.trees().iter().enumerate() {
        let k = prefix.branching();
        let histories = k.pow(t as u32);
        let attached: Vec<&PolicyTree> = (0..histories)
            .map(|rank| completion.tree(agent, rank).ok_or(EvalError::MissingHistory { agent, rank }))
            .collect::<Result<_, _>>()?;
        if completion.trees.get(agent).map_or(0, Vec::len) != histories {
            return Err(EvalError::MissingHistory { agent, rank: histories });
        }
        let mut nodes = prefix.nodes().to_vec();
        for level in t..t + rest {
            let suffix_len = k.pow((level - t) as u32);
            for rank in 0..k.pow(level as u32) {
                let sub = attached[rank / suffix_len];
                nodes.push(sub.action_at_rank(level - t, rank % suffix_len));
            }
        }
        trees.push(PolicyTree::from_nodes_unchecked(agent, k, t + rest, nodes));
    }
    Ok(PolicyVector::new(trees)?)
}

/// Value the completion adds on top of the prefix:
/// `evaluate(stitch(delta, completion)) - evaluate(delta)`.
pub fn completion_value(model: &DecPomdp, delta: &PolicyVector, completion: &Completion) -> Result<f64, EvalError> {
    let full = stitch(delta, completion)?;
    Ok(evaluate(model, &full) - evaluate(model, delta))
}
