//! Independent oracles shared by the integration tests.
//!
//! These recompute values by explicit recursion over states and per-agent
//! observation sequences, without the library's weight-vector walk.

#![allow(dead_code)]

use maastar::model::random::{random_model, RandomModelSpec};
use maastar::model::{DecPomdp, StateDistribution};
use maastar::policy::{ObservationHistory, PolicyTree, PolicyVector};
use maastar::search::enumerate_trees;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Value equality tolerance for independently computed expectations.
pub const VALUE_TOLERANCE: f64 = 1e-9;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TOLERANCE
}

fn action(tree: &PolicyTree, sequence: &[usize]) -> usize {
    tree.action_at(&ObservationHistory::new(tree.agent(), sequence.to_vec())).unwrap()
}

fn joint_action(model: &DecPomdp, vector: &PolicyVector, histories: &[Vec<usize>]) -> usize {
    let actions: Vec<usize> = vector.trees().iter().zip(histories).map(|(t, h)| action(t, h)).collect();
    model.joint_action(&actions)
}

/// Expected reward from state `s` with the given per-agent histories.
fn value_from(model: &DecPomdp, vector: &PolicyVector, s: usize, histories: &mut Vec<Vec<usize>>) -> f64 {
    let level = histories[0].len();
    let ja = joint_action(model, vector, histories);
    let mut v = model.reward(s, ja);
    if level + 1 == vector.depth() {
        return v;
    }
    for s2 in 0..model.n_states() {
        let p = model.transition(s, ja, s2);
        if p == 0.0 {
            continue;
        }
        for jo in 0..model.n_joint_observations() {
            let o = model.observation(s2, ja, jo);
            if o == 0.0 {
                continue;
            }
            let obs = model.split_joint_observation(jo);
            for (h, &x) in histories.iter_mut().zip(&obs) {
                h.push(x);
            }
            v += p * o * value_from(model, vector, s2, histories);
            for h in histories.iter_mut() {
                h.pop();
            }
        }
    }
    v
}

/// Expected total reward by per-state recursion.
pub fn naive_value(model: &DecPomdp, vector: &PolicyVector) -> f64 {
    if vector.depth() == 0 {
        return 0.0;
    }
    let mut histories = vec![Vec::new(); model.n_agents()];
    (0..model.n_states())
        .map(|s| model.start().weights()[s] * value_from(model, vector, s, &mut histories))
        .sum()
}

/// A joint history of length `t` with its probability and the unnormalized
/// joint weight of each state.
#[derive(Debug, Clone)]
pub struct JointHistory {
    pub histories: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl JointHistory {
    pub fn probability(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn belief(&self) -> StateDistribution {
        let p = self.probability();
        StateDistribution::new(self.weights.iter().map(|w| w / p).collect()).unwrap()
    }
}

/// Every joint history of length `t` under `vector` (depth at least `t`),
/// including zero-probability ones.
pub fn joint_histories(model: &DecPomdp, vector: &PolicyVector, t: usize) -> Vec<JointHistory> {
    let mut out = vec![JointHistory {
        histories: vec![Vec::new(); model.n_agents()],
        weights: model.start().weights().to_vec(),
    }];
    for _ in 0..t {
        let mut next = Vec::new();
        for h in &out {
            let ja = joint_action(model, vector, &h.histories);
            for jo in 0..model.n_joint_observations() {
                let obs = model.split_joint_observation(jo);
                let mut weights = vec![0.0; model.n_states()];
                for (s, &w) in h.weights.iter().enumerate() {
                    for (s2, slot) in weights.iter_mut().enumerate() {
                        *slot += w * model.transition(s, ja, s2) * model.observation(s2, ja, jo);
                    }
                }
                let histories = h.histories.iter().zip(&obs).map(|(seq, &o)| [seq.as_slice(), &[o]].concat()).collect();
                next.push(JointHistory { histories, weights });
            }
        }
        out = next;
    }
    out
}

/// The subtree of `tree` below history `prefix`.
pub fn subtree(model: &DecPomdp, tree: &PolicyTree, prefix: &[usize]) -> PolicyTree {
    let k = tree.branching();
    let depth = tree.depth() - prefix.len();
    let mut nodes = Vec::new();
    for len in 0..depth {
        for h in ObservationHistory::all(tree.agent(), k, len) {
            let full: Vec<usize> = prefix.iter().copied().chain(history_sequence(&h, k, len)).collect();
            nodes.push(action(tree, &full));
        }
    }
    PolicyTree::from_nodes(model, tree.agent(), nodes).unwrap()
}

fn history_sequence(h: &ObservationHistory, k: usize, len: usize) -> Vec<usize> {
    let mut rank = h.rank(k).unwrap();
    let mut seq = vec![0; len];
    for slot in seq.iter_mut().rev() {
        *slot = rank % k;
        rank /= k;
    }
    seq
}

/// The completion below one joint history, as a vector of subtrees.
pub fn completion_at(model: &DecPomdp, vector: &PolicyVector, histories: &[Vec<usize>]) -> PolicyVector {
    PolicyVector::new(vector.trees().iter().zip(histories).map(|(t, h)| subtree(model, t, h)).collect()).unwrap()
}

/// Every depth-`depth` policy vector, agent 0's tree index most significant.
pub fn all_vectors(model: &DecPomdp, depth: usize) -> Vec<PolicyVector> {
    let per_agent: Vec<Vec<PolicyTree>> = (0..model.n_agents()).map(|i| enumerate_trees(model, i, depth)).collect();
    let mut out = vec![Vec::new()];
    for trees in &per_agent {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<PolicyTree>| {
                trees.iter().map(move |t| {
                    let mut v = prefix.clone();
                    v.push(t.clone());
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(|trees| PolicyVector::new(trees).unwrap()).collect()
}

/// Small random models within the acceptance bounds; every other one uses
/// the largest allowed sets.
pub fn random_models(seed: u64, count: usize) -> Vec<DecPomdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_model(&mut rng, &RandomModelSpec { full_size: i % 2 == 0, ..RandomModelSpec::default() }))
        .collect()
}

/// One random model; even seeds use the largest allowed sets.
pub fn model_from_seed(seed: u64) -> DecPomdp {
    let spec = RandomModelSpec { full_size: seed % 2 == 0, ..RandomModelSpec::default() };
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), &spec)
}
