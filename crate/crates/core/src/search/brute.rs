//! Exhaustive enumeration of depth-`T` policy vectors.

use crate::evaluation::evaluate;
use crate::model::DecPomdp;
use crate::policy::{tree_node_count, PolicyTree, PolicyVector};

use super::SearchError;

/// Default limit on the number of vectors `brute_force` will enumerate.
pub const DEFAULT_PAIR_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub vector: PolicyVector,
    pub value: f64,
    pub enumerated_count: u64,
}

/// Number of depth-`depth` trees of one agent, if it fits in a `u64`.
fn tree_count(model: &DecPomdp, agent: usize, depth: usize) -> Option<u64> {
    let nodes = u32::try_from(tree_node_count(model.n_observations(agent), depth)).ok()?;
    (model.n_actions(agent) as u64).checked_pow(nodes)
}

/// Every depth-`depth` tree of `agent`, ordered lexicographically by the
/// level-ordered node actions with the root most significant.
pub fn enumerate_trees(model: &DecPomdp, agent: usize, depth: usize) -> Vec<PolicyTree> {
    let k = model.n_observations(agent);
    let radix = model.n_actions(agent);
    let nodes = tree_node_count(k, depth);
    let mut digits = vec![0; nodes];
    let mut out = Vec::new();
    loop {
        out.push(PolicyTree::from_nodes_unchecked(agent, k, depth, digits.clone()));
        let mut carry = true;
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < radix {
                carry = false;
                break;
            }
            *d = 0;
        }
        if carry {
            return out;
        }
    }
}

/// [`brute_force_capped`] with [`DEFAULT_PAIR_CAP`].
pub fn brute_force(model: &DecPomdp, horizon: usize) -> Result<BruteForceResult, SearchError> {
    brute_force_capped(model, horizon, DEFAULT_PAIR_CAP)
}

/// Evaluates every depth-`horizon` vector and returns the first maximizer.
/// Vectors are visited with agent 0's tree index most significant.
pub fn brute_force_capped(model: &DecPomdp, horizon: usize, cap: u64) -> Result<BruteForceResult, SearchError> {
    if horizon == 0 {
        return Err(SearchError::InvalidOptions("horizon must be at least 1".into()));
    }
    model.validate().map_err(SearchError::InvalidModel)?;
    let mut pairs: Option<u64> = Some(1);
    for i in 0..model.n_agents() {
        pairs = pairs.zip(tree_count(model, i, horizon)).and_then(|(a, b)| a.checked_mul(b));
    }
    match pairs {
        Some(p) if p <= cap => {}
        Some(p) => return Err(SearchError::CapExceeded { pairs: p.to_string(), cap }),
        None => return Err(SearchError::CapExceeded { pairs: "more than 2^64".into(), cap }),
    }

    let trees: Vec<Vec<PolicyTree>> = (0..model.n_agents()).map(|i| enumerate_trees(model, i, horizon)).collect();
    let mut index = vec![0; trees.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut count = 0u64;
    loop {
        let vector = PolicyVector::new(index.iter().enumerate().map(|(i, &j)| trees[i][j].clone()).collect())?;
        let value = evaluate(model, &vector);
        count += 1;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, index.clone()));
        }
        let mut carry = true;
        for (i, j) in index.iter_mut().enumerate().rev() {
            *j += 1;
            if *j < trees[i].len() {
                carry = false;
                break;
            }
            *j = 0;
        }
        if carry {
            break;
        }
    }
    let (value, index) = best.expect("at least one vector");
    let vector = PolicyVector::new(index.iter().enumerate().map(|(i, &j)| trees[i][j].clone()).collect())?;
    Ok(BruteForceResult { vector, value, enumerated_count: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    #[test]
    fn tree_counts() {
        let tiger = builtin("tiger-a").unwrap();
        assert_eq!(enumerate_trees(&tiger, 0, 2).len(), 27);
        let channel = builtin("channel").unwrap();
        assert_eq!(enumerate_trees(&channel, 1, 3).len(), 128);
        let first = &enumerate_trees(&channel, 0, 2)[1];
        assert_eq!(first.nodes(), &[0, 0, 1]);
    }

    #[test]
    fn small_optima() {
        let r = brute_force(&builtin("tiger-a").unwrap(), 2).unwrap();
        assert_eq!(r.enumerated_count, 729);
        assert!((r.value + 4.0).abs() < 1e-9);
        let r = brute_force(&builtin("channel").unwrap(), 2).unwrap();
        assert_eq!(r.enumerated_count, 64);
        assert!((r.value - 2.0).abs() < 1e-9);
        assert_eq!(brute_force(&builtin("tiger-b").unwrap(), 1).unwrap().value, 10.0);
    }

    #[test]
    fn cap() {
        let m = builtin("tiger-a").unwrap();
        assert!(matches!(brute_force_capped(&m, 2, 728), Err(SearchError::CapExceeded { .. })));
        assert!(matches!(brute_force(&m, 8), Err(SearchError::CapExceeded { .. })));
    }
}
