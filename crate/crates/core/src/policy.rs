//! Policy trees, policy vectors and incremental child enumeration.
//!
//! A depth-`t` tree for an agent with `k` observations is a complete `k`-ary
//! tree with `t` action levels. It is stored flat, level by level: the node
//! for an observation history `(o_1, ..., o_l)` lives at
//! `offset(l) + rank`, where `rank` reads the history as a base-`k` number
//! with `o_1` most significant and `offset(l) = 1 + k + ... + k^(l-1)`.
//! Extending a tree by one level is therefore a plain `extend` of the node
//! array.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::DecPomdp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("child count overflows 64 bits")]
    Overflow,
    #[error("history of length {len} does not address a node of a depth-{depth} tree")]
    HistoryTooLong { len: usize, depth: usize },
    #[error("observation index {index} is out of range for agent {agent}")]
    InvalidObservation { agent: usize, index: usize },
    #[error("action index {index} is out of range for agent {agent}")]
    InvalidAction { agent: usize, index: usize },
    #[error("{0}")]
    Shape(String),
}

/// Number of nodes in a complete tree with `depth` levels and branching `k`.
pub fn tree_node_count(k: usize, depth: usize) -> usize {
    (0..depth).map(|l| k.pow(l as u32)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyTree {
    agent: usize,
    branching: usize,
    depth: usize,
    nodes: Vec<usize>,
}

impl PolicyTree {
    /// Builds a tree from its flat node array, checking size and action
    /// indices against the model.
    pub fn from_nodes(model: &DecPomdp, agent: usize, nodes: Vec<usize>) -> Result<Self, PolicyError> {
        let k = model.n_observations(agent);
        let mut depth = 0;
        while tree_node_count(k, depth) < nodes.len() {
            depth += 1;
        }
        if tree_node_count(k, depth) != nodes.len() {
            return Err(PolicyError::Shape(format!("{} nodes do not form a complete tree", nodes.len())));
        }
        if let Some(&bad) = nodes.iter().find(|&&a| a >= model.n_actions(agent)) {
            return Err(PolicyError::InvalidAction { agent, index: bad });
        }
        Ok(PolicyTree { agent, branching: k, depth, nodes })
    }

    pub(crate) fn from_nodes_unchecked(agent: usize, branching: usize, depth: usize, nodes: Vec<usize>) -> Self {
        debug_assert_eq!(nodes.len(), tree_node_count(branching, depth));
        PolicyTree { agent, branching, depth, nodes }
    }

    /// A depth-`depth` tree taking the same action everywhere.
    pub fn constant(model: &DecPomdp, agent: usize, depth: usize, action: usize) -> Self {
        let k = model.n_observations(agent);
        assert!(action < model.n_actions(agent));
        PolicyTree { agent, branching: k, depth, nodes: vec![action; tree_node_count(k, depth)] }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn level_offset(&self, level: usize) -> usize {
        tree_node_count(self.branching, level)
    }

    pub fn level_len(&self, level: usize) -> usize {
        self.branching.pow(level as u32)
    }

    /// The action stored for the history of length `level` with the given rank.
    #[inline]
    pub fn action_at_rank(&self, level: usize, rank: usize) -> usize {
        self.nodes[self.level_offset(level) + rank]
    }

    pub fn action_at(&self, history: &ObservationHistory) -> Result<usize, PolicyError> {
        let len = history.sequence.len();
        if len >= self.depth {
            return Err(PolicyError::HistoryTooLong { len, depth: self.depth });
        }
        let rank = history.rank(self.branching)?;
        Ok(self.action_at_rank(len, rank))
    }

    /// Actions on the deepest level.
    pub fn leaves(&self) -> &[usize] {
        match self.depth {
            0 => &[],
            d => &self.nodes[self.level_offset(d - 1)..],
        }
    }

    /// The top `depth` levels of this tree.
    pub fn prefix(&self, depth: usize) -> PolicyTree {
        assert!(depth <= self.depth);
        PolicyTree {
            agent: self.agent,
            branching: self.branching,
            depth,
            nodes: self.nodes[..tree_node_count(self.branching, depth)].to_vec(),
        }
    }

    /// Appends a new leaf level; `leaf_actions` is indexed by history rank.
    pub fn extend(&self, leaf_actions: &[usize]) -> PolicyTree {
        debug_assert_eq!(leaf_actions.len(), self.level_len(self.depth));
        let mut nodes = Vec::with_capacity(self.nodes.len() + leaf_actions.len());
        nodes.extend_from_slice(&self.nodes);
        nodes.extend_from_slice(leaf_actions);
        PolicyTree { agent: self.agent, branching: self.branching, depth: self.depth + 1, nodes }
    }

    /// Renders the tree as a DOT digraph: nodes carry action names, edges
    /// carry observation names, and the root sits alone on the top rank.
    pub fn to_dot(&self, name: &str, actions: &[String], observations: &[String]) -> String {
        let mut out = String::new();
        writeln!(out, "digraph \"{}\" {{", escape(name)).unwrap();
        writeln!(out, "  rankdir=TB;").unwrap();
        for level in 0..self.depth {
            let offset = self.level_offset(level);
            for rank in 0..self.level_len(level) {
                let id = offset + rank;
                writeln!(out, "  n{id} [label=\"{}\"];", escape(&actions[self.nodes[id]])).unwrap();
            }
        }
        if self.depth > 0 {
            writeln!(out, "  {{ rank=min; n0; }}").unwrap();
        }
        for level in 0..self.depth.saturating_sub(1) {
            let offset = self.level_offset(level);
            let next = self.level_offset(level + 1);
            for rank in 0..self.level_len(level) {
                for (o, obs) in observations.iter().enumerate() {
                    let child = next + rank * self.branching + o;
                    writeln!(out, "  n{} -> n{child} [label=\"{}\"];", offset + rank, escape(obs)).unwrap();
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One agent's private observation sequence; addresses a tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationHistory {
    pub agent: usize,
    pub sequence: Vec<usize>,
}

impl ObservationHistory {
    pub fn new(agent: usize, sequence: Vec<usize>) -> Self {
        ObservationHistory { agent, sequence }
    }

    pub fn rank(&self, branching: usize) -> Result<usize, PolicyError> {
        self.sequence.iter().try_fold(0usize, |acc, &o| {
            if o >= branching {
                Err(PolicyError::InvalidObservation { agent: self.agent, index: o })
            } else {
                Ok(acc * branching + o)
            }
        })
    }

    /// Every history of the given length for an agent with `branching`
    /// observations, in rank order.
    pub fn all(agent: usize, branching: usize, len: usize) -> impl Iterator<Item = ObservationHistory> {
        (0..branching.pow(len as u32)).map(move |mut rank| {
            let mut sequence = vec![0; len];
            for slot in sequence.iter_mut().rev() {
                *slot = rank % branching;
                rank /= branching;
            }
            ObservationHistory { agent, sequence }
        })
    }
}

/// One tree per agent, all of the same depth.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyVector {
    depth: usize,
    trees: Vec<PolicyTree>,
}

impl PolicyVector {
    pub fn new(trees: Vec<PolicyTree>) -> Result<Self, PolicyError> {
        let depth = trees.first().map_or(0, PolicyTree::depth);
        if trees.iter().any(|t| t.depth != depth) {
            return Err(PolicyError::Shape("trees of a policy vector must share one depth".into()));
        }
        if trees.iter().enumerate().any(|(i, t)| t.agent != i) {
            return Err(PolicyError::Shape("tree i must belong to agent i".into()));
        }
        Ok(PolicyVector { depth, trees })
    }

    /// The depth-0 vector: nothing executed yet.
    pub fn empty(model: &DecPomdp) -> Self {
        let trees = (0..model.n_agents())
            .map(|i| PolicyTree { agent: i, branching: model.n_observations(i), depth: 0, nodes: Vec::new() })
            .collect();
        PolicyVector { depth: 0, trees }
    }

    /// Every agent runs a constant-action tree.
    pub fn constant(model: &DecPomdp, depth: usize, actions: &[usize]) -> Self {
        let trees = actions.iter().enumerate().map(|(i, &a)| PolicyTree::constant(model, i, depth, a)).collect();
        PolicyVector { depth, trees }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn trees(&self) -> &[PolicyTree] {
        &self.trees
    }

    pub fn tree(&self, agent: usize) -> &PolicyTree {
        &self.trees[agent]
    }

    pub fn prefix(&self, depth: usize) -> PolicyVector {
        PolicyVector { depth, trees: self.trees.iter().map(|t| t.prefix(depth)).collect() }
    }

    /// Appends one level to every tree. `leaf_actions` is the concatenation
    /// of each agent's new leaf actions in rank order, agent 0 first.
    pub fn extend(&self, leaf_actions: &[usize]) -> PolicyVector {
        let mut rest = leaf_actions;
        let trees = self
            .trees
            .iter()
            .map(|t| {
                let (mine, tail) = rest.split_at(t.level_len(self.depth));
                rest = tail;
                t.extend(mine)
            })
            .collect();
        debug_assert!(rest.is_empty());
        PolicyVector { depth: self.depth + 1, trees }
    }
}

/// All depth-1 vectors in lexicographic order of the agents' root actions.
pub fn root_vectors(model: &DecPomdp) -> Vec<PolicyVector> {
    (0..model.n_joint_actions())
        .map(|ja| PolicyVector::constant(model, 1, &model.split_joint_action(ja)))
        .collect()
}

/// Number of depth-`(t+1)` children of any depth-`t` vector:
/// the product over agents of `|A_i|^(|Ω_i|^t)`.
pub fn num_children(model: &DecPomdp, depth: usize) -> Result<u64, PolicyError> {
    let mut total: u64 = 1;
    for i in 0..model.n_agents() {
        let leaves = leaf_count(model.n_observations(i), depth)?;
        for _ in 0..leaves {
            total = total.checked_mul(model.n_actions(i) as u64).ok_or(PolicyError::Overflow)?;
        }
    }
    Ok(total)
}

fn leaf_count(branching: usize, depth: usize) -> Result<usize, PolicyError> {
    u32::try_from(depth)
        .ok()
        .and_then(|d| branching.checked_pow(d))
        .ok_or(PolicyError::Overflow)
}

/// Enumerates the children of one parent as a mixed-radix counter.
///
/// Digits are laid out agent-major, each agent's leaves in rank order; the
/// last leaf of the last agent is least significant. Digit `j` ranges over the
/// owning agent's actions.
#[derive(Debug, Clone)]
pub struct ExpansionCursor {
    next_child: u64,
    total: u64,
    radix: Vec<usize>,
    digits: Vec<usize>,
}

impl ExpansionCursor {
    /// A fresh cursor for a parent of the given depth.
    pub fn new(model: &DecPomdp, parent_depth: usize) -> Result<Self, PolicyError> {
        let total = num_children(model, parent_depth)?;
        let mut radix = Vec::new();
        for i in 0..model.n_agents() {
            let leaves = leaf_count(model.n_observations(i), parent_depth)?;
            radix.extend(std::iter::repeat_n(model.n_actions(i), leaves));
        }
        let digits = vec![0; radix.len()];
        Ok(ExpansionCursor { next_child: 0, total, radix, digits })
    }

    pub fn next_child(&self) -> u64 {
        self.next_child
    }

    pub fn num_children(&self) -> u64 {
        self.total
    }

    pub fn is_exhausted(&self) -> bool {
        self.next_child == self.total
    }

    pub fn radix(&self) -> &[usize] {
        &self.radix
    }

    /// Leaf actions of the child `next_child` denotes.
    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// Moves to the next child. The digit buffer is incremented in place.
    pub fn advance(&mut self) {
        debug_assert!(!self.is_exhausted());
        self.next_child += 1;
        for (d, &r) in self.digits.iter_mut().zip(&self.radix).rev() {
            *d += 1;
            if *d < r {
                return;
            }
            *d = 0;
        }
    }

    /// Mixed-radix decoding of an arbitrary child index.
    pub fn decode(&self, mut index: u64) -> Vec<usize> {
        let mut out = vec![0; self.radix.len()];
        for (d, &r) in out.iter_mut().zip(&self.radix).rev() {
            *d = (index % r as u64) as usize;
            index /= r as u64;
        }
        out
    }

    pub fn encode(&self, digits: &[usize]) -> u64 {
        digits.iter().zip(&self.radix).fold(0u64, |acc, (&d, &r)| acc * r as u64 + d as u64)
    }
}

/// Produces the cursor's next child of `parent` and advances the cursor, or
/// `None` once every child has been produced.
pub fn expand_child(parent: &PolicyVector, cursor: &mut ExpansionCursor) -> Option<PolicyVector> {
    if cursor.is_exhausted() {
        return None;
    }
    let child = parent.extend(cursor.digits());
    cursor.advance();
    Some(child)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::model::builtin;

    #[test]
    fn root_vector_counts() {
        assert_eq!(root_vectors(&builtin("tiger-a").unwrap()).len(), 9);
        assert_eq!(root_vectors(&builtin("channel").unwrap()).len(), 4);
        let single = crate::model::parse_model(
            "agents: 1\nstates: s\nstart: 1\nactions 0: a\nobservations 0: o\nT: s : a : s : 1\nO: s : a : o : 1\n",
        )
        .unwrap();
        let roots = root_vectors(&single);
        assert_eq!(roots.len(), 1);
        assert_eq!(num_children(&single, 5).unwrap(), 1);
    }

    #[test]
    fn root_order_is_lexicographic() {
        let m = builtin("tiger-a").unwrap();
        let roots = root_vectors(&m);
        let pairs: Vec<(usize, usize)> =
            roots.iter().map(|v| (v.tree(0).nodes()[0], v.tree(1).nodes()[0])).collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn child_counts() {
        let tiger = builtin("tiger-a").unwrap();
        assert_eq!(num_children(&tiger, 1).unwrap(), 81);
        assert_eq!(num_children(&tiger, 3).unwrap(), 3u64.pow(16));
        let channel = builtin("channel").unwrap();
        assert_eq!(num_children(&channel, 2).unwrap(), 256);
        assert_eq!(num_children(&channel, 6), Err(PolicyError::Overflow));
        assert!(ExpansionCursor::new(&channel, 6).is_err());
    }

    #[test]
    fn first_child_is_all_zero_and_82nd_call_is_exhausted() {
        let m = builtin("tiger-a").unwrap();
        let parent = root_vectors(&m).remove(4);
        let mut cursor = ExpansionCursor::new(&m, 1).unwrap();
        let first = expand_child(&parent, &mut cursor).unwrap();
        assert_eq!(first.depth(), 2);
        for tree in first.trees() {
            assert_eq!(tree.leaves(), &[0, 0]);
            assert_eq!(tree.nodes().len(), 3);
        }
        let mut seen = HashSet::from([first]);
        while let Some(child) = expand_child(&parent, &mut cursor) {
            assert_eq!(child.prefix(1), parent);
            assert!(seen.insert(child));
        }
        assert_eq!(seen.len(), 81);
        assert!(cursor.is_exhausted());
        assert!(expand_child(&parent, &mut cursor).is_none());
    }

    #[test]
    fn expansion_adds_one_level_of_leaves() {
        let m = builtin("channel").unwrap();
        let mut v = root_vectors(&m).remove(0);
        for t in 1..4 {
            let mut cursor = ExpansionCursor::new(&m, t).unwrap();
            let child = expand_child(&v, &mut cursor).unwrap();
            for agent in 0..2 {
                assert_eq!(child.tree(agent).nodes().len() - v.tree(agent).nodes().len(), 2usize.pow(t as u32));
            }
            v = child;
        }
    }

    #[test]
    fn action_at_addresses_nodes() {
        let m = builtin("tiger-a").unwrap();
        let listen = PolicyTree::constant(&m, 0, 2, 0);
        assert_eq!(listen.action_at(&ObservationHistory::new(0, vec![])), Ok(0));
        assert_eq!(listen.action_at(&ObservationHistory::new(0, vec![0])), Ok(0));
        assert_eq!(
            listen.action_at(&ObservationHistory::new(0, vec![0, 1])),
            Err(PolicyError::HistoryTooLong { len: 2, depth: 2 })
        );
        assert!(matches!(
            listen.action_at(&ObservationHistory::new(0, vec![5])),
            Err(PolicyError::InvalidObservation { .. })
        ));
        let tree = PolicyTree::from_nodes(&m, 1, vec![0, 1, 2, 0, 0, 1, 2]).unwrap();
        assert_eq!(tree.depth(), 3);
        assert_eq!(tree.action_at(&ObservationHistory::new(1, vec![1])), Ok(2));
        assert_eq!(tree.action_at(&ObservationHistory::new(1, vec![1, 0])), Ok(1));
        assert!(PolicyTree::from_nodes(&m, 1, vec![0, 1]).is_err());
        assert!(PolicyTree::from_nodes(&m, 1, vec![7]).is_err());
    }

    #[test]
    fn leaves_of_child_k_reencode_to_k() {
        let m = builtin("channel").unwrap();
        let parent = root_vectors(&m).remove(2).extend(&[1, 0, 0, 1]);
        let mut cursor = ExpansionCursor::new(&m, 2).unwrap();
        for k in 0..cursor.num_children() {
            assert_eq!(cursor.digits(), cursor.decode(k).as_slice());
            let child = expand_child(&parent, &mut cursor).unwrap();
            let leaves: Vec<usize> = child.trees().iter().flat_map(|t| t.leaves().iter().copied()).collect();
            assert_eq!(cursor.encode(&leaves), k);
        }
    }

    #[test]
    fn dot_export_shape() {
        let m = builtin("tiger-a").unwrap();
        let tree = PolicyTree::constant(&m, 0, 2, 0);
        let dot = tree.to_dot("agent 0", m.actions(0), m.observations(0));
        assert_eq!(dot.matches("label=\"listen\"").count(), 3);
        assert!(dot.contains("n0 -> n1 [label=\"hear-left\"]"));
        assert!(dot.contains("n0 -> n2 [label=\"hear-right\"]"));
        let single = PolicyTree::constant(&m, 0, 1, 1).to_dot("a", m.actions(0), m.observations(0));
        assert_eq!(single.matches("->").count(), 0);
        assert_eq!(single.matches("[label=").count(), 1);
    }
}
