//! Max-priority open list with lazy deletion.
//!
//! Entries order by selection key, then by depth (deeper first), then by
//! insertion order. Removed nodes leave stale heap entries behind; an entry is
//! stale when its slot is empty or holds a node with a different sequence
//! number. The heap is rebuilt once stale entries outnumber live nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    depth: usize,
    seq: u64,
    slot: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

/// What the open list needs to know about a stored node.
pub trait Prioritized {
    fn selection_key(&self) -> f64;
    fn f_value(&self) -> f64;
    fn depth(&self) -> usize;
}

/// Identifies one stored node; stays invalid once that node is removed, even
/// if its slot is reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handle {
    slot: usize,
    seq: u64,
}

#[derive(Debug)]
pub struct OpenList<N> {
    heap: BinaryHeap<Entry>,
    slots: Vec<Option<(u64, N)>>,
    free: Vec<usize>,
    next_seq: u64,
    live: usize,
    max_live: usize,
}

impl<N: Prioritized> Default for OpenList<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<N: Prioritized> OpenList<N> {
    pub fn new() -> Self {
        OpenList { heap: BinaryHeap::new(), slots: Vec::new(), free: Vec::new(), next_seq: 0, live: 0, max_live: 0 }
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Peak number of live nodes since construction.
    pub fn max_len(&self) -> usize {
        self.max_live
    }

    pub fn push(&mut self, node: N) -> Handle {
        let seq = self.next_seq;
        self.next_seq += 1;
        let entry = Entry { key: node.selection_key(), depth: node.depth(), seq, slot: 0 };
        let slot = match self.free.pop() {
            Some(slot) => {
                self.slots[slot] = Some((seq, node));
                slot
            }
            None => {
                self.slots.push(Some((seq, node)));
                self.slots.len() - 1
            }
        };
        self.heap.push(Entry { slot, ..entry });
        self.live += 1;
        self.max_live = self.max_live.max(self.live);
        Handle { slot, seq }
    }

    fn is_live(&self, entry: &Entry) -> bool {
        matches!(&self.slots[entry.slot], Some((seq, _)) if *seq == entry.seq)
    }

    /// The best live node, discarding stale entries on the way.
    pub fn peek(&mut self) -> Option<Handle> {
        while let Some(top) = self.heap.peek() {
            if self.is_live(top) {
                return Some(Handle { slot: top.slot, seq: top.seq });
            }
            self.heap.pop();
        }
        None
    }

    pub fn contains(&self, handle: Handle) -> bool {
        self.get(handle).is_some()
    }

    pub fn get(&self, handle: Handle) -> Option<&N> {
        match self.slots.get(handle.slot) {
            Some(Some((seq, n))) if *seq == handle.seq => Some(n),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, handle: Handle) -> Option<&mut N> {
        match self.slots.get_mut(handle.slot) {
            Some(Some((seq, n))) if *seq == handle.seq => Some(n),
            _ => None,
        }
    }

    pub fn remove(&mut self, handle: Handle) -> Option<N> {
        self.get(handle)?;
        let (_, node) = self.slots[handle.slot].take()?;
        self.free.push(handle.slot);
        self.live -= 1;
        self.maybe_compact();
        Some(node)
    }

    /// Removes every node whose f-value is at most `threshold`; returns how
    /// many were removed.
    pub fn prune(&mut self, threshold: f64) -> usize {
        let doomed: Vec<usize> = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(slot, s)| match s {
                Some((_, n)) if n.f_value() <= threshold => Some(slot),
                _ => None,
            })
            .collect();
        for &slot in &doomed {
            self.slots[slot] = None;
            self.free.push(slot);
        }
        self.live -= doomed.len();
        self.maybe_compact();
        doomed.len()
    }

    /// Largest f-value among live nodes.
    pub fn max_f(&self) -> Option<f64> {
        self.slots.iter().flatten().map(|(_, n)| n.f_value()).max_by(f64::total_cmp)
    }

    fn maybe_compact(&mut self) {
        if self.heap.len() > 2 * self.live + 64 {
            let slots = &self.slots;
            self.heap.retain(|e| matches!(&slots[e.slot], Some((seq, _)) if *seq == e.seq));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq)]
    struct N {
        key: f64,
        f: f64,
        depth: usize,
        name: &'static str,
    }

    impl Prioritized for N {
        fn selection_key(&self) -> f64 {
            self.key
        }
        fn f_value(&self) -> f64 {
            self.f
        }
        fn depth(&self) -> usize {
            self.depth
        }
    }

    fn n(key: f64, depth: usize, name: &'static str) -> N {
        N { key, f: key, depth, name }
    }

    fn drain(open: &mut OpenList<N>) -> Vec<&'static str> {
        let mut out = vec![];
        while let Some(h) = open.peek() {
            out.push(open.remove(h).unwrap().name);
        }
        out
    }

    #[test]
    fn ordering_and_ties() {
        let mut open = OpenList::new();
        open.push(n(1.0, 1, "low"));
        open.push(n(5.0, 1, "shallow-first"));
        open.push(n(5.0, 2, "deep"));
        open.push(n(5.0, 1, "shallow-second"));
        open.push(n(7.0, 1, "best"));
        assert_eq!(drain(&mut open), vec!["best", "deep", "shallow-first", "shallow-second", "low"]);
        assert_eq!(open.max_len(), 5);
        assert!(open.is_empty());
    }

    #[test]
    fn prune_is_non_strict_and_slots_are_reused_safely() {
        let mut open = OpenList::new();
        let a = open.push(n(3.0, 1, "a"));
        open.push(n(2.0, 1, "b"));
        open.push(n(1.0, 1, "c"));
        assert_eq!(open.prune(2.0), 2);
        assert_eq!(open.len(), 1);
        assert_eq!(open.max_f(), Some(3.0));
        // The freed slots are reused; their stale entries must not resurface.
        let d = open.push(n(0.5, 1, "d"));
        open.push(n(0.25, 1, "e"));
        assert_eq!(open.peek(), Some(a));
        assert!(open.contains(d));
        let stale = Handle { slot: d.slot, seq: d.seq - 2 };
        assert!(!open.contains(stale));
        assert!(open.remove(stale).is_none());
        assert_eq!(drain(&mut open), vec!["a", "d", "e"]);
    }

    #[test]
    fn compaction_keeps_live_nodes() {
        let mut open = OpenList::new();
        for i in 0..500 {
            open.push(n(i as f64, 1, "x"));
        }
        open.prune(449.0);
        assert_eq!(open.len(), 50);
        assert!(open.heap.len() <= 2 * 50 + 64);
        assert_eq!(drain(&mut open).len(), 50);
    }
}
