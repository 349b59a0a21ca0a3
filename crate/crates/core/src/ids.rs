//! Interned identifiers and bitsets over the control-state universe.
//!
//! State and message names are interned to dense indices when a process is
//! built; every set of control states in the solvers is a [`StateSet`]
//! backed by machine words. Numeric ordering of sets (as little-endian
//! integers over the blocks) is the deterministic tie-breaker used by the
//! search modules.

use std::fmt;

/// Index of a control state in a process's interned state table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(u32);

impl StateId {
    pub fn new(index: usize) -> Self {
        StateId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a message in a process's interned alphabet table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(u32);

impl MsgId {
    pub fn new(index: usize) -> Self {
        MsgId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const BLOCK_BITS: usize = 64;

/// A set of control states over a fixed universe of size `universe`.
///
/// All sets produced for one process share the same universe, so equality
/// and hashing are block-wise. Ordering compares the sets as unsigned
/// integers (most significant block first).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    universe: u32,
    blocks: Vec<u64>,
}

impl StateSet {
    pub fn empty(universe: usize) -> Self {
        let nblocks = universe.div_ceil(BLOCK_BITS).max(1);
        StateSet {
            universe: universe as u32,
            blocks: vec![0; nblocks],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for i in 0..universe {
            s.insert(StateId::new(i));
        }
        s
    }

    pub fn from_iter<I: IntoIterator<Item = StateId>>(universe: usize, iter: I) -> Self {
        let mut s = Self::empty(universe);
        for q in iter {
            s.insert(q);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe as usize
    }

    pub fn insert(&mut self, q: StateId) {
        debug_assert!(q.index() < self.universe());
        self.blocks[q.index() / BLOCK_BITS] |= 1 << (q.index() % BLOCK_BITS);
    }

    pub fn remove(&mut self, q: StateId) {
        self.blocks[q.index() / BLOCK_BITS] &= !(1 << (q.index() % BLOCK_BITS));
    }

    pub fn contains(&self, q: StateId) -> bool {
        q.index() < self.universe()
            && self.blocks[q.index() / BLOCK_BITS] & (1 << (q.index() % BLOCK_BITS)) != 0
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn with(&self, q: StateId) -> StateSet {
        let mut s = self.clone();
        s.insert(q);
        s
    }

    pub fn without(&self, q: StateId) -> StateSet {
        let mut s = self.clone();
        s.remove(q);
        s
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        for (a, b) in s.blocks.iter_mut().zip(&other.blocks) {
            *a |= b;
        }
        s
    }

    /// States in `self` but not in `other`.
    pub fn difference(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        for (a, b) in s.blocks.iter_mut().zip(&other.blocks) {
            *a &= !b;
        }
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, &block)| {
            let mut bits = block;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(StateId::new(bi * BLOCK_BITS + tz))
            })
        })
    }

    /// All non-empty subsets of this set, ascending in numeric order.
    pub fn nonempty_subsets(&self) -> Vec<StateSet> {
        let members: Vec<StateId> = self.iter().collect();
        let mut out = Vec::new();
        for mask in 1u64..(1u64 << members.len()) {
            let mut s = StateSet::empty(self.universe());
            for (i, &q) in members.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s.insert(q);
                }
            }
            out.push(s);
        }
        out.sort();
        out
    }
}

impl PartialOrd for StateSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StateSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        debug_assert_eq!(self.universe, other.universe);
        self.blocks.iter().rev().cmp(other.blocks.iter().rev())
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|q| q.index())).finish()
    }
}
