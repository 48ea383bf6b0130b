//! Sequences of gossip matrices consumed by the consensus routines.

use alloc::vec;
use alloc::vec::Vec;

use crate::gossip::GossipMatrix;

/// A stream of gossip matrices, one per communication round.
///
/// Sources draw from a finite table of matrices; [`GossipSource::advance`]
/// returns the index of the matrix used by the next round so callers can
/// cache products per table entry.
pub trait GossipSource {
    fn members(&self) -> &[GossipMatrix];

    /// Moves to the next round and returns the index of its matrix.
    fn advance(&mut self) -> usize;

    /// Moves `rounds` rounds ahead without reporting them.
    fn skip(&mut self, rounds: u64) {
        for _ in 0..rounds {
            self.advance();
        }
    }

    fn n(&self) -> usize {
        self.members().first().map_or(0, GossipMatrix::n)
    }
}

/// The same matrix every round.
#[derive(Debug, Clone)]
pub struct StaticSource {
    members: Vec<GossipMatrix>,
}

impl StaticSource {
    pub fn new(w: GossipMatrix) -> Self {
        StaticSource { members: vec![w] }
    }
}

impl GossipSource for StaticSource {
    fn members(&self) -> &[GossipMatrix] {
        &self.members
    }

    fn advance(&mut self) -> usize {
        0
    }

    fn skip(&mut self, _rounds: u64) {}
}

/// Cycles deterministically through a fixed list of matrices.
#[derive(Debug, Clone)]
pub struct CyclicSource {
    members: Vec<GossipMatrix>,
    next: usize,
}

impl CyclicSource {
    /// The first round uses `members[0]`.
    pub fn new(members: Vec<GossipMatrix>) -> Self {
        assert!(!members.is_empty(), "cyclic source needs a matrix");
        CyclicSource { members, next: 0 }
    }

    /// Index of the matrix the next round will use.
    pub fn position(&self) -> usize {
        self.next
    }
}

impl GossipSource for CyclicSource {
    fn members(&self) -> &[GossipMatrix] {
        &self.members
    }

    fn advance(&mut self) -> usize {
        let i = self.next;
        self.next = (self.next + 1) % self.members.len();
        i
    }

    fn skip(&mut self, rounds: u64) {
        let len = self.members.len() as u64;
        self.next = ((self.next as u64 + rounds % len) % len) as usize;
    }
}
