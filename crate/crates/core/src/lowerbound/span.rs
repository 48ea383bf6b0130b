//! Which coordinates each node can hold as nonzero. Local steps add the
//! support of the node's gradient; communication rounds merge neighbours.
//! Coordinates are 1-based.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::functions::FunctionRole;
use super::two_star::phase_start;
use crate::graph::Graph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Local,
    Comm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanState {
    pub sets: Vec<BTreeSet<usize>>,
    pub m_max: usize,
}

impl SpanState {
    pub fn empty(nodes: usize, m_max: usize) -> Self {
        SpanState {
            sets: vec![BTreeSet::new(); nodes],
            m_max,
        }
    }

    pub fn holds(&self, m: usize) -> bool {
        self.sets.iter().any(|s| s.contains(&m))
    }

    /// Largest coordinate held anywhere.
    pub fn frontier(&self) -> usize {
        self.sets
            .iter()
            .filter_map(|s| s.last().copied())
            .max()
            .unwrap_or(0)
    }
}

fn local_closure(set: &BTreeSet<usize>, role: FunctionRole, m_max: usize) -> BTreeSet<usize> {
    let mut out = set.clone();
    match role {
        FunctionRole::Other => {}
        FunctionRole::V1 => {
            for &j in set {
                let partner = if j % 2 == 1 { j + 1 } else { j - 1 };
                if partner <= m_max {
                    out.insert(partner);
                }
            }
        }
        FunctionRole::V2 => {
            out.insert(1);
            for &j in set {
                let partner = if j % 2 == 0 { j + 1 } else { j - 1 };
                if partner >= 2 && partner < m_max {
                    out.insert(partner);
                }
            }
        }
    }
    out
}

/// Applies one step. A local step gives every node the support of its own
/// gradient at any point it holds; a communication step replaces each set
/// by the union over the closed neighbourhood in `graph`.
pub fn span_step(state: &SpanState, kind: StepKind, graph: &Graph, roles: &[FunctionRole]) -> SpanState {
    let sets = match kind {
        StepKind::Local => state
            .sets
            .iter()
            .zip(roles)
            .map(|(s, &r)| local_closure(s, r, state.m_max))
            .collect(),
        StepKind::Comm => {
            let adj = graph.adjacency();
            (0..state.sets.len())
                .map(|i| {
                    let mut s = state.sets[i].clone();
                    for &j in &adj[i] {
                        s.extend(state.sets[j].iter().copied());
                    }
                    s
                })
                .collect()
        }
    };
    SpanState {
        sets,
        m_max: state.m_max,
    }
}

/// Outcome of the information-flow simulation for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstNonzero {
    pub m: usize,
    /// Communication rounds needed when local steps are free.
    pub comm_rounds: usize,
    /// `comm_rounds + m`: at least `m` local steps are needed as well.
    pub l_m: usize,
    /// `(m − 1) t + m`.
    pub bound: usize,
}

impl FirstNonzero {
    pub fn slack(&self) -> usize {
        self.l_m - self.bound
    }
}

/// Runs the two-star sequence for parameter `n` from its first graph, with
/// a free local step before every communication round, until some node
/// holds coordinate `m`.
pub fn first_nonzero_time(n: usize, m: usize, m_max: usize, horizon: usize) -> Result<FirstNonzero> {
    if m == 0 || m > m_max {
        return Err(Error::param("m", "must lie in 1..=m_max"));
    }
    let mut seq = phase_start(n)?;
    let roles: Vec<FunctionRole> = seq.current().marks().iter().map(|&mk| mk.into()).collect();
    let t = seq.t();
    let mut state = SpanState::empty(roles.len(), m_max);
    for rounds in 0..=horizon {
        state = span_step(&state, StepKind::Local, seq.current().graph(), &roles);
        if state.holds(m) {
            return Ok(FirstNonzero {
                m,
                comm_rounds: rounds,
                l_m: rounds + m,
                bound: (m - 1) * t + m,
            });
        }
        state = span_step(&state, StepKind::Comm, seq.current().graph(), &roles);
        seq.phase_step();
    }
    Err(Error::HorizonExhausted { horizon })
}
