//! Two stars whose centers share one connector vertex, and the periodic
//! sequence that moves leaves between the stars two edges at a time.
//!
//! Vertex labels: 0 is the left center, 1 the right center, 2 the first
//! connector. Marked leaves follow (first set, then second set), then the
//! unmarked leaves. A star of size `a` has `a` leaves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::gossip::{build_laplacian, retune_chi, shortest_path_weighting, spectral_summary, GossipMatrix};
use crate::graph::{Edge, Graph, WeightedGraph};
use crate::source::CyclicSource;
use crate::{Error, Result};

const LEFT: usize = 0;
const RIGHT: usize = 1;
const FIRST_CONNECTOR: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    LeftCenter,
    RightCenter,
    Connector,
    LeftLeaf,
    RightLeaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    V1,
    V2,
    Unmarked,
}

/// Plain `T_{a,b}`: left leaves `3..3+a`, right leaves after them.
pub fn two_star_graph(a: usize, b: usize) -> Graph {
    let n = a + b + 3;
    let mut g = Graph::empty(n);
    g.add_edge(LEFT, FIRST_CONNECTOR).expect("in range");
    g.add_edge(RIGHT, FIRST_CONNECTOR).expect("in range");
    for v in 3..3 + a {
        g.add_edge(LEFT, v).expect("in range");
    }
    for v in 3 + a..n {
        g.add_edge(RIGHT, v).expect("in range");
    }
    g
}

/// `T_{a,b}` with roles and marks for parameter `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStarGraph {
    n_param: usize,
    a: usize,
    b: usize,
    roles: Vec<Role>,
    marks: Vec<Mark>,
    graph: Graph,
}

impl TwoStarGraph {
    pub fn n_param(&self) -> usize {
        self.n_param
    }

    /// Leaves of the left star.
    pub fn a(&self) -> usize {
        self.a
    }

    /// Leaves of the right star.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn connector(&self) -> usize {
        self.roles
            .iter()
            .position(|&r| r == Role::Connector)
            .expect("one connector")
    }

    pub fn marked_size(&self) -> usize {
        self.n_param / 2
    }

    pub fn vertex_count(&self) -> usize {
        self.roles.len()
    }
}

/// `T_{a,b}` for parameter `n` with `a + b = 2n`. The first marked set sits
/// on the left and the second on the right; the lowest unmarked leaves fill
/// the left star first.
pub fn build_two_star(n: usize, a: usize, b: usize) -> Result<TwoStarGraph> {
    if n < 2 {
        return Err(Error::param("n", "must be at least 2"));
    }
    let h = n / 2;
    if a + b != 2 * n {
        return Err(Error::param("a", format!("a + b = {} but 2n = {}", a + b, 2 * n)));
    }
    if a < h || b < h {
        return Err(Error::param("a", format!("each star needs at least {h} leaves for the marks")));
    }
    let total = 2 * n + 3;
    let mut roles = vec![Role::LeftLeaf; total];
    let mut marks = vec![Mark::Unmarked; total];
    roles[LEFT] = Role::LeftCenter;
    roles[RIGHT] = Role::RightCenter;
    roles[FIRST_CONNECTOR] = Role::Connector;
    for v in 3..3 + h {
        marks[v] = Mark::V1;
    }
    for v in 3 + h..3 + 2 * h {
        marks[v] = Mark::V2;
        roles[v] = Role::RightLeaf;
    }
    for (i, v) in (3 + 2 * h..total).enumerate() {
        if i >= a - h {
            roles[v] = Role::RightLeaf;
        }
    }
    let mut graph = Graph::empty(total);
    graph.add_edge(LEFT, FIRST_CONNECTOR)?;
    graph.add_edge(RIGHT, FIRST_CONNECTOR)?;
    for v in 3..total {
        let center = if roles[v] == Role::LeftLeaf { LEFT } else { RIGHT };
        graph.add_edge(center, v)?;
    }
    Ok(TwoStarGraph {
        n_param: n,
        a,
        b,
        roles,
        marks,
        graph,
    })
}

/// One change of the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    /// Index of the graph produced by this change.
    pub step: usize,
    /// Phase the change belongs to.
    pub phase: u8,
    pub removed: Edge,
    pub added: Edge,
    pub a: usize,
    pub b: usize,
}

/// The infinite periodic sequence, generated one graph at a time.
#[derive(Debug, Clone)]
pub struct CounterexampleSequence {
    current: TwoStarGraph,
    phase: u8,
    step_in_phase: usize,
    index: usize,
    t: usize,
    left_stack: Vec<usize>,
    right_stack: Vec<usize>,
}

/// First graph `T_{2n-h, h}` with `h = floor(n/2)`.
pub fn phase_start(n: usize) -> Result<CounterexampleSequence> {
    let h = n / 2;
    let current = build_two_star(n, 2 * n - h, h)?;
    let left_stack: Vec<usize> = (3 + 2 * h..2 * n + 3).rev().collect();
    Ok(CounterexampleSequence {
        current,
        phase: 1,
        step_in_phase: 0,
        index: 0,
        t: 2 * n - 2 * h,
        left_stack,
        right_stack: Vec::new(),
    })
}

impl CounterexampleSequence {
    pub fn new(n: usize) -> Result<Self> {
        phase_start(n)
    }

    pub fn current(&self) -> &TwoStarGraph {
        &self.current
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn step_in_phase(&self) -> usize {
        self.step_in_phase
    }

    /// Index of the current graph in the sequence.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Changes per phase.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn period(&self) -> usize {
        2 * self.t
    }

    /// Moves the connector into the receiving star and promotes the most
    /// recently arrived unmarked leaf of the sending star to connector.
    /// The second phase therefore retraces the first in reverse.
    pub fn phase_step(&mut self) -> StepRecord {
        let v = self.current.connector();
        let (from, to, stack) = if self.phase == 1 {
            (LEFT, RIGHT, &mut self.left_stack)
        } else {
            (RIGHT, LEFT, &mut self.right_stack)
        };
        let u = stack.pop().expect("phase bounds leave an unmarked leaf");
        let g = &mut self.current.graph;
        assert!(g.remove_edge(v, from), "connector is joined to both centers");
        g.add_edge(u, to).expect("valid vertex");
        if self.phase == 1 {
            self.current.roles[v] = Role::RightLeaf;
            self.right_stack.push(v);
            self.current.a -= 1;
            self.current.b += 1;
        } else {
            self.current.roles[v] = Role::LeftLeaf;
            self.left_stack.push(v);
            self.current.a += 1;
            self.current.b -= 1;
        }
        self.current.roles[u] = Role::Connector;
        let record = StepRecord {
            step: self.index + 1,
            phase: self.phase,
            removed: Edge::new(v, from),
            added: Edge::new(u, to),
            a: self.current.a,
            b: self.current.b,
        };
        self.index += 1;
        self.step_in_phase += 1;
        if self.step_in_phase == self.t {
            self.step_in_phase = 0;
            self.phase = 3 - self.phase;
        }
        record
    }

    /// The graphs of one period starting at the current one, with the change
    /// leading to each subsequent graph.
    pub fn one_period(&mut self) -> (Vec<TwoStarGraph>, Vec<StepRecord>) {
        let mut graphs = Vec::with_capacity(self.period());
        let mut records = Vec::with_capacity(self.period());
        for _ in 0..self.period() {
            graphs.push(self.current.clone());
            records.push(self.phase_step());
        }
        (graphs, records)
    }
}

/// One period of the sequence with weights giving every graph the same
/// condition number.
#[derive(Debug, Clone)]
pub struct RetunedPeriod {
    pub n_param: usize,
    pub t: usize,
    pub graphs: Vec<TwoStarGraph>,
    pub records: Vec<StepRecord>,
    pub weighted: Vec<WeightedGraph>,
    pub laplacians: Vec<GossipMatrix>,
    pub chi_target: f64,
    /// Condition number of each graph after shortest-path weighting.
    pub chi_before: Vec<f64>,
    /// Condition number after retuning.
    pub chi_after: Vec<f64>,
}

impl RetunedPeriod {
    /// Plays the period on repeat.
    pub fn source(&self) -> CyclicSource {
        CyclicSource::new(self.laplacians.clone())
    }

    pub fn max_relative_chi_error(&self) -> f64 {
        self.chi_after
            .iter()
            .map(|c| (c - self.chi_target).abs() / self.chi_target)
            .fold(0.0, f64::max)
    }
}

/// Weights every graph of one period by shortest paths, then retunes each
/// to the largest condition number found, or to `chi_floor` if larger.
pub fn retuned_period(n: usize, chi_floor: f64) -> Result<RetunedPeriod> {
    let mut seq = phase_start(n)?;
    let t = seq.t();
    let (graphs, records) = seq.one_period();
    let base: Vec<WeightedGraph> = graphs
        .iter()
        .map(|g| shortest_path_weighting(g.graph()))
        .collect::<Result<_>>()?;
    let chi_before: Vec<f64> = base
        .iter()
        .map(|w| spectral_summary(&build_laplacian(w)).map(|s| s.chi))
        .collect::<Result<_>>()?;
    let chi_target = chi_before.iter().copied().fold(chi_floor, f64::max);
    let weighted: Vec<WeightedGraph> = base
        .iter()
        .map(|w| retune_chi(w, chi_target))
        .collect::<Result<_>>()?;
    let laplacians: Vec<GossipMatrix> = weighted.iter().map(build_laplacian).collect();
    let chi_after: Vec<f64> = laplacians
        .iter()
        .map(|l| spectral_summary(l).map(|s| s.chi))
        .collect::<Result<_>>()?;
    Ok(RetunedPeriod {
        n_param: n,
        t,
        graphs,
        records,
        weighted,
        laplacians,
        chi_target,
        chi_before,
        chi_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_difference;

    #[test]
    fn t45_counts() {
        let g = two_star_graph(4, 5);
        assert_eq!(g.n(), 12);
        assert_eq!(g.edge_count(), 11);
        assert!(g.is_connected());
    }

    #[test]
    fn marks_of_tnn() {
        let g = build_two_star(4, 4, 4).unwrap();
        let v1 = g.marks().iter().filter(|&&m| m == Mark::V1).count();
        let v2 = g.marks().iter().filter(|&&m| m == Mark::V2).count();
        assert_eq!((v1, v2), (2, 2));
        assert_eq!(g.vertex_count(), 11);
        assert_eq!(g.graph().edge_count(), 10);
    }

    #[test]
    fn rejects_infeasible() {
        assert!(build_two_star(1, 1, 1).is_err());
        assert!(build_two_star(4, 7, 1).is_err());
        assert!(build_two_star(4, 4, 5).is_err());
    }

    #[test]
    fn all_valid_splits_are_shallow() {
        for n in 2..9 {
            let h = n / 2;
            for a in h..=2 * n - h {
                let g = build_two_star(n, a, 2 * n - a).unwrap();
                assert!(g.graph().diameter().unwrap() <= 4);
            }
        }
    }

    #[test]
    fn first_step_for_n4() {
        let mut seq = phase_start(4).unwrap();
        assert_eq!((seq.current().a(), seq.current().b()), (6, 2));
        let before = seq.current().graph().clone();
        let rec = seq.phase_step();
        assert_eq!((rec.a, rec.b), (5, 3));
        assert_eq!(edge_difference(&before, seq.current().graph()).unwrap(), 2);
        assert_eq!(seq.t(), 4);
    }

    #[test]
    fn period_is_twice_phase_length() {
        for n in [2, 3, 4, 5, 8] {
            let mut seq = phase_start(n).unwrap();
            let start = seq.current().clone();
            let t = seq.t();
            for i in 1..=2 * t {
                seq.phase_step();
                if i == t {
                    let h = n / 2;
                    assert_eq!((seq.current().a(), seq.current().b()), (h, 2 * n - h));
                }
                if i < 2 * t {
                    assert_ne!(seq.current().graph(), start.graph());
                }
            }
            assert_eq!(seq.current(), &start);
        }
    }

    #[test]
    fn marks_never_change_sides() {
        let mut seq = phase_start(6).unwrap();
        for _ in 0..30 {
            seq.phase_step();
            let g = seq.current();
            for (v, m) in g.marks().iter().enumerate() {
                match m {
                    Mark::V1 => assert_eq!(g.roles()[v], Role::LeftLeaf),
                    Mark::V2 => assert_eq!(g.roles()[v], Role::RightLeaf),
                    Mark::Unmarked => {}
                }
            }
        }
    }

    #[test]
    fn retuned_period_has_constant_chi() {
        let p = retuned_period(4, 56.0).unwrap();
        assert_eq!(p.laplacians.len(), 8);
        assert!(p.max_relative_chi_error() <= 1e-6);
    }
}
