//! Undirected loop-free graphs and positively weighted graphs.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// An undirected edge stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    /// Normalizes the endpoint order. Panics on a self-loop.
    pub fn new(i: usize, j: usize) -> Self {
        assert_ne!(i, j, "self-loop ({i}, {i})");
        Edge {
            lo: i.min(j),
            hi: i.max(j),
        }
    }

    pub fn try_new(i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
        }
        Ok(Edge::new(i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<Edge>,
}

impl Graph {
    /// Edgeless graph on `n` vertices.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Rejects self-loops, duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            if !g.add_edge(i, j)? {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.edges.insert(Edge::new(i, j));
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 1..n {
            g.edges.insert(Edge::new(i - 1, i));
        }
        g
    }

    /// Star with center 0 and `n - 1` leaves.
    pub fn star(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 1..n {
            g.edges.insert(Edge::new(0, i));
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Graph::path(n);
        if n > 2 {
            g.edges.insert(Edge::new(0, n - 1));
        }
        g
    }

    /// Circulant graph: vertex i is joined to i ± s for every offset s.
    pub fn circulant(n: usize, offsets: &[usize]) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for &s in offsets {
                let j = (i + s) % n;
                if j != i {
                    g.edges.insert(Edge::new(i, j));
                }
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&Edge::new(i, j))
    }

    /// Returns `false` when the edge was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        Ok(self.edges.insert(Edge::try_new(i, j)?))
    }

    /// Returns `false` when the edge was absent.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        i != j && self.edges.remove(&Edge::new(i, j))
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::InvalidGraph(format!(
                "vertex {v} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.lo].push(e.hi);
            adj[e.hi].push(e.lo);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.lo == v || e.hi == v).count()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Hop distances from `src`; `None` marks unreachable vertices.
    pub fn bfs_distances(&self, src: usize) -> Vec<Option<usize>> {
        bfs(&self.adjacency(), src)
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.lo, e.hi);
        }
        uf.count()
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.component_count() == 1
    }

    /// Largest hop distance between two vertices, `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let adj = self.adjacency();
        let mut diam = 0;
        for s in 0..self.n {
            for d in bfs(&adj, s) {
                diam = diam.max(d?);
            }
        }
        Some(diam)
    }

    /// Edges whose removal disconnects the graph.
    pub fn bridges(&self) -> BTreeSet<Edge> {
        let base = self.component_count();
        let mut out = BTreeSet::new();
        for &e in &self.edges {
            let mut g = self.clone();
            g.edges.remove(&e);
            if g.component_count() > base {
                out.insert(e);
            }
        }
        out
    }

    /// Union of the edge sets of two graphs on the same vertex set.
    pub fn union(&self, other: &Graph) -> Result<Graph> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(Graph {
            n: self.n,
            edges: self.edges.union(&other.edges).copied().collect(),
        })
    }
}

pub(crate) fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &w in &adj[u] {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
            self.components -= 1;
        }
    }

    fn count(&self) -> usize {
        self.components
    }
}

/// Size of the symmetric difference of two edge sets.
pub fn edge_difference(a: &Graph, b: &Graph) -> Result<usize> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    Ok(a.edges.symmetric_difference(&b.edges).count())
}

/// Graph with a strictly positive weight on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    graph: Graph,
    weights: BTreeMap<Edge, f64>,
}

impl WeightedGraph {
    /// All weights equal to one.
    pub fn unit(graph: Graph) -> Self {
        let weights = graph.edges().map(|e| (e, 1.0)).collect();
        WeightedGraph { graph, weights }
    }

    /// Weights must be keyed exactly by the edge set and be finite and positive.
    pub fn new(graph: Graph, weights: BTreeMap<Edge, f64>) -> Result<Self> {
        if weights.len() != graph.edge_count() {
            return Err(Error::InvalidGraph(format!(
                "{} weights for {} edges",
                weights.len(),
                graph.edge_count()
            )));
        }
        for (e, &w) in &weights {
            if !graph.edges.contains(e) {
                return Err(Error::InvalidGraph(format!(
                    "weight on non-edge ({}, {})",
                    e.lo, e.hi
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "non-positive weight {w} on ({}, {})",
                    e.lo, e.hi
                )));
            }
        }
        Ok(WeightedGraph { graph, weights })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn weight(&self, e: Edge) -> Option<f64> {
        self.weights.get(&e).copied()
    }

    pub fn weights(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.weights.iter().map(|(&e, &w)| (e, w))
    }

    pub fn set_weight(&mut self, e: Edge, w: f64) -> Result<()> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidGraph(format!("non-positive weight {w}")));
        }
        match self.weights.get_mut(&e) {
            Some(slot) => {
                *slot = w;
                Ok(())
            }
            None => Err(Error::InvalidGraph(format!(
                "({}, {}) is not an edge",
                e.lo, e.hi
            ))),
        }
    }

    /// Sum of incident edge weights per vertex.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n()];
        for (e, w) in self.weights() {
            deg[e.lo] += w;
            deg[e.hi] += w;
        }
        deg
    }

    pub fn max_weighted_degree(&self) -> f64 {
        self.weighted_degrees().into_iter().fold(0.0, f64::max)
    }
}

/// Random connected graph: a uniformly random labelled-attachment spanning
/// tree plus every remaining pair independently with probability `extra`.
pub fn random_connected<R: Rng + ?Sized>(n: usize, extra: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        g.edges.insert(Edge::new(order[k], parent));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < extra {
                g.edges.insert(Edge::new(i, j));
            }
        }
    }
    g
}

/// Random graph where each pair is present with probability `p` (may be
/// disconnected).
pub fn random_gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                g.edges.insert(Edge::new(i, j));
            }
        }
    }
    g
}

/// Same topology with independent weights drawn uniformly from `[lo, hi)`.
pub fn random_weights<R: Rng + ?Sized>(g: Graph, lo: f64, hi: f64, rng: &mut R) -> WeightedGraph {
    let weights = g.edges().map(|e| (e, rng.gen_range(lo..hi))).collect();
    WeightedGraph { graph: g, weights }
}
