//! Markov chains over a finite family of graphs.
//!
//! Every member graph is represented by its weighted Laplacian. A chain owns
//! its random stream and starts from a draw of the stationary distribution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use crate::gossip::{build_laplacian, validate_gossip, GossipMatrix};
use crate::graph::{Edge, Graph, WeightedGraph};
use crate::linalg::{self, Matrix};
use crate::seed::SimRng;
use crate::source::GossipSource;
use crate::{Error, Result};

/// Largest family for which kernel powers are formed densely.
pub const MAX_DENSE_FAMILY: usize = 1000;
const PI_SUM_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
/// Longer skips jump through kernel powers instead of stepping.
const DIRECT_SKIP_LIMIT: u64 = 4096;

/// Connected graphs on a shared vertex set with a distribution over them.
#[derive(Debug, Clone)]
pub struct GraphFamily {
    members: Vec<WeightedGraph>,
    pi: Vec<f64>,
    laplacians: Vec<GossipMatrix>,
}

impl GraphFamily {
    pub fn new(members: Vec<WeightedGraph>, pi: Vec<f64>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::param("members", "family is empty"))?;
        let n = first.n();
        if pi.len() != members.len() {
            return Err(Error::DimensionMismatch {
                expected: members.len(),
                found: pi.len(),
            });
        }
        for (i, g) in members.iter().enumerate() {
            if g.n() != n {
                return Err(Error::param(
                    "members",
                    format!("member {i} has {} vertices, expected {n}", g.n()),
                ));
            }
            if !g.graph().is_connected() {
                return Err(Error::param("members", format!("member {i} is disconnected")));
            }
        }
        if pi.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::param("pi", "entries must be non-negative"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > PI_SUM_TOL {
            return Err(Error::param("pi", format!("sums to {total}, expected 1")));
        }
        let laplacians = members.iter().map(build_laplacian).collect();
        Ok(GraphFamily {
            members,
            pi,
            laplacians,
        })
    }

    /// Uniform distribution over the members.
    pub fn uniform(members: Vec<WeightedGraph>) -> Result<Self> {
        let k = members.len().max(1);
        let pi = vec![1.0 / k as f64; members.len()];
        GraphFamily::new(members, pi)
    }

    pub fn members(&self) -> &[WeightedGraph] {
        &self.members
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn laplacians(&self) -> &[GossipMatrix] {
        &self.laplacians
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n(&self) -> usize {
        self.members[0].n()
    }

    /// Union of the members that carry positive probability.
    pub fn union_graph(&self) -> Graph {
        let mut g = Graph::empty(self.n());
        for (m, &p) in self.members.iter().zip(&self.pi) {
            if p > 0.0 {
                g = g.union(m.graph()).expect("shared vertex set");
            }
        }
        g
    }
}

/// Stationary mean of the member Laplacians, checked to be a gossip matrix
/// of the union graph.
pub fn mean_gossip(family: &GraphFamily) -> Result<GossipMatrix> {
    let n = family.n();
    let mut w = Matrix::zeros(n, n);
    for (l, &p) in family.laplacians.iter().zip(&family.pi) {
        w.add_scaled(p, l.matrix())?;
    }
    let check = validate_gossip(&w, &family.union_graph())?;
    if let Some(v) = check.violation {
        return Err(Error::param("family", format!("mean matrix is not gossip: {v:?}")));
    }
    GossipMatrix::new(w)
}

/// Largest operator-norm deviation of a member Laplacian from the mean.
pub fn rho_bound(family: &GraphFamily) -> Result<f64> {
    let mean = mean_gossip(family)?;
    let mut rho: f64 = 0.0;
    for l in &family.laplacians {
        let mut d = l.matrix().clone();
        d.add_scaled(-1.0, mean.matrix())?;
        rho = rho.max(linalg::symmetric_norm(&d)?);
    }
    Ok(rho)
}

/// Stay with probability `p`, otherwise redraw from `pi`.
pub fn lazy_resample_kernel(pi: &[f64], p: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", "laziness must lie in [0, 1]"));
    }
    let k = pi.len();
    Ok(Matrix::from_fn(k, k, |i, j| {
        (1.0 - p) * pi[j] + if i == j { p } else { 0.0 }
    }))
}

/// Lazy nearest-neighbour walk on a ring of `k` states.
pub fn lazy_ring_kernel(k: usize, p: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", "laziness must lie in [0, 1]"));
    }
    if k == 0 {
        return Err(Error::param("k", "ring needs at least one state"));
    }
    let mut q = Matrix::zeros(k, k);
    for i in 0..k {
        if k == 1 {
            q[(0, 0)] = 1.0;
            continue;
        }
        q[(i, i)] += p;
        q[(i, (i + 1) % k)] += 0.5 * (1.0 - p);
        q[(i, (i + k - 1) % k)] += 0.5 * (1.0 - p);
    }
    Ok(q)
}

/// Row-stochastic with `pi` stationary.
pub fn validate_kernel(kernel: &Matrix, pi: &[f64]) -> Result<()> {
    let k = pi.len();
    if kernel.rows() != k || kernel.cols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: kernel.rows(),
        });
    }
    for i in 0..k {
        let row = kernel.row(i);
        if row.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidKernel(format!("row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidKernel(format!("row {i} sums to {s}")));
        }
    }
    for j in 0..k {
        let flow: f64 = (0..k).map(|i| pi[i] * kernel[(i, j)]).sum();
        if (flow - pi[j]).abs() > STATIONARY_TOL {
            return Err(Error::InvalidKernel(format!(
                "pi is not stationary at state {j}: {flow} vs {}",
                pi[j]
            )));
        }
    }
    Ok(())
}

/// Irreducible and aperiodic: some power below the Wielandt bound is positive.
pub fn is_primitive(kernel: &Matrix) -> bool {
    let k = kernel.rows();
    if k == 0 {
        return false;
    }
    let base: Vec<bool> = kernel.as_slice().iter().map(|&q| q > 0.0).collect();
    let mut power = base.clone();
    let limit = (k - 1) * (k - 1) + 1;
    for _ in 0..limit {
        if power.iter().all(|&b| b) {
            return true;
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for l in 0..k {
                if !power[i * k + l] {
                    continue;
                }
                for j in 0..k {
                    next[i * k + j] |= base[l * k + j];
                }
            }
        }
        power = next;
    }
    power.iter().all(|&b| b)
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn matrix_power(q: &Matrix, mut m: u64) -> Matrix {
    let mut result = Matrix::identity(q.rows());
    let mut base = q.clone();
    while m > 0 {
        if m & 1 == 1 {
            result = result.mul(&base).expect("square");
        }
        m >>= 1;
        if m > 0 {
            base = base.mul(&base).expect("square");
        }
    }
    result
}

/// A stationary Markov chain over a [`GraphFamily`].
#[derive(Debug, Clone)]
pub struct MarkovGraphChain {
    family: GraphFamily,
    kernel: Matrix,
    state: usize,
    tau: u64,
    seed: u64,
    rng: SimRng,
}

impl MarkovGraphChain {
    /// Starts from a draw of the stationary distribution.
    pub fn new(family: GraphFamily, kernel: Matrix, tau: u64, seed: u64) -> Result<Self> {
        let mut rng = SimRng::seed_from_u64(seed);
        let state = sample_index(family.pi(), &mut rng);
        Self::build(family, kernel, tau, seed, state, rng)
    }

    /// Starts from a fixed member.
    pub fn with_state(
        family: GraphFamily,
        kernel: Matrix,
        tau: u64,
        seed: u64,
        state: usize,
    ) -> Result<Self> {
        if state >= family.len() {
            return Err(Error::param("state", "outside the family"));
        }
        let rng = SimRng::seed_from_u64(seed);
        Self::build(family, kernel, tau, seed, state, rng)
    }

    fn build(
        family: GraphFamily,
        kernel: Matrix,
        tau: u64,
        seed: u64,
        state: usize,
        rng: SimRng,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(Error::param("tau", "mixing time must be positive"));
        }
        validate_kernel(&kernel, family.pi())?;
        Ok(MarkovGraphChain {
            family,
            kernel,
            state,
            tau,
            seed,
            rng,
        })
    }

    pub fn family(&self) -> &GraphFamily {
        &self.family
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One kernel transition; returns the Laplacian of the new member.
    pub fn step(&mut self) -> &GossipMatrix {
        self.state = sample_index(self.kernel.row(self.state), &mut self.rng);
        &self.family.laplacians[self.state]
    }

    /// Advances `steps` transitions. Long skips sample the endpoint from the
    /// matching kernel power, which has the same law as stepping.
    pub fn skip_steps(&mut self, steps: u64) {
        if steps <= DIRECT_SKIP_LIMIT {
            for _ in 0..steps {
                self.step();
            }
            return;
        }
        let power = matrix_power(&self.kernel, steps);
        self.state = sample_index(power.row(self.state), &mut self.rng);
    }

    /// Whether the kernel is irreducible and aperiodic.
    pub fn is_primitive(&self) -> bool {
        is_primitive(&self.kernel)
    }
}

impl GossipSource for MarkovGraphChain {
    fn members(&self) -> &[GossipMatrix] {
        &self.family.laplacians
    }

    fn advance(&mut self) -> usize {
        self.step();
        self.state
    }

    fn skip(&mut self, rounds: u64) {
        self.skip_steps(rounds);
    }
}

/// Exact total-variation contraction of `m` kernel steps.
pub fn tv_contraction(kernel: &Matrix, m: u64) -> Result<f64> {
    let k = kernel.rows();
    if k > MAX_DENSE_FAMILY {
        return Err(Error::FamilyTooLarge {
            members: k,
            limit: MAX_DENSE_FAMILY,
        });
    }
    let p = matrix_power(kernel, m);
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            let tv: f64 = p
                .row(a)
                .iter()
                .zip(p.row(b))
                .map(|(x, y)| (x - y).abs())
                .sum();
            worst = worst.max(0.5 * tv);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingReport {
    pub steps: u64,
    pub delta: f64,
    /// `(1/4)^floor(m / tau)`.
    pub bound: f64,
    pub consistent: bool,
}

/// Compares the exact contraction after `m` steps with the geometric
/// envelope implied by the configured mixing time.
pub fn mixing_diagnostic(chain: &MarkovGraphChain, m: u64) -> Result<MixingReport> {
    let delta = tv_contraction(&chain.kernel, m)?;
    let bound = libm::pow(0.25, (m / chain.tau) as f64);
    Ok(MixingReport {
        steps: m,
        delta,
        bound,
        consistent: delta <= bound + 1e-12,
    })
}

/// Unit-weight members obtained by toggling random subsets of one pool of
/// `delta` vertex pairs in `base`. The first member is `base` itself; any two
/// members differ in at most `delta` edges. Disconnected draws are rejected.
pub fn edge_toggle<R: Rng + ?Sized>(
    base: &Graph,
    delta: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Graph>> {
    if !base.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = base.n();
    let pairs = n * (n.saturating_sub(1)) / 2;
    if delta == 0 || delta > pairs {
        return Err(Error::param("delta", format!("must lie in 1..={pairs}")));
    }
    if count == 0 {
        return Err(Error::param("count", "need at least one member"));
    }
    let mut pool: Vec<Edge> = Vec::with_capacity(delta);
    while pool.len() < delta {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j && !pool.contains(&Edge::new(i, j)) {
            pool.push(Edge::new(i, j));
        }
    }
    let mut members = vec![base.clone()];
    let mut attempts = 0usize;
    while members.len() < count {
        attempts += 1;
        if attempts > 1000 * count {
            return Err(Error::param(
                "delta",
                "toggle pool keeps disconnecting the base graph",
            ));
        }
        let mut g = base.clone();
        let mut toggled = 0;
        for e in &pool {
            if rng.gen::<bool>() {
                toggled += 1;
                if !g.remove_edge(e.lo, e.hi) {
                    g.add_edge(e.lo, e.hi)?;
                }
            }
        }
        if toggled > 0 && g.is_connected() {
            members.push(g);
        }
    }
    Ok(members)
}

/// Explicit member list, uniform distribution and a lazy ring walk.
pub fn ring_of_graphs(members: Vec<WeightedGraph>, p: f64) -> Result<(GraphFamily, Matrix)> {
    let kernel = lazy_ring_kernel(members.len(), p)?;
    let family = GraphFamily::uniform(members)?;
    Ok((family, kernel))
}
