//! Laplacians, gossip-matrix validation and the spectral quantities that drive
//! consensus cost.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::graph::{Edge, Graph, WeightedGraph};
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Eigenvalues at or below this fraction of the largest one count as zero.
pub const KERNEL_REL_TOL: f64 = 1e-9;
/// Relative tolerance for symmetry and off-graph sparsity checks.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;
/// Relative accuracy [`retune_chi`] stops at.
pub const RETUNE_REL_TOL: f64 = 1e-6;
const RETUNE_MAX_ITERS: usize = 64;
const RETUNE_MIN_FACTOR: f64 = 1e-12;

/// Square symmetric matrix used as one round of communication.
///
/// Construction only checks shape and symmetry; whether the matrix respects
/// a particular graph is answered by [`validate_gossip`].
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    matrix: Matrix,
}

impl GossipMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        if !matrix.is_symmetric(SYMMETRY_REL_TOL) {
            return Err(Error::param("matrix", "not symmetric"));
        }
        Ok(GossipMatrix { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// `W x` for a per-node scalar vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// `W X` where row i of `x` is node i's payload.
    pub fn apply_rows(&self, x: &Matrix) -> Matrix {
        self.matrix.mul(x).expect("row count checked by caller")
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.matrix).expect("square by construction")
    }
}

/// Weighted Laplacian: weighted degrees on the diagonal, `-a_ij` off it.
pub fn build_laplacian(g: &WeightedGraph) -> GossipMatrix {
    let n = g.n();
    let mut m = Matrix::zeros(n, n);
    for (e, w) in g.weights() {
        m[(e.lo, e.lo)] += w;
        m[(e.hi, e.hi)] += w;
        m[(e.lo, e.hi)] -= w;
        m[(e.hi, e.lo)] -= w;
    }
    GossipMatrix { matrix: m }
}

/// Laplacian of the single edge (i, j) in dimension n.
pub fn mini_laplacian(n: usize, i: usize, j: usize) -> Result<Matrix> {
    if i == j {
        return Err(Error::param("j", "mini-Laplacian needs i != j"));
    }
    if i >= n || j >= n {
        return Err(Error::param("i/j", format!("vertex out of range for n = {n}")));
    }
    let mut m = Matrix::zeros(n, n);
    m[(i, i)] = 1.0;
    m[(j, j)] = 1.0;
    m[(i, j)] = -1.0;
    m[(j, i)] = -1.0;
    Ok(m)
}

/// Which gossip condition a matrix violates.
#[derive(Debug, Clone, PartialEq)]
pub enum GossipViolation {
    NotSymmetric { asymmetry: f64 },
    /// Nonzero entry between non-adjacent vertices.
    Sparsity { i: usize, j: usize, value: f64 },
    /// The all-ones vector is not annihilated.
    OnesNotInKernel { residual: f64 },
    /// Kernel is larger than the consensus line.
    KernelDimension { dimension: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossipCheck {
    pub violation: Option<GossipViolation>,
}

impl GossipCheck {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks the sparsity pattern against `g` and that the kernel is exactly the
/// span of the all-ones vector.
pub fn validate_gossip(w: &Matrix, g: &Graph) -> Result<GossipCheck> {
    let n = g.n();
    if w.rows() != n || w.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if w.rows() != n { w.rows() } else { w.cols() },
        });
    }
    let fail = |v| Ok(GossipCheck { violation: Some(v) });
    let asym = w.asymmetry();
    if asym > SYMMETRY_REL_TOL {
        return fail(GossipViolation::NotSymmetric { asymmetry: asym });
    }
    let scale = w.max_abs();
    for i in 0..n {
        for j in 0..n {
            if i != j && !g.has_edge(i, j) && w[(i, j)].abs() > SYMMETRY_REL_TOL * scale {
                return fail(GossipViolation::Sparsity {
                    i,
                    j,
                    value: w[(i, j)],
                });
            }
        }
    }
    let ev = linalg::symmetric_eigenvalues(w)?;
    let lmax = ev.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let ones = alloc::vec![1.0; n];
    let residual = linalg::norm(&w.mul_vec(&ones)) / libm::sqrt(n as f64);
    if lmax == 0.0 {
        // Zero matrix: kernel is everything unless n == 1.
        if n > 1 {
            return fail(GossipViolation::KernelDimension { dimension: n });
        }
        return Ok(GossipCheck { violation: None });
    }
    if residual > KERNEL_REL_TOL * lmax {
        return fail(GossipViolation::OnesNotInKernel { residual });
    }
    let dimension = ev
        .iter()
        .filter(|v| v.abs() <= KERNEL_REL_TOL * lmax)
        .count();
    if dimension != 1 {
        return fail(GossipViolation::KernelDimension { dimension });
    }
    Ok(GossipCheck { violation: None })
}

/// Largest eigenvalue, smallest positive eigenvalue and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min_plus: f64,
    pub chi: f64,
}

pub fn spectral_summary(w: &GossipMatrix) -> Result<SpectralSummary> {
    summary_from_eigenvalues(&w.eigenvalues())
}

pub(crate) fn summary_from_eigenvalues(ev: &[f64]) -> Result<SpectralSummary> {
    let lambda_max = ev.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::KernelDimension { found: ev.len() });
    }
    let cut = KERNEL_REL_TOL * lambda_max;
    let kernel = ev.iter().filter(|v| v.abs() <= cut).count();
    if kernel != 1 {
        return Err(Error::KernelDimension { found: kernel });
    }
    let lambda_min_plus = ev
        .iter()
        .copied()
        .find(|&v| v > cut)
        .ok_or(Error::KernelDimension { found: ev.len() })?;
    Ok(SpectralSummary {
        lambda_max,
        lambda_min_plus,
        chi: lambda_max / lambda_min_plus,
    })
}

/// Gershgorin bound on the Laplacian spectrum: twice the largest weighted degree.
pub fn gershgorin_bound(g: &WeightedGraph) -> f64 {
    2.0 * g.max_weighted_degree()
}

/// Weights every edge by the number of chosen shortest paths that use it.
///
/// One path is chosen per unordered vertex pair (i, j), i < j: BFS from i,
/// then walk back from j always stepping to the lowest-index predecessor.
pub fn shortest_path_weighting(g: &Graph) -> Result<WeightedGraph> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = g.n();
    let adj = g.adjacency();
    let mut counts: BTreeMap<Edge, f64> = g.edges().map(|e| (e, 0.0)).collect();
    for i in 0..n {
        let dist = crate::graph::bfs(&adj, i);
        for j in (i + 1)..n {
            let mut v = j;
            while v != i {
                let dv = dist[v].ok_or(Error::Disconnected)?;
                let pred = adj[v]
                    .iter()
                    .copied()
                    .find(|&w| dist[w] == Some(dv - 1))
                    .ok_or(Error::Disconnected)?;
                *counts.get_mut(&Edge::new(v, pred)).expect("bfs follows edges") += 1.0;
                v = pred;
            }
        }
    }
    WeightedGraph::new(g.clone(), counts)
}

fn chi_of(g: &WeightedGraph) -> Result<f64> {
    Ok(spectral_summary(&build_laplacian(g))?.chi)
}

/// Result of a [`retune_chi_report`] call.
#[derive(Debug, Clone)]
pub struct Retune {
    pub graph: WeightedGraph,
    /// Edge whose weight was scaled, `None` when nothing changed.
    pub edge: Option<Edge>,
    pub factor: f64,
    pub chi: f64,
}

/// Raises the condition number to `chi_target` by shrinking one edge weight.
pub fn retune_chi(g: &WeightedGraph, chi_target: f64) -> Result<WeightedGraph> {
    retune_chi_report(g, chi_target).map(|r| r.graph)
}

/// Like [`retune_chi`], also reporting which edge moved and by how much.
///
/// The candidate edge is the lowest non-bridge edge; when there is none, or
/// shrinking it cannot reach the target, the lowest bridge is used. Bisection
/// runs on the logarithm of the weight factor over `[1e-12, 1]`.
pub fn retune_chi_report(g: &WeightedGraph, chi_target: f64) -> Result<Retune> {
    if !g.graph().is_connected() {
        return Err(Error::Disconnected);
    }
    if !(chi_target.is_finite() && chi_target >= 1.0) {
        return Err(Error::param("chi_target", "must be a finite value >= 1"));
    }
    let chi0 = chi_of(g)?;
    if (chi0 - chi_target).abs() <= RETUNE_REL_TOL * chi_target {
        return Ok(Retune {
            graph: g.clone(),
            edge: None,
            factor: 1.0,
            chi: chi0,
        });
    }
    if chi_target < chi0 {
        return Err(Error::param(
            "chi_target",
            format!("{chi_target} is below the current condition number {chi0}"),
        ));
    }

    let bridges = g.graph().bridges();
    let mut candidates = Vec::new();
    if let Some(e) = g.graph().edges().find(|e| !bridges.contains(e)) {
        candidates.push(e);
    }
    if let Some(&e) = bridges.iter().next() {
        candidates.push(e);
    }

    let mut best_reach = chi0;
    for edge in candidates {
        let base_w = g.weight(edge).expect("candidate is an edge");
        let chi_at = |log_factor: f64| -> Result<f64> {
            let mut h = g.clone();
            h.set_weight(edge, base_w * libm::exp(log_factor))?;
            match chi_of(&h) {
                Err(Error::KernelDimension { .. }) => Ok(f64::INFINITY),
                other => other,
            }
        };
        let mut lo = libm::log(RETUNE_MIN_FACTOR);
        let mut hi = 0.0;
        let reach = chi_at(lo)?;
        if reach < chi_target {
            best_reach = best_reach.max(reach);
            continue;
        }
        let mut mid = 0.5 * (lo + hi);
        let mut chi = chi_at(mid)?;
        for _ in 0..RETUNE_MAX_ITERS {
            if (chi - chi_target).abs() <= RETUNE_REL_TOL * chi_target {
                break;
            }
            // Smaller weight, larger condition number.
            if chi > chi_target {
                lo = mid;
            } else {
                hi = mid;
            }
            mid = 0.5 * (lo + hi);
            chi = chi_at(mid)?;
        }
        if (chi - chi_target).abs() > RETUNE_REL_TOL * chi_target {
            return Err(Error::NoBracket {
                target: chi_target,
                reachable: chi,
            });
        }
        let factor = libm::exp(mid);
        let mut graph = g.clone();
        graph.set_weight(edge, base_w * factor)?;
        return Ok(Retune {
            graph,
            edge: Some(edge),
            factor,
            chi,
        });
    }
    Err(Error::NoBracket {
        target: chi_target,
        reachable: best_reach,
    })
}
