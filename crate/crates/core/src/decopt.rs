//! Decentralized accelerated gradient method: every outer step averages the
//! local gradients with the accelerated consensus routine before a Nesterov
//! update on each node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::consensus::{consensus_output, ConsensusParams};
use crate::linalg::{self, Matrix};
use crate::source::GossipSource;
use crate::{Error, Result};

/// A smooth strongly convex function held by one node.
pub trait LocalObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Strong convexity modulus.
    fn mu(&self) -> f64;
    /// Smoothness modulus.
    fn smoothness(&self) -> f64;
}

/// `½ xᵀ A x + bᵀ x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    a: Matrix,
    b: Vec<f64>,
    c: f64,
    mu: f64,
    l: f64,
}

impl Quadratic {
    pub fn new(a: Matrix, b: Vec<f64>, c: f64) -> Result<Self> {
        if !a.is_square() || a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: b.len(),
            });
        }
        if !a.is_symmetric(1e-12) {
            return Err(Error::param("a", "not symmetric"));
        }
        let ev = linalg::symmetric_eigenvalues(&a)?;
        let mu = ev.first().copied().unwrap_or(0.0);
        let l = ev.last().copied().unwrap_or(0.0);
        if !(mu > 0.0) {
            return Err(Error::param("a", "not positive definite"));
        }
        Ok(Quadratic { a, b, c, mu, l })
    }

    /// `½ ‖x − center‖²`.
    pub fn centered(center: &[f64]) -> Self {
        let d = center.len();
        let b = center.iter().map(|v| -v).collect();
        Quadratic {
            a: Matrix::identity(d),
            b,
            c: 0.5 * linalg::norm_sq(center),
            mu: 1.0,
            l: 1.0,
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

impl LocalObjective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * linalg::dot(x, &self.a.mul_vec(x)) + linalg::dot(&self.b, x) + self.c
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(x);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi += bi;
        }
        g
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn smoothness(&self) -> f64 {
        self.l
    }
}

fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let raw = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let mut sym = raw.transpose();
    sym.add_scaled(1.0, &raw).expect("square");
    linalg::symmetric_eigen(&sym).expect("square").vectors
}

/// `n` quadratics in dimension `d` whose average has extreme eigenvalues
/// exactly `mu` and `l`. All local Hessians share one eigenbasis; their
/// eigenvalues are random positive multiples of the global ones.
pub fn random_quadratics<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    mu: f64,
    l: f64,
    rng: &mut R,
) -> Result<Vec<Quadratic>> {
    if n == 0 || d < 2 {
        return Err(Error::param("d", "need n ≥ 1 and d ≥ 2"));
    }
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::param("mu", "need 0 < mu ≤ L"));
    }
    let q = random_orthogonal(d, rng);
    let mut spectrum: Vec<f64> = (0..d)
        .map(|k| match k {
            0 => mu,
            _ if k == d - 1 => l,
            _ => rng.gen_range(mu..=l),
        })
        .collect();
    spectrum.sort_by(f64::total_cmp);
    let mut factors: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0.5..1.5)).collect())
        .collect();
    for k in 0..d {
        let mean: f64 = factors.iter().map(|f| f[k]).sum::<f64>() / n as f64;
        for f in &mut factors {
            f[k] /= mean;
        }
    }
    factors
        .into_iter()
        .map(|f| {
            let a = Matrix::from_fn(d, d, |i, j| {
                (0..d).map(|k| q[(i, k)] * spectrum[k] * f[k] * q[(j, k)]).sum()
            });
            let sym = Matrix::from_fn(d, d, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
            let b = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Quadratic::new(sym, b, 0.0)
        })
        .collect()
}

/// Average of the local objectives.
pub fn global_value<F: LocalObjective>(objectives: &[F], x: &[f64]) -> f64 {
    objectives.iter().map(|f| f.value(x)).sum::<f64>() / objectives.len() as f64
}

pub fn global_gradient<F: LocalObjective>(objectives: &[F], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for f in objectives {
        for (gi, v) in g.iter_mut().zip(f.gradient(x)) {
            *gi += v;
        }
    }
    let n = objectives.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Nesterov momentum for constant step `1/L`.
pub fn momentum(mu: f64, l: f64) -> f64 {
    let (sm, sl) = (libm::sqrt(mu), libm::sqrt(l));
    (sl - sm) / (sl + sm)
}

/// Centralized accelerated gradient on the average; returns the `x`
/// iterates, starting with `x0`.
pub fn centralized_agd<F: LocalObjective>(
    objectives: &[F],
    x0: &[f64],
    mu: f64,
    l: f64,
    steps: usize,
) -> Vec<Vec<f64>> {
    let (gamma, eta) = (1.0 / l, momentum(mu, l));
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut out = vec![x.clone()];
    for _ in 0..steps {
        let g = global_gradient(objectives, &y);
        let x_next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gamma * gi).collect();
        y = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + eta * (a - b))
            .collect();
        x = x_next;
        out.push(x.clone());
    }
    out
}

/// Minimizer of the average by accelerated gradient run until the gradient
/// norm is at most `tol`.
pub fn centralized_minimizer<F: LocalObjective>(
    objectives: &[F],
    x0: &[f64],
    mu: f64,
    l: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let (gamma, eta) = (1.0 / l, momentum(mu, l));
    let limit = 200 * (libm::ceil(libm::sqrt(l / mu)) as usize + 1) * 64;
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    for _ in 0..limit {
        let gx = global_gradient(objectives, &x);
        if linalg::norm(&gx) <= tol {
            return Ok(x);
        }
        let g = global_gradient(objectives, &y);
        let x_next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gamma * gi).collect();
        y = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + eta * (a - b))
            .collect();
        x = x_next;
    }
    Err(Error::HorizonExhausted { horizon: limit })
}

/// Constants of the gossip sequence needed to size the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConstants {
    pub tau: u64,
    pub chi: f64,
    pub rho: f64,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoptParams {
    pub gamma: f64,
    pub eta: f64,
    /// Outer iterations `N`.
    pub outer: usize,
    /// Inner consensus iterations `T`.
    pub inner: usize,
}

/// Default calibration constant of the inner iteration count.
pub const DEFAULT_INNER_CONST: f64 = 4.0;

/// Outer step, momentum and iteration counts for accuracy `epsilon` from an
/// initial gap `c0`. The inner loop targets accuracy `epsilon²`.
pub fn derive_outer_params(
    mu: f64,
    l: f64,
    epsilon: f64,
    c0: f64,
    chain: &ChainConstants,
    c_t: f64,
) -> Result<DecoptParams> {
    if !(mu > 0.0) || !(l >= mu) || !l.is_finite() {
        return Err(Error::param("mu", format!("need 0 < mu ≤ L, got mu={mu}, L={l}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    if !(c0 >= 0.0) || !(c_t > 0.0) {
        return Err(Error::param("c0", "c0 must be non-negative and c_T positive"));
    }
    if chain.tau == 0 || !(chain.chi >= 1.0) || !(chain.lambda_min > 0.0) || !(chain.rho >= 0.0) {
        return Err(Error::param("chain", "invalid chain constants"));
    }
    let outer = if c0 > epsilon {
        libm::ceil(libm::sqrt(l / mu) * libm::log(c0 / epsilon)) as usize
    } else {
        0
    };
    let ratio = chain.rho / chain.lambda_min;
    let inner_accuracy = epsilon * epsilon;
    let inner = libm::ceil(
        c_t * chain.tau as f64 * (libm::sqrt(chain.chi) + ratio * ratio) * libm::log(1.0 / inner_accuracy),
    ) as usize;
    Ok(DecoptParams {
        gamma: 1.0 / l,
        eta: momentum(mu, l),
        outer,
        inner: inner.max(1),
    })
}

/// Per-node iterates, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStates {
    pub x: Matrix,
    pub y: Matrix,
}

impl NodeStates {
    /// Every node starts at `x0`.
    pub fn replicated(n: usize, x0: &[f64]) -> Self {
        let x = Matrix::from_fn(n, x0.len(), |_, j| x0[j]);
        NodeStates { x: x.clone(), y: x }
    }

    pub fn mean_x(&self) -> Vec<f64> {
        column_mean(&self.x)
    }

    /// `max_i ‖x_i − x̄‖`.
    pub fn consensus_error(&self) -> f64 {
        let m = self.mean_x();
        (0..self.x.rows())
            .map(|i| libm::sqrt(linalg::dist_sq(self.x.row(i), &m)))
            .fold(0.0, f64::max)
    }
}

fn column_mean(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (a, v) in m.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= x.rows() as f64);
    m
}

/// One outer iteration; returns the communication rounds it used.
pub fn outer_step<F: LocalObjective, R: RngCore + ?Sized>(
    states: &mut NodeStates,
    objectives: &[F],
    params: &DecoptParams,
    inner: &ConsensusParams,
    source: &mut dyn GossipSource,
    rng: &mut R,
) -> Result<u64> {
    let n = objectives.len();
    if states.y.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: states.y.rows(),
        });
    }
    let d = states.y.cols();
    let mut grads = Matrix::zeros(n, d);
    for (i, f) in objectives.iter().enumerate() {
        grads.row_mut(i).copy_from_slice(&f.gradient(states.y.row(i)));
    }
    let (v, comms) = if n == 1 {
        (grads, 0)
    } else {
        consensus_output(&grads, source, inner, params.inner, rng)?
    };
    let mut x_next = states.y.clone();
    x_next.add_scaled(-params.gamma, &v)?;
    let mut step = x_next.clone();
    step.add_scaled(-1.0, &states.x)?;
    let mut y_next = x_next.clone();
    y_next.add_scaled(params.eta, &step)?;
    states.x = x_next;
    states.y = y_next;
    Ok(comms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoptRow {
    pub k: usize,
    pub comms: u64,
    /// `f(x̄) − f*`.
    pub gap: f64,
    /// `max_i ‖x_i − x̄‖`.
    pub consensus_err: f64,
}

fn row<F: LocalObjective>(k: usize, comms: u64, s: &NodeStates, objectives: &[F], f_star: f64) -> DecoptRow {
    DecoptRow {
        k,
        comms,
        gap: global_value(objectives, &s.mean_x()) - f_star,
        consensus_err: s.consensus_error(),
    }
}

/// Runs `params.outer` outer steps from `x0` on every node.
pub fn run_decopt<F: LocalObjective, R: RngCore + ?Sized>(
    objectives: &[F],
    source: &mut dyn GossipSource,
    params: &DecoptParams,
    inner: &ConsensusParams,
    x0: &[f64],
    f_star: f64,
    rng: &mut R,
) -> Result<(NodeStates, Vec<DecoptRow>)> {
    if objectives.iter().any(|f| f.dim() != x0.len()) {
        return Err(Error::param("x0", "dimension differs from the objectives"));
    }
    let mut states = NodeStates::replicated(objectives.len(), x0);
    let mut comms = 0u64;
    let mut trace = vec![row(0, 0, &states, objectives, f_star)];
    for k in 1..=params.outer {
        comms += outer_step(&mut states, objectives, params, inner, source, rng)?;
        trace.push(row(k, comms, &states, objectives, f_star));
    }
    Ok((states, trace))
}
