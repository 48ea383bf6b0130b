//! Accelerated consensus over a randomly varying sequence of gossip matrices,
//! with a multilevel batched estimate of `W̃ x` and a plain gossip baseline.
//!
//! Node payloads are rows of an `n × d` matrix; the `d` columns are solved as
//! independent scalar problems that share one random level stream.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::gossip::GossipMatrix;
use crate::linalg::{self, Matrix};
use crate::source::GossipSource;
use crate::{Error, Result};

/// Momentum weight of the extrapolation step.
pub const P: f64 = 0.25;
const NOISE_CONST: f64 = 1800.0;

/// Step sizes, momentum scalars and batch sizes of the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusParams {
    pub gamma: f64,
    pub p: f64,
    pub beta: f64,
    pub eta: f64,
    pub theta: f64,
    /// Batch cap `M`.
    pub m_cap: u64,
    /// Base batch `B`.
    pub batch: u64,
    /// Batch knob `b`.
    pub b: u64,
    pub iterations: usize,
    /// Smallest positive eigenvalue of the mean matrix, used by the potential.
    pub lambda_min: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// Parameters from the spectrum of the mean matrix, the noise level `rho`,
/// the mixing time `tau` and the batch knob `b`.
pub fn derive_consensus_params(
    lambda_max: f64,
    lambda_min_plus: f64,
    rho: f64,
    tau: u64,
    b: u64,
    iterations: usize,
) -> Result<ConsensusParams> {
    positive("lambda_max", lambda_max)?;
    positive("lambda_min_plus", lambda_min_plus)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", "must be non-negative and finite"));
    }
    if tau == 0 || b == 0 {
        return Err(Error::param("tau", "tau and b must be at least 1"));
    }
    if lambda_min_plus > lambda_max {
        return Err(Error::param("lambda_min_plus", "exceeds lambda_max"));
    }
    let deterministic = 3.0 / (4.0 * lambda_max);
    let gamma = if rho == 0.0 {
        deterministic
    } else {
        let r = tau as f64 / b as f64;
        let denom = NOISE_CONST * rho * rho * (r + r * r);
        let noisy = lambda_min_plus * lambda_min_plus * lambda_min_plus / denom;
        deterministic.min(noisy * noisy)
    };
    ConsensusParams::from_step(gamma, lambda_min_plus, b, iterations)
}

impl ConsensusParams {
    /// Derived scalars for a given step size.
    pub fn from_step(gamma: f64, lambda_min: f64, b: u64, iterations: usize) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("lambda_min", lambda_min)?;
        if b == 0 {
            return Err(Error::param("b", "must be at least 1"));
        }
        let p = P;
        let beta = libm::sqrt(4.0 * p * p * lambda_min * gamma / 3.0);
        let eta = libm::sqrt(12.0 / (lambda_min * gamma));
        if !(beta <= 1.0 && eta >= 1.0) {
            return Err(Error::param(
                "gamma",
                format!("lambda_min * gamma = {} exceeds 12", lambda_min * gamma),
            ));
        }
        let theta = (p / eta - 1.0) / (beta * p / eta - 1.0);
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::param("theta", format!("{theta} outside (0, 1)")));
        }
        let m_real = libm::ceil(libm::sqrt(0.25 * (1.0 + 2.0 / beta)));
        let m_cap = (m_real as u64).max(2);
        let batch = libm::ceil(b as f64 * libm::log2(m_cap as f64)) as u64;
        Ok(ConsensusParams {
            gamma,
            p,
            beta,
            eta,
            theta,
            m_cap,
            batch: batch.max(1),
            b,
            iterations,
            lambda_min,
        })
    }

    /// Per-iteration contraction `1 - sqrt(p² λ_min γ / 3)` of the potential.
    pub fn rate(&self) -> f64 {
        1.0 - libm::sqrt(self.p * self.p * self.lambda_min * self.gamma / 3.0)
    }

    /// Highest level whose batch fits under the cap.
    pub fn top_level(&self) -> u32 {
        63 - self.m_cap.leading_zeros()
    }
}

/// Iterates of the method plus the communication counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub x: Matrix,
    pub x_f: Matrix,
    pub x_g: Matrix,
    /// Communication rounds consumed so far.
    pub comms: u64,
    pub k: usize,
}

impl ConsensusState {
    pub fn new(x0: Matrix) -> Self {
        ConsensusState {
            x: x0.clone(),
            x_f: x0.clone(),
            x_g: x0,
            comms: 0,
            k: 0,
        }
    }

    pub fn from_vector(x0: &[f64]) -> Self {
        ConsensusState::new(Matrix::column(x0))
    }
}

/// Draws `J ≥ 1` with `P(J = j) = 2^-j`.
pub fn sample_level<R: RngCore + ?Sized>(rng: &mut R) -> u32 {
    rng.next_u64().trailing_zeros() + 1
}

/// One realized estimator draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MlmcDraw {
    pub g: Matrix,
    pub level: u32,
    pub comms: u64,
}

fn weighted_product(
    source: &dyn GossipSource,
    cache: &mut [Option<Matrix>],
    counts: &[u64],
    total: u64,
    x: &Matrix,
) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for (s, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let product = cache[s].get_or_insert_with(|| source.members()[s].apply_rows(x));
        g.add_scaled(c as f64 / total as f64, product)
            .expect("same shape");
    }
    g
}

/// Estimate of `W̃ x` from `2^J B` consecutive matrices of `source`.
///
/// Returns `g_0 + 2^J (g_J - g_{J-1})` when `2^J ≤ M` and `g_0` otherwise,
/// where `g_j` averages the first `2^j B` products. The source always moves
/// `2^J B` rounds ahead.
pub fn mlmc_gradient<R: RngCore + ?Sized>(
    x: &Matrix,
    source: &mut dyn GossipSource,
    params: &ConsensusParams,
    rng: &mut R,
) -> MlmcDraw {
    let level = sample_level(rng);
    mlmc_at_level(x, source, params, level)
}

/// [`mlmc_gradient`] with the level fixed.
pub fn mlmc_at_level(
    x: &Matrix,
    source: &mut dyn GossipSource,
    params: &ConsensusParams,
    level: u32,
) -> MlmcDraw {
    let batch = params.batch;
    let scale = 1u64.checked_shl(level).unwrap_or(u64::MAX);
    let comms = scale.saturating_mul(batch);
    let corrected = scale <= params.m_cap;
    let members = source.members().len();
    let mut cache: Vec<Option<Matrix>> = vec![None; members];

    let used = if corrected { comms } else { batch };
    let half = if corrected { comms / 2 } else { 0 };
    let mut base = vec![0u64; members];
    let mut lower = vec![0u64; members];
    let mut upper = vec![0u64; members];
    for i in 0..used {
        let s = source.advance();
        if i < batch {
            base[s] += 1;
        }
        if i < half {
            lower[s] += 1;
        }
        upper[s] += 1;
    }
    source.skip(comms - used);

    let mut g = weighted_product(source, &mut cache, &base, batch, x);
    if corrected {
        let g_hi = weighted_product(source, &mut cache, &upper, comms, x);
        let g_lo = weighted_product(source, &mut cache, &lower, half, x);
        let mut diff = g_hi;
        diff.add_scaled(-1.0, &g_lo).expect("same shape");
        g.add_scaled(scale as f64, &diff).expect("same shape");
    }
    MlmcDraw { g, level, comms }
}

fn combine(terms: &[(f64, &Matrix)]) -> Matrix {
    let (a0, m0) = terms[0];
    let mut out = m0.scaled(a0);
    for &(a, m) in &terms[1..] {
        out.add_scaled(a, m).expect("same shape");
    }
    out
}

/// One iteration; returns the level drawn.
pub fn consensus_step<R: RngCore + ?Sized>(
    state: &mut ConsensusState,
    source: &mut dyn GossipSource,
    params: &ConsensusParams,
    rng: &mut R,
) -> u32 {
    let ConsensusParams {
        p,
        gamma,
        beta,
        eta,
        theta,
        ..
    } = *params;
    state.x_g = combine(&[(theta, &state.x_f), (1.0 - theta, &state.x)]);
    let draw = mlmc_gradient(&state.x_g, source, params, rng);
    let x_f_next = combine(&[(1.0, &state.x_g), (-p * gamma, &draw.g)]);
    state.x = combine(&[
        (eta, &x_f_next),
        (p - eta, &state.x_f),
        ((1.0 - p) * (1.0 - beta), &state.x),
        ((1.0 - p) * beta, &state.x_g),
    ]);
    state.x_f = x_f_next;
    state.comms = state.comms.saturating_add(draw.comms);
    state.k += 1;
    draw.level
}

/// `xᵀ W̃ x`, summed over payload columns for matrices.
pub fn r_value(w_tilde: &GossipMatrix, x: &[f64]) -> f64 {
    linalg::dot(x, &w_tilde.apply(x))
}

/// Gradient `2 W̃ x` of [`r_value`].
pub fn r_grad(w_tilde: &GossipMatrix, x: &[f64]) -> Vec<f64> {
    w_tilde.apply(x).into_iter().map(|v| 2.0 * v).collect()
}

fn r_rows(w_tilde: &GossipMatrix, x: &Matrix) -> f64 {
    linalg::dot(x.as_slice(), w_tilde.apply_rows(x).as_slice())
}

/// Per-column average broadcast to every row.
pub fn consensus_point(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut avg = vec![0.0; d];
    for i in 0..n {
        for (a, v) in avg.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    for a in &mut avg {
        *a /= n as f64;
    }
    Matrix::from_fn(n, d, |_, j| avg[j])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub comms: u64,
    /// `‖x − x*‖²`.
    pub dist2: f64,
    /// `r(x_f) − r(x*)`.
    pub r_gap: f64,
    pub potential: f64,
}

/// Potential `‖x − x*‖² + (24/λ_min)(r(x_f) − r(x*))`.
pub fn trace_row(state: &ConsensusState, target: &Matrix, w_tilde: &GossipMatrix, lambda_min: f64) -> TraceRow {
    let dist2 = linalg::dist_sq(state.x.as_slice(), target.as_slice());
    let r_gap = r_rows(w_tilde, &state.x_f) - r_rows(w_tilde, target);
    TraceRow {
        k: state.k,
        comms: state.comms,
        dist2,
        r_gap,
        potential: dist2 + 24.0 / lambda_min * r_gap,
    }
}

/// Runs `params.iterations` steps from `x0` and records the initial row and
/// one row per step.
pub fn run_consensus<R: RngCore + ?Sized>(
    x0: &Matrix,
    source: &mut dyn GossipSource,
    w_tilde: &GossipMatrix,
    params: &ConsensusParams,
    rng: &mut R,
) -> Result<(ConsensusState, Vec<TraceRow>)> {
    check_rows(x0, source)?;
    let target = consensus_point(x0);
    let mut state = ConsensusState::new(x0.clone());
    let mut trace = Vec::with_capacity(params.iterations + 1);
    trace.push(trace_row(&state, &target, w_tilde, params.lambda_min));
    for _ in 0..params.iterations {
        consensus_step(&mut state, source, params, rng);
        trace.push(trace_row(&state, &target, w_tilde, params.lambda_min));
    }
    Ok((state, trace))
}

/// Runs the method and returns only the final `x` iterate.
pub fn consensus_output<R: RngCore + ?Sized>(
    x0: &Matrix,
    source: &mut dyn GossipSource,
    params: &ConsensusParams,
    iterations: usize,
    rng: &mut R,
) -> Result<(Matrix, u64)> {
    check_rows(x0, source)?;
    let mut state = ConsensusState::new(x0.clone());
    for _ in 0..iterations {
        consensus_step(&mut state, source, params, rng);
    }
    Ok((state.x, state.comms))
}

fn check_rows(x0: &Matrix, source: &dyn GossipSource) -> Result<()> {
    if x0.rows() != source.n() {
        return Err(Error::DimensionMismatch {
            expected: source.n(),
            found: x0.rows(),
        });
    }
    Ok(())
}

/// Largest eigenvalue over the matrices a source can emit.
pub fn max_lambda(source: &dyn GossipSource) -> f64 {
    source
        .members()
        .iter()
        .map(|w| w.eigenvalues().last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// `x ← (I − W/λ_max) x` once per round; returns `‖x − x*‖²` before the
/// first round and after each one.
pub fn plain_gossip(
    x0: &Matrix,
    source: &mut dyn GossipSource,
    lambda_max: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    check_rows(x0, source)?;
    positive("lambda_max", lambda_max)?;
    let target = consensus_point(x0);
    let mut x = x0.clone();
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(linalg::dist_sq(x.as_slice(), target.as_slice()));
    for _ in 0..steps {
        let s = source.advance();
        let wx = source.members()[s].apply_rows(&x);
        x.add_scaled(-1.0 / lambda_max, &wx).expect("same shape");
        trace.push(linalg::dist_sq(x.as_slice(), target.as_slice()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gossip::build_laplacian;
    use crate::graph::{Graph, WeightedGraph};
    use crate::seed::SimRng;
    use crate::source::StaticSource;
    use rand::{Rng, SeedableRng};

    fn k_n(n: usize) -> GossipMatrix {
        build_laplacian(&WeightedGraph::unit(Graph::complete(n)))
    }

    #[test]
    fn formula_chain_with_forced_step() {
        let p = ConsensusParams::from_step(3.0, 1.0, 7, 10).unwrap();
        assert!((p.beta - 0.5).abs() < 1e-15);
        assert!((p.eta - 2.0).abs() < 1e-15);
        assert!((p.theta - 14.0 / 15.0).abs() < 1e-15);
        assert_eq!(p.m_cap, 2);
        assert_eq!(p.batch, 7);
    }

    #[test]
    fn noiseless_step_is_deterministic_term() {
        let p = derive_consensus_params(2.0, 0.5, 0.0, 3, 1, 1).unwrap();
        assert_eq!(p.gamma, 3.0 / 8.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_consensus_params(0.0, 0.5, 0.0, 1, 1, 1).is_err());
        assert!(derive_consensus_params(1.0, -1.0, 0.0, 1, 1, 1).is_err());
        assert!(derive_consensus_params(1.0, 0.5, 0.0, 0, 1, 1).is_err());
        assert!(ConsensusParams::from_step(13.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn theta_stays_inside_unit_interval() {
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..100 {
            let lmax: f64 = rng.gen_range(0.5..50.0);
            let lmin = lmax * rng.gen_range(0.001..1.0);
            let rho = rng.gen_range(0.0..5.0);
            let tau = rng.gen_range(1..10);
            let b = rng.gen_range(1..100);
            let p = derive_consensus_params(lmax, lmin, rho, tau, b, 1).unwrap();
            assert!(p.p / p.eta < 1.0 && p.beta * p.p / p.eta < 1.0);
            assert!(p.theta > 0.0 && p.theta < 1.0);
            assert!(p.beta > 0.0 && p.beta <= 1.0 && p.eta >= 1.0 && p.m_cap >= 2);
        }
    }

    #[test]
    fn level_law_is_halving() {
        let mut rng = SimRng::seed_from_u64(11);
        let mut counts = [0u32; 4];
        let draws = 40_000;
        for _ in 0..draws {
            let j = sample_level(&mut rng);
            assert!(j >= 1);
            if j <= 4 {
                counts[j as usize - 1] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let expect = draws as f64 / f64::from(2u32 << i);
            assert!((c as f64 - expect).abs() < 5.0 * libm::sqrt(expect));
        }
    }

    #[test]
    fn constant_source_gives_exact_product() {
        let w = k_n(5);
        let params = derive_consensus_params(5.0, 5.0, 0.0, 1, 3, 1).unwrap();
        let x = Matrix::column(&[1.0, -2.0, 0.5, 3.0, 0.0]);
        let expect = w.apply_rows(&x);
        for level in 1..6 {
            let mut src = StaticSource::new(w.clone());
            let draw = mlmc_at_level(&x, &mut src, &params, level);
            assert_eq!(draw.g, expect);
            assert_eq!(draw.comms, (1u64 << level) * params.batch);
        }
    }

    #[test]
    fn consensual_start_is_fixed() {
        let w = k_n(6);
        let params = derive_consensus_params(6.0, 6.0, 0.0, 1, 1, 10).unwrap();
        let x0 = Matrix::column(&[2.5; 6]);
        let mut src = StaticSource::new(w.clone());
        let mut rng = SimRng::seed_from_u64(0);
        let (state, trace) = run_consensus(&x0, &mut src, &w, &params, &mut rng).unwrap();
        assert_eq!(state.x, x0);
        assert_eq!(state.x_f, x0);
        assert!(trace.iter().all(|r| r.potential == 0.0));
    }

    #[test]
    fn empty_budget_gives_initial_row() {
        let w = k_n(3);
        let params = derive_consensus_params(3.0, 3.0, 0.0, 1, 1, 0).unwrap();
        let x0 = Matrix::column(&[1.0, 0.0, 0.0]);
        let mut src = StaticSource::new(w.clone());
        let mut rng = SimRng::seed_from_u64(0);
        let (_, trace) = run_consensus(&x0, &mut src, &w, &params, &mut rng).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].comms, 0);
    }

    #[test]
    fn static_graph_converges_and_counts_comms() {
        let w = k_n(8);
        let params = derive_consensus_params(8.0, 8.0, 0.0, 1, 1, 200).unwrap();
        let mut rng = SimRng::seed_from_u64(4);
        let x0 = Matrix::from_fn(8, 2, |i, j| (i * 3 + j) as f64);
        let mut src = StaticSource::new(w.clone());
        let target = consensus_point(&x0);
        let mut state = ConsensusState::new(x0.clone());
        let mut total = 0u64;
        for _ in 0..200 {
            let j = consensus_step(&mut state, &mut src, &params, &mut rng);
            total += (1u64 << j) * params.batch;
        }
        assert_eq!(state.comms, total);
        assert!(linalg::dist_sq(state.x.as_slice(), target.as_slice()) < 1e-12);
    }

    #[test]
    fn r_on_eigenvector() {
        let w = build_laplacian(&WeightedGraph::unit(Graph::path(2)));
        let x = [1.0, -1.0];
        assert!((r_value(&w, &x) - 4.0).abs() < 1e-15);
        assert_eq!(r_value(&w, &[3.0, 3.0]), 0.0);
        assert_eq!(r_grad(&w, &[3.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn plain_gossip_contracts() {
        let w = build_laplacian(&WeightedGraph::unit(Graph::cycle(7)));
        let ev = w.eigenvalues();
        let (lmin, lmax) = (ev[1], ev[6]);
        let x0 = Matrix::column(&[1.0, 0.0, 2.0, -1.0, 0.0, 4.0, 0.5]);
        let mut src = StaticSource::new(w);
        let trace = plain_gossip(&x0, &mut src, lmax, 30).unwrap();
        let factor = (1.0 - lmin / lmax) * (1.0 - lmin / lmax);
        for pair in trace.windows(2) {
            assert!(pair[1] <= factor * pair[0] * (1.0 + 1e-12) + 1e-300);
        }
    }
}
