use rand::{Rng, SeedableRng};

use slowvary_core::consensus::{
    consensus_step, derive_consensus_params, mlmc_gradient, plain_gossip, r_grad, r_value, sample_level,
    ConsensusParams, ConsensusState,
};
use slowvary_core::decopt::{
    centralized_minimizer, derive_outer_params, global_value, outer_step, random_quadratics, run_decopt,
    ChainConstants, DecoptParams, LocalObjective, NodeStates, Quadratic,
};
use slowvary_core::gossip::{build_laplacian, spectral_summary, GossipMatrix};
use slowvary_core::graph::{random_connected, random_weights, Graph, WeightedGraph};
use slowvary_core::linalg::{self, Matrix};
use slowvary_core::lowerbound::{build_two_star, FunctionRole, WorstCaseFunction, WorstCaseInstance};
use slowvary_core::markov::{lazy_resample_kernel, mean_gossip, GraphFamily, MarkovGraphChain};
use slowvary_core::seed::SimRng;
use slowvary_core::source::{GossipSource, StaticSource};

fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn random_vec(r: &mut SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    linalg::norm(&diff) / linalg::norm(b).max(1.0)
}

#[test]
fn eigenpairs_satisfy_residual_and_invariants() {
    let mut r = rng(1);
    for n in [1usize, 2, 3, 7, 16, 33] {
        for _ in 0..5 {
            let raw = Matrix::from_fn(n, n, |_, _| r.gen_range(-2.0..2.0));
            let sym = Matrix::from_fn(n, n, |i, j| raw[(i, j)] + raw[(j, i)]);
            let eig = linalg::symmetric_eigen(&sym).unwrap();
            let scale = eig.values.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = (0..n).map(|i| sym[(i, i)]).sum();
            assert!((eig.values.iter().sum::<f64>() - trace).abs() <= 1e-10 * scale * n as f64);
            let frob: f64 = sym.as_slice().iter().map(|v| v * v).sum();
            let sq: f64 = eig.values.iter().map(|v| v * v).sum();
            assert!((sq - frob).abs() <= 1e-10 * frob.max(1.0));
            for c in 0..n {
                let col: Vec<f64> = (0..n).map(|i| eig.vectors[(i, c)]).collect();
                let res: Vec<f64> = sym.mul_vec(&col).iter().zip(&col).map(|(a, v)| a - eig.values[c] * v).collect();
                assert!(linalg::norm(&res) <= 1e-10 * scale, "n={n}");
                for c2 in 0..n {
                    let other: Vec<f64> = (0..n).map(|i| eig.vectors[(i, c2)]).collect();
                    let expected = if c == c2 { 1.0 } else { 0.0 };
                    assert!((linalg::dot(&col, &other) - expected).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn path_laplacian_has_closed_form_spectrum() {
    let n = 9;
    let w = build_laplacian(&WeightedGraph::unit(Graph::path(n)));
    let ev = w.eigenvalues();
    for (k, v) in ev.iter().enumerate() {
        let exact = 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
        assert!((v - exact).abs() < 1e-12, "{k}: {v} vs {exact}");
    }
}

#[test]
fn eigenvectors_reconstruct_the_matrix() {
    let mut r = rng(2);
    let g = random_weights(random_connected(12, 0.3, &mut r), 0.5, 2.0, &mut r);
    let l = build_laplacian(&g);
    let eig = linalg::symmetric_eigen(l.matrix()).unwrap();
    let n = l.n();
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| eig.vectors[(i, k)] * eig.values[k] * eig.vectors[(j, k)]).sum();
            assert!((v - l.matrix()[(i, j)]).abs() < 1e-10);
        }
    }
}

#[test]
fn r_gradient_matches_finite_differences() {
    let mut r = rng(3);
    let g = random_weights(random_connected(10, 0.3, &mut r), 0.5, 2.0, &mut r);
    let w = build_laplacian(&g);
    for _ in 0..20 {
        let x = random_vec(&mut r, 10, 3.0);
        let fd = central_difference(|z| r_value(&w, z), &x, 1e-5);
        assert!(relative_error(&r_grad(&w, &x), &fd) <= 1e-6);
    }
}

#[test]
fn worst_case_gradients_match_finite_differences() {
    let mut r = rng(4);
    for role in [FunctionRole::V1, FunctionRole::V2, FunctionRole::Other] {
        let f = WorstCaseFunction::new(role, 8, 1.0, 100.0, 16).unwrap();
        for _ in 0..20 {
            let x = random_vec(&mut r, 16, 2.0);
            let fd = central_difference(|z| f.value(z), &x, 1e-5);
            assert!(relative_error(&f.gradient(&x), &fd) <= 1e-6, "{role:?}");
        }
    }
}

#[test]
fn quadratic_gradients_match_finite_differences() {
    let mut r = rng(5);
    let qs = random_quadratics(4, 5, 1.0, 50.0, &mut r).unwrap();
    for q in &qs {
        for _ in 0..5 {
            let x = random_vec(&mut r, 5, 2.0);
            let fd = central_difference(|z| q.value(z), &x, 1e-5);
            assert!(relative_error(&q.gradient(&x), &fd) <= 1e-6);
        }
    }
}

#[test]
fn worst_case_minimizer_residual_is_tail_sized() {
    let graph = build_two_star(8, 12, 4).unwrap();
    let inst = WorstCaseInstance::new(&graph, 1.0, 100.0, 64).unwrap();
    let x = inst.l2_solution();
    let q = inst.ratio();
    let residual = linalg::norm(&inst.global_gradient(&x));
    assert!(residual <= 2.0 * inst.l * q.powi(64), "{residual}");
    let exact = inst.truncated_solution();
    assert!(linalg::norm(&inst.global_gradient(&exact)) < 1e-12);
}

/// Exact expectation of the top-level batch average given the chain state
/// before the draw.
fn expected_top_level(chain: &MarkovGraphChain, params: &ConsensusParams, x: &Matrix) -> Matrix {
    let kernel = chain.kernel();
    let k = kernel.rows();
    let mut dist = vec![0.0; k];
    dist[chain.state()] = 1.0;
    let rounds = (1u64 << params.top_level()) * params.batch;
    let mut weight = vec![0.0; k];
    for _ in 0..rounds {
        dist = (0..k).map(|j| (0..k).map(|i| dist[i] * kernel[(i, j)]).sum()).collect();
        for (w, d) in weight.iter_mut().zip(&dist) {
            *w += d / rounds as f64;
        }
    }
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (s, w) in weight.iter().enumerate() {
        out.add_scaled(*w, &chain.members()[s].apply_rows(x)).unwrap();
    }
    out
}

#[test]
fn multilevel_estimator_is_unbiased_for_top_level() {
    let a = Graph::cycle(6);
    let mut b = a.clone();
    b.add_edge(0, 3).unwrap();
    let family = GraphFamily::new(vec![WeightedGraph::unit(a), WeightedGraph::unit(b)], vec![0.7, 0.3]).unwrap();
    let lmin = spectral_summary(&mean_gossip(&family).unwrap()).unwrap().lambda_min_plus;
    let kernel = lazy_resample_kernel(family.pi(), 0.8).unwrap();
    let mut chain = MarkovGraphChain::with_state(family, kernel, 4, 9, 1).unwrap();
    let params = ConsensusParams::from_step(0.02 / lmin, lmin, 1, 0).unwrap();
    assert_eq!(params.m_cap, 4);
    let x = Matrix::column(&[3.0, -1.0, 0.5, 2.0, -4.0, 1.5]);
    let mut levels = rng(10);
    let draws = 100_000;
    let mut sum = [0.0; 6];
    let mut sum_sq = [0.0; 6];
    for _ in 0..draws {
        let expected = expected_top_level(&chain, &params, &x);
        let g = mlmc_gradient(&x, &mut chain, &params, &mut levels).g;
        for i in 0..6 {
            let d = g[(i, 0)] - expected[(i, 0)];
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    for i in 0..6 {
        let mean = sum[i] / draws as f64;
        let var = sum_sq[i] / draws as f64 - mean * mean;
        let sigma = (var / draws as f64).sqrt();
        assert!(mean.abs() <= 3.0 * sigma + 1e-12, "coordinate {i}: {mean} vs 3σ = {}", 3.0 * sigma);
    }
}

#[test]
fn level_law_halves() {
    let mut r = rng(11);
    let draws = 200_000;
    let mut counts = [0u32; 6];
    for _ in 0..draws {
        let j = sample_level(&mut r) as usize;
        assert!(j >= 1);
        if j <= 5 {
            counts[j] += 1;
        }
    }
    for (j, &c) in counts.iter().enumerate().skip(1) {
        let p = 0.5f64.powi(j as i32);
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - p).abs() <= 4.0 * sigma, "level {j}");
    }
}

#[test]
fn communication_count_sums_batches() {
    let g = build_laplacian(&WeightedGraph::unit(Graph::cycle(5)));
    let s = spectral_summary(&g).unwrap();
    let params = derive_consensus_params(s.lambda_max, s.lambda_min_plus, 0.0, 1, 3, 0).unwrap();
    let mut source = StaticSource::new(g);
    let mut r = rng(12);
    let mut state = ConsensusState::from_vector(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let mut expected = 0u64;
    for _ in 0..200 {
        let level = consensus_step(&mut state, &mut source, &params, &mut r);
        expected += (1u64 << level) * params.batch;
    }
    assert_eq!(state.comms, expected);
}

#[test]
fn plain_gossip_contracts_at_spectral_rate() {
    let mut r = rng(13);
    let g = random_connected(12, 0.2, &mut r);
    let w = build_laplacian(&WeightedGraph::unit(g));
    let s = spectral_summary(&w).unwrap();
    let factor = 1.0 - s.lambda_min_plus / s.lambda_max;
    let x0 = Matrix::column(&random_vec(&mut r, 12, 5.0));
    let trace = plain_gossip(&x0, &mut StaticSource::new(w), s.lambda_max, 100).unwrap();
    for pair in trace.windows(2) {
        assert!(pair[1].sqrt() <= factor * pair[0].sqrt() * (1.0 + 1e-12) + 1e-14);
    }
    let fixed = Matrix::column(&[2.5; 12]);
    let mut source = StaticSource::new(build_laplacian(&WeightedGraph::unit(Graph::path(12))));
    assert!(plain_gossip(&fixed, &mut source, 4.0, 10).unwrap().iter().all(|&d| d == 0.0));
}

#[test]
fn gossip_conserves_the_mean() {
    let mut r = rng(14);
    let w = build_laplacian(&random_weights(random_connected(9, 0.3, &mut r), 0.2, 2.0, &mut r));
    let lmax = w.eigenvalues()[8];
    let x0 = random_vec(&mut r, 9, 4.0);
    let mean0 = linalg::mean(&x0);
    let mut x = x0.clone();
    for _ in 0..50 {
        let wx = w.apply(&x);
        x.iter_mut().zip(&wx).for_each(|(v, g)| *v -= g / lmax);
        assert!((linalg::mean(&x) - mean0).abs() < 1e-12 * (1.0 + mean0.abs()));
    }
}

fn complete_source(n: usize) -> (StaticSource, ConsensusParams) {
    let w = build_laplacian(&WeightedGraph::unit(Graph::complete(n)));
    let s = spectral_summary(&w).unwrap();
    let inner = derive_consensus_params(s.lambda_max, s.lambda_min_plus, 0.0, 1, 1, 0).unwrap();
    (StaticSource::new(w), inner)
}

#[test]
fn centered_quadratics_reach_the_mean() {
    let mut r = rng(15);
    let centers: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut r, 3, 5.0)).collect();
    let objs: Vec<Quadratic> = centers.iter().map(|c| Quadratic::centered(c)).collect();
    let mean: Vec<f64> = (0..3).map(|k| centers.iter().map(|c| c[k]).sum::<f64>() / 6.0).collect();
    let f_star = global_value(&objs, &mean);
    let (mut source, inner) = complete_source(6);
    let params = DecoptParams {
        gamma: 1.0,
        eta: 0.0,
        outer: 30,
        inner: 60,
    };
    let (states, trace) = run_decopt(&objs, &mut source, &params, &inner, &[0.0; 3], f_star, &mut r).unwrap();
    assert!(trace.last().unwrap().gap <= 1e-6);
    assert!(linalg::dist_sq(&states.mean_x(), &mean) < 1e-10);
}

#[test]
fn fixed_point_at_common_minimizer() {
    let c = [1.0, -2.0];
    let objs = vec![Quadratic::centered(&c); 4];
    let (mut source, inner) = complete_source(4);
    let params = DecoptParams {
        gamma: 1.0,
        eta: 0.5,
        outer: 1,
        inner: 5,
    };
    let mut states = NodeStates::replicated(4, &c);
    outer_step(&mut states, &objs, &params, &inner, &mut source, &mut rng(16)).unwrap();
    assert_eq!(states, NodeStates::replicated(4, &c));
}

#[test]
fn iteration_budget_on_condition_hundred() {
    let mut r = rng(17);
    let objs = random_quadratics(8, 6, 1.0, 100.0, &mut r).unwrap();
    let x0 = vec![0.0; 6];
    let x_star = centralized_minimizer(&objs, &x0, 1.0, 100.0, 1e-12).unwrap();
    let f_star = global_value(&objs, &x_star);
    let c0 = global_value(&objs, &x0) - f_star;
    let eps = 1e-6;
    let (mut source, inner) = complete_source(8);
    let chain = ChainConstants {
        tau: 1,
        chi: 1.0,
        rho: 0.0,
        lambda_min: 8.0,
    };
    let mut params = derive_outer_params(1.0, 100.0, eps, c0, &chain, 4.0).unwrap();
    params.outer *= 3;
    let (_, trace) = run_decopt(&objs, &mut source, &params, &inner, &x0, f_star, &mut r).unwrap();
    let reached = trace.iter().position(|row| row.gap <= eps).expect("reaches epsilon");
    let budget = 3.0 * 10.0 * (c0 / eps).ln();
    assert!((reached as f64) <= budget, "{reached} > {budget}");
}

#[test]
fn consensus_error_shrinks_with_inner_iterations() {
    let mut r = rng(18);
    let objs = random_quadratics(8, 3, 1.0, 20.0, &mut r).unwrap();
    let w = build_laplacian(&WeightedGraph::unit(Graph::cycle(8)));
    let s = spectral_summary(&w).unwrap();
    let inner = derive_consensus_params(s.lambda_max, s.lambda_min_plus, 0.0, 1, 1, 0).unwrap();
    let mut last = f64::INFINITY;
    for t in [5usize, 10, 20, 40] {
        let params = DecoptParams {
            gamma: 1.0 / 20.0,
            eta: 0.0,
            outer: 20,
            inner: t,
        };
        let mut source = StaticSource::new(w.clone());
        let (states, _) = run_decopt(&objs, &mut source, &params, &inner, &[0.0; 3], 0.0, &mut rng(19)).unwrap();
        let err = states.consensus_error();
        assert!(err < last, "T = {t}: {err} ≥ {last}");
        last = err;
    }
}

#[test]
fn mean_matrix_of_family_is_weighted_average() {
    let a = WeightedGraph::unit(Graph::path(5));
    let b = WeightedGraph::unit(Graph::cycle(5));
    let family = GraphFamily::new(vec![a.clone(), b.clone()], vec![0.25, 0.75]).unwrap();
    let w = mean_gossip(&family).unwrap();
    let la: &GossipMatrix = &build_laplacian(&a);
    let lb = build_laplacian(&b);
    for i in 0..5 {
        for j in 0..5 {
            let v = 0.25 * la.matrix()[(i, j)] + 0.75 * lb.matrix()[(i, j)];
            assert!((w.matrix()[(i, j)] - v).abs() < 1e-15);
        }
    }
}
