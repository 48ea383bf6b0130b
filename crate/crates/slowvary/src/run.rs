//! Executes one configured experiment and collects its outputs in memory.

use std::path::Path;

use rand::Rng;
use serde_json::{json, Value};

use slowvary_core::consensus::{
    derive_consensus_params, max_lambda, plain_gossip, run_consensus, ConsensusParams,
};
use slowvary_core::decopt::{
    centralized_minimizer, derive_outer_params, global_value, random_quadratics, run_decopt,
    ChainConstants,
};
use slowvary_core::gossip::{
    build_laplacian, gershgorin_bound, retune_chi_report, shortest_path_weighting,
    spectral_summary, GossipMatrix, SpectralSummary,
};
use slowvary_core::graph::Edge;
use slowvary_core::linalg::Matrix;
use slowvary_core::lowerbound::{
    first_nonzero_time, floor_check_decopt, floor_check_dgd, kappa_relations, retuned_period,
    FloorRun, WorstCaseInstance,
};
use slowvary_core::markov::{
    is_primitive, lazy_resample_kernel, lazy_ring_kernel, mean_gossip, mixing_diagnostic,
    rho_bound, GraphFamily, MarkovGraphChain,
};
use slowvary_core::seed::{derive, rng_for};
use slowvary_core::VERSION;

use crate::config::{
    read_family_file, resolve, ConsensusConfig, DecoptConfig, Experiment, ExperimentConfig,
    FamilyDiagnoseConfig, KernelSpec, LowerboundConfig, SpectralConfig, Weighting,
};
use crate::error::{RunError, RunResult};
use crate::graph_io::{format_graph, read_graph};
use crate::output::{fmt_f, Artifacts, CsvTable};

/// A family file with its members loaded.
#[derive(Debug, Clone)]
pub struct LoadedFamily {
    pub family: GraphFamily,
    pub kernel: Matrix,
    pub tau: u64,
}

impl LoadedFamily {
    /// Chain started from a stationary draw; rejects reducible or periodic kernels.
    pub fn chain(&self, seed: u64) -> RunResult<MarkovGraphChain> {
        if !is_primitive(&self.kernel) {
            return Err(RunError::Precondition(
                "kernel is not irreducible and aperiodic".into(),
            ));
        }
        Ok(MarkovGraphChain::new(
            self.family.clone(),
            self.kernel.clone(),
            self.tau,
            seed,
        )?)
    }
}

fn named_kernel(spec: &str, pi: &[f64]) -> RunResult<Matrix> {
    let bad = || RunError::Schema(format!("unknown kernel '{spec}'"));
    let mut parts = spec.split_whitespace();
    let name = parts.next().ok_or_else(bad)?;
    let p: f64 = parts
        .next()
        .and_then(|t| t.strip_prefix("p="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(match name {
        "lazy-uniform" => lazy_resample_kernel(pi, p)?,
        "lazy-ring" => lazy_ring_kernel(pi.len(), p)?,
        _ => return Err(bad()),
    })
}

pub fn load_family(path: &Path) -> RunResult<LoadedFamily> {
    let file = read_family_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let members = file
        .members
        .iter()
        .map(|m| read_graph(&resolve(base, m)))
        .collect::<RunResult<Vec<_>>>()?;
    if members.is_empty() {
        return Err(RunError::Schema(format!("{}: no members", path.display())));
    }
    let k = members.len();
    let pi = file.pi.unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let family = GraphFamily::new(members, pi)?;
    let kernel = match &file.kernel {
        KernelSpec::Named(s) => named_kernel(s, family.pi())?,
        KernelSpec::Matrix(rows) => {
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            Matrix::from_rows(&refs).map_err(|e| RunError::Schema(e.to_string()))?
        }
    };
    Ok(LoadedFamily {
        family,
        kernel,
        tau: file.tau,
    })
}

fn manifest(config: &ExperimentConfig, derived: Value) -> Value {
    let params = serde_json::to_value(&config.experiment)
        .ok()
        .and_then(|v| v.get("params").cloned())
        .unwrap_or(Value::Null);
    json!({
        "version": VERSION,
        "kind": config.experiment.kind(),
        "seed": config.seed,
        "params": params,
        "derived": derived,
    })
}

fn summary_json(s: &SpectralSummary) -> Value {
    json!({
        "lambda_max": s.lambda_max,
        "lambda_min_plus": s.lambda_min_plus,
        "chi": s.chi,
    })
}

fn consensus_json(p: &ConsensusParams) -> Value {
    json!({
        "gamma": p.gamma,
        "p": p.p,
        "beta": p.beta,
        "eta": p.eta,
        "theta": p.theta,
        "M": p.m_cap,
        "B": p.batch,
        "b": p.b,
        "rate": p.rate(),
    })
}

fn edge_json(e: Edge) -> Value {
    json!([e.lo, e.hi])
}

/// Runs `config` with relative paths resolved against `base`.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> RunResult<Artifacts> {
    match &config.experiment {
        Experiment::Spectral(p) => spectral(config, p, base),
        Experiment::Consensus(p) => consensus(config, p, base),
        Experiment::Decopt(p) => decopt(config, p, base),
        Experiment::Lowerbound(p) => lowerbound(config, p),
        Experiment::FamilyDiagnose(p) => family_diagnose(config, p, base),
    }
}

fn spectral(config: &ExperimentConfig, p: &SpectralConfig, base: &Path) -> RunResult<Artifacts> {
    let mut g = read_graph(&resolve(base, &p.graph))?;
    if p.weighting == Weighting::ShortestPath {
        g = shortest_path_weighting(g.graph())?;
    }
    let mut retune = Value::Null;
    if let Some(target) = p.retune_chi {
        let r = retune_chi_report(&g, target)?;
        retune = json!({
            "edge": r.edge.map(edge_json),
            "factor": r.factor,
            "chi": r.chi,
        });
        g = r.graph;
    }
    let w = build_laplacian(&g);
    let ev = w.eigenvalues();
    let s = spectral_summary(&w)?;
    let mut table = CsvTable::new(&["index", "eigenvalue"]);
    for (i, v) in ev.iter().enumerate() {
        table.push(vec![i.to_string(), fmt_f(*v)]);
    }
    let mut out = Artifacts::default();
    out.csv("spectrum.csv", table);
    out.text("weighted.graph", format_graph(&g));
    let derived = json!({
        "n": g.n(),
        "edges": g.graph().edge_count(),
        "diameter": g.graph().diameter(),
        "gershgorin_bound": gershgorin_bound(&g),
        "spectrum": summary_json(&s),
        "retune": retune,
    });
    out.json("manifest.json", manifest(config, derived));
    Ok(out)
}

fn initial_values(config: &ExperimentConfig, n: usize, dim: usize, given: &Option<Vec<f64>>) -> RunResult<Matrix> {
    if let Some(v) = given {
        if dim != 1 || v.len() != n {
            return Err(RunError::Precondition(format!(
                "x0 must list {n} values for a one-dimensional payload"
            )));
        }
        return Ok(Matrix::column(v));
    }
    let mut rng = rng_for(config.seed, "x0");
    Ok(Matrix::from_fn(n, dim, |_, _| rng.gen_range(-1.0..1.0)))
}

struct FamilyConstants {
    mean: GossipMatrix,
    summary: SpectralSummary,
    rho: f64,
    lambda_max_members: f64,
}

fn family_constants(lf: &LoadedFamily) -> RunResult<FamilyConstants> {
    let mean = mean_gossip(&lf.family)?;
    let summary = spectral_summary(&mean)?;
    let rho = rho_bound(&lf.family)?;
    let lambda_max_members = lf
        .family
        .laplacians()
        .iter()
        .map(|w| w.eigenvalues().last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max);
    Ok(FamilyConstants {
        mean,
        summary,
        rho,
        lambda_max_members,
    })
}

fn consensus(config: &ExperimentConfig, p: &ConsensusConfig, base: &Path) -> RunResult<Artifacts> {
    let lf = load_family(&resolve(base, &p.family))?;
    let mut chain = lf.chain(derive(config.seed, "chain"))?;
    let fc = family_constants(&lf)?;
    let params = derive_consensus_params(
        fc.lambda_max_members,
        fc.summary.lambda_min_plus,
        fc.rho,
        lf.tau,
        p.b,
        p.iterations,
    )?;
    if p.dim == 0 {
        return Err(RunError::Precondition("dim must be positive".into()));
    }
    let x0 = initial_values(config, lf.family.n(), p.dim, &p.x0)?;
    let mut levels = rng_for(config.seed, "levels");
    let (state, trace) = run_consensus(&x0, &mut chain, &fc.mean, &params, &mut levels)?;
    let mut table = CsvTable::new(&["k", "T", "dist2", "r_gap", "potential"]);
    for r in &trace {
        table.push(vec![
            r.k.to_string(),
            r.comms.to_string(),
            fmt_f(r.dist2),
            fmt_f(r.r_gap),
            fmt_f(r.potential),
        ]);
    }
    let mut out = Artifacts::default();
    out.csv("trace.csv", table);
    if p.gossip_rounds > 0 {
        let mut baseline = lf.chain(derive(config.seed, "gossip-chain"))?;
        let dist = plain_gossip(&x0, &mut baseline, fc.lambda_max_members, p.gossip_rounds)?;
        let mut table = CsvTable::new(&["round", "dist2"]);
        for (i, d) in dist.iter().enumerate() {
            table.push(vec![i.to_string(), fmt_f(*d)]);
        }
        out.csv("gossip.csv", table);
    }
    let derived = json!({
        "n": lf.family.n(),
        "members": lf.family.len(),
        "tau": lf.tau,
        "mean_spectrum": summary_json(&fc.summary),
        "lambda_max_members": fc.lambda_max_members,
        "rho": fc.rho,
        "consensus": consensus_json(&params),
        "communications": state.comms,
    });
    out.json("manifest.json", manifest(config, derived));
    Ok(out)
}

fn decopt(config: &ExperimentConfig, p: &DecoptConfig, base: &Path) -> RunResult<Artifacts> {
    let lf = load_family(&resolve(base, &p.family))?;
    let n = lf.family.n();
    let mut chain = lf.chain(derive(config.seed, "chain"))?;
    let mut rng = rng_for(config.seed, "objectives");
    let objectives = random_quadratics(n, p.dim, p.mu, p.l, &mut rng)?;
    let x0 = vec![0.0; p.dim];
    let x_star = centralized_minimizer(&objectives, &x0, p.mu, p.l, 1e-12)?;
    let f_star = global_value(&objectives, &x_star);
    let c0 = global_value(&objectives, &x0) - f_star;
    let (constants, inner, mean) = if n == 1 {
        let c = ChainConstants {
            tau: lf.tau,
            chi: 1.0,
            rho: 0.0,
            lambda_min: 1.0,
        };
        (c, ConsensusParams::from_step(1.0, 1.0, 1, 0)?, Value::Null)
    } else {
        let fc = family_constants(&lf)?;
        let c = ChainConstants {
            tau: lf.tau,
            chi: fc.summary.chi,
            rho: fc.rho,
            lambda_min: fc.summary.lambda_min_plus,
        };
        let inner = derive_consensus_params(
            fc.lambda_max_members,
            fc.summary.lambda_min_plus,
            fc.rho,
            lf.tau,
            p.b.unwrap_or(lf.tau),
            0,
        )?;
        let mean = json!({
            "mean_spectrum": summary_json(&fc.summary),
            "lambda_max_members": fc.lambda_max_members,
            "rho": fc.rho,
        });
        (c, inner, mean)
    };
    let mut params = derive_outer_params(p.mu, p.l, p.epsilon, c0, &constants, p.c_t)?;
    if let Some(t) = p.inner {
        params.inner = t.max(1);
    }
    if let Some(k) = p.outer {
        params.outer = k;
    }
    let mut levels = rng_for(config.seed, "levels");
    let (_, trace) = run_decopt(&objectives, &mut chain, &params, &inner, &x0, f_star, &mut levels)?;
    let mut table = CsvTable::new(&["k", "comms", "gap", "consensus_err"]);
    for r in &trace {
        table.push(vec![
            r.k.to_string(),
            r.comms.to_string(),
            fmt_f(r.gap),
            fmt_f(r.consensus_err),
        ]);
    }
    let mut out = Artifacts::default();
    out.csv("trace.csv", table);
    let derived = json!({
        "n": n,
        "tau": lf.tau,
        "gamma": params.gamma,
        "eta": params.eta,
        "N": params.outer,
        "T": params.inner,
        "f_star": f_star,
        "c0": c0,
        "family": mean,
        "consensus": consensus_json(&inner),
    });
    out.json("manifest.json", manifest(config, derived));
    Ok(out)
}

fn floor_table(run: &FloorRun) -> CsvTable {
    let mut table = CsvTable::new(&["k", "dist2", "floor"]);
    for r in &run.rows {
        table.push(vec![r.k.to_string(), fmt_f(r.dist2), fmt_f(r.floor)]);
    }
    table
}

fn floor_json(run: &FloorRun) -> Value {
    json!({
        "rows": run.rows.len(),
        "checked": run.checked(),
        "violations": run.violations().len(),
    })
}

fn lowerbound(config: &ExperimentConfig, p: &LowerboundConfig) -> RunResult<Artifacts> {
    let period = retuned_period(p.n, p.chi_floor)?;
    let instance = WorstCaseInstance::new(&period.graphs[0], p.mu, p.l, p.m_max)?;
    let mut out = Artifacts::default();

    let mut steps = Vec::new();
    for (i, (w, rec)) in period.weighted.iter().zip(&period.records).enumerate() {
        out.text(format!("sequence/step_{i:04}.graph"), format_graph(w));
        let g = &period.graphs[i];
        steps.push(json!({
            "step": i,
            "phase": if i < period.t { 1 } else { 2 },
            "a": g.a(),
            "b": g.b(),
            "chi": period.chi_after[i],
            "removed_next": edge_json(rec.removed),
            "added_next": edge_json(rec.added),
        }));
    }
    out.json(
        "sequence/manifest.json",
        json!({
            "n": p.n,
            "t": period.t,
            "period": 2 * period.t,
            "chi_target": period.chi_target,
            "steps": steps,
        }),
    );

    let mut span = CsvTable::new(&["m", "comm_rounds", "l_m", "bound", "slack"]);
    for m in 1..=p.span_coordinates.min(p.m_max) {
        let horizon = 4 * m * (2 * period.t + 4);
        let r = first_nonzero_time(p.n, m, p.m_max, horizon)?;
        span.push(vec![
            m.to_string(),
            r.comm_rounds.to_string(),
            r.l_m.to_string(),
            r.bound.to_string(),
            r.slack().to_string(),
        ]);
    }
    out.csv("span.csv", span);

    let mean = {
        let fam = GraphFamily::uniform(period.weighted.clone())?;
        mean_gossip(&fam)?
    };
    let mean_summary = spectral_summary(&mean)?;
    let lambda_max = max_lambda(&period.source());
    let inner = derive_consensus_params(lambda_max, mean_summary.lambda_min_plus, 0.0, 1, 1, p.inner)?;
    let (mu_f, l_f) = instance.global_constants();
    let outer = slowvary_core::decopt::DecoptParams {
        gamma: 1.0 / l_f,
        eta: slowvary_core::decopt::momentum(mu_f, l_f),
        outer: p.outer,
        inner: p.inner.max(1),
    };
    let mut levels = rng_for(config.seed, "levels");
    let acc = floor_check_decopt(&period, p.mu, p.l, p.m_max, &outer, &inner, &mut levels)?;
    let dgd = floor_check_dgd(&period, p.mu, p.l, p.m_max, p.dgd_rounds)?;
    out.csv("floor_decopt.csv", floor_table(&acc));
    out.csv("floor_dgd.csv", floor_table(&dgd));

    let kappa = kappa_relations(p.mu, p.l, p.n)?;
    let chi_min = period.chi_before.iter().copied().fold(f64::INFINITY, f64::min);
    let chi_max = period.chi_before.iter().copied().fold(0.0, f64::max);
    let derived = json!({
        "t": period.t,
        "period": 2 * period.t,
        "vertices": instance.vertex_count(),
        "chi_target": period.chi_target,
        "chi_shortest_path_range": [chi_min, chi_max],
        "chi_max_relative_error": period.max_relative_chi_error(),
        "global_mu": mu_f,
        "global_L": l_f,
        "kappa_effective": instance.kappa_effective(),
        "ratio_q": instance.ratio(),
        "kappa_local": kappa.kappa_l,
        "kappa_global": kappa.kappa_g,
        "dist0": acc.dist0,
        "truncation_error": acc.truncation_error,
        "consensus": consensus_json(&inner),
        "floor_decopt": floor_json(&acc),
        "floor_dgd": floor_json(&dgd),
    });
    out.json("manifest.json", manifest(config, derived));
    Ok(out)
}

fn family_diagnose(config: &ExperimentConfig, p: &FamilyDiagnoseConfig, base: &Path) -> RunResult<Artifacts> {
    let lf = load_family(&resolve(base, &p.family))?;
    let primitive = is_primitive(&lf.kernel);
    let chain = MarkovGraphChain::new(
        lf.family.clone(),
        lf.kernel.clone(),
        lf.tau,
        derive(config.seed, "chain"),
    )?;
    let mut table = CsvTable::new(&["m", "delta", "bound", "consistent"]);
    for &m in &p.steps {
        let r = mixing_diagnostic(&chain, m)?;
        table.push(vec![
            m.to_string(),
            fmt_f(r.delta),
            fmt_f(r.bound),
            r.consistent.to_string(),
        ]);
    }
    let fc = family_constants(&lf)?;
    let member_chi: Vec<Value> = lf
        .family
        .laplacians()
        .iter()
        .map(|w| spectral_summary(w).map(|s| json!(s.chi)).unwrap_or(Value::Null))
        .collect();
    let mut out = Artifacts::default();
    out.csv("mixing.csv", table);
    let derived = json!({
        "n": lf.family.n(),
        "members": lf.family.len(),
        "pi": lf.family.pi(),
        "tau": lf.tau,
        "primitive": primitive,
        "mean_spectrum": summary_json(&fc.summary),
        "lambda_max_members": fc.lambda_max_members,
        "rho": fc.rho,
        "member_chi": member_chi,
    });
    out.json("manifest.json", manifest(config, derived));
    Ok(out)
}
