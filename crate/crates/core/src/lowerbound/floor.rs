//! Distance floor for any first-order method on the two-star sequence, and
//! runs of concrete methods against it.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;

use super::functions::WorstCaseInstance;
use super::two_star::RetunedPeriod;
use crate::consensus::{max_lambda, ConsensusParams};
use crate::decopt::{outer_step, DecoptParams, NodeStates};
use crate::linalg::{self, Matrix};
use crate::source::GossipSource;
use crate::{Error, Result};

/// Smallest condition number the floor applies to.
pub const FLOOR_MIN_CHI: f64 = 56.0;

/// `(1 − 4√(μ/L))^{72k/(7χ) + 2} · dist0`.
pub fn theoretical_floor(k: f64, chi: f64, mu: f64, l: f64, dist0: f64) -> Result<f64> {
    if !(chi >= FLOOR_MIN_CHI) {
        return Err(Error::param("chi", format!("{chi} is below {FLOOR_MIN_CHI}")));
    }
    if !(mu > 0.0 && l > 16.0 * mu) {
        return Err(Error::param("mu", "need L > 16 mu > 0"));
    }
    if !(k >= 0.0) {
        return Err(Error::param("k", "must be non-negative"));
    }
    let base = 1.0 - 4.0 * libm::sqrt(mu / l);
    Ok(libm::pow(base, 72.0 * k / (7.0 * chi) + 2.0) * dist0)
}

/// Largest `χ₀ = 8(2n + 3) ≤ χ` with `n ≥ 2`, returned with its `n`.
pub fn chi0_below(chi: f64) -> Result<(usize, f64)> {
    if !(chi >= FLOOR_MIN_CHI) || !chi.is_finite() {
        return Err(Error::param("chi", format!("{chi} is below {FLOOR_MIN_CHI}")));
    }
    let n = (libm::floor(chi / 8.0) as usize - 3) / 2;
    Ok((n, 8.0 * (2 * n + 3) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaRelations {
    /// Local condition number from its definition.
    pub kappa_l: f64,
    /// `(n/|V1|)(κ_g − 1) + 1`.
    pub kappa_l_relation: f64,
    pub kappa_g: f64,
    /// `(κ_l − 1)/4 + 1`, a lower bound on `κ_g` when `|V1| ≥ n/4`.
    pub kappa_g_lower: f64,
}

/// Relations for marked sets of size `v1`.
pub fn kappa_local(mu: f64, l: f64, n: usize, v1: usize) -> Result<KappaRelations> {
    if !(mu > 0.0 && l >= mu) || n == 0 || v1 == 0 {
        return Err(Error::param("mu", "need 0 < mu ≤ L and positive sizes"));
    }
    let nf = n as f64;
    let kappa_g = l / mu;
    let kappa_l = ((l - mu) / v1 as f64 + mu / nf) / (mu / nf);
    Ok(KappaRelations {
        kappa_l,
        kappa_l_relation: nf / v1 as f64 * (kappa_g - 1.0) + 1.0,
        kappa_g,
        kappa_g_lower: (kappa_l - 1.0) / 4.0 + 1.0,
    })
}

/// Relations for marked sets of size `floor(n/2)`.
pub fn kappa_relations(mu: f64, l: f64, n: usize) -> Result<KappaRelations> {
    kappa_local(mu, l, n, n / 2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorRow {
    /// Communication rounds plus local steps so far.
    pub k: u64,
    /// `‖x̄ − x*‖²`.
    pub dist2: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorRun {
    pub rows: Vec<FloorRow>,
    pub chi: f64,
    pub dist0: f64,
    /// Rows are checked while the floor exceeds this truncation error.
    pub truncation_error: f64,
}

impl FloorRun {
    /// Rows inside the horizon that fall below the floor.
    pub fn violations(&self) -> Vec<FloorRow> {
        self.rows
            .iter()
            .filter(|r| r.floor > self.truncation_error && r.dist2 < r.floor)
            .copied()
            .collect()
    }

    /// Rows inside the horizon.
    pub fn checked(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.floor > self.truncation_error)
            .count()
    }
}

struct FloorSetup {
    instance: WorstCaseInstance,
    x_star: Vec<f64>,
    dist0: f64,
    trunc: f64,
    chi: f64,
    mu: f64,
    l: f64,
}

impl FloorSetup {
    fn new(period: &RetunedPeriod, mu: f64, l: f64, m_max: usize) -> Result<Self> {
        let instance = WorstCaseInstance::new(&period.graphs[0], mu, l, m_max)?;
        let x_star = instance.truncated_solution();
        let dist0 = linalg::norm_sq(&x_star);
        let trunc = instance.truncation_error();
        let setup = FloorSetup {
            instance,
            x_star,
            dist0,
            trunc,
            chi: period.chi_target,
            mu,
            l,
        };
        setup.floor(0)?;
        Ok(setup)
    }

    fn floor(&self, k: u64) -> Result<f64> {
        theoretical_floor(k as f64, self.chi, self.mu, self.l, self.dist0)
    }

    fn row(&self, k: u64, x: &Matrix) -> Result<FloorRow> {
        let mean = column_mean(x);
        Ok(FloorRow {
            k,
            dist2: linalg::dist_sq(&mean, &self.x_star),
            floor: self.floor(k)?,
        })
    }

    fn run(self, rows: Vec<FloorRow>) -> FloorRun {
        FloorRun {
            rows,
            chi: self.chi,
            dist0: self.dist0,
            truncation_error: self.trunc,
        }
    }
}

fn column_mean(x: &Matrix) -> Vec<f64> {
    let mut m = alloc::vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (a, v) in m.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= x.rows() as f64);
    m
}

/// The decentralized accelerated method from `x = 0` on the retuned period,
/// stopped once the floor drops below the truncation error or after
/// `params.outer` outer steps. A new iterate counts from the clock value at
/// which it first exists.
pub fn floor_check_decopt<R: RngCore + ?Sized>(
    period: &RetunedPeriod,
    mu: f64,
    l: f64,
    m_max: usize,
    params: &DecoptParams,
    inner: &ConsensusParams,
    rng: &mut R,
) -> Result<FloorRun> {
    let setup = FloorSetup::new(period, mu, l, m_max)?;
    let fs = &setup.instance.functions;
    let mut source = period.source();
    let mut states = NodeStates::replicated(fs.len(), &alloc::vec![0.0; m_max]);
    let mut clock = 0u64;
    let mut rows = alloc::vec![setup.row(0, &states.x)?];
    for _ in 0..params.outer {
        let comms = outer_step(&mut states, fs, params, inner, &mut source, rng)?;
        clock += comms + 1;
        let row = setup.row(clock, &states.x)?;
        rows.push(row);
        if row.floor <= setup.trunc {
            break;
        }
    }
    Ok(setup.run(rows))
}

/// Gossip plus local gradient step from `x = 0`: every round applies
/// `x ← x − W x / λ_max − ∇F(x) / L_loc` and costs one communication and
/// one local step. Stops at the horizon or after `max_rounds`.
pub fn floor_check_dgd(
    period: &RetunedPeriod,
    mu: f64,
    l: f64,
    m_max: usize,
    max_rounds: usize,
) -> Result<FloorRun> {
    let setup = FloorSetup::new(period, mu, l, m_max)?;
    let fs = &setup.instance.functions;
    let mut source = period.source();
    let lambda_max = max_lambda(&source);
    let l_loc = fs
        .iter()
        .map(|f| f.local_smoothness())
        .fold(0.0, f64::max);
    let mut x = Matrix::zeros(fs.len(), m_max);
    let mut rows = alloc::vec![setup.row(0, &x)?];
    for round in 1..=max_rounds {
        let s = source.advance();
        let wx = source.members()[s].apply_rows(&x);
        let mut next = x.clone();
        next.add_scaled(-1.0 / lambda_max, &wx)?;
        for (i, f) in fs.iter().enumerate() {
            let g = f.value_grad(x.row(i))?.1;
            for (v, gi) in next.row_mut(i).iter_mut().zip(g) {
                *v -= gi / l_loc;
            }
        }
        x = next;
        let row = setup.row(2 * round as u64, &x)?;
        rows.push(row);
        if row.floor <= setup.trunc {
            break;
        }
    }
    Ok(setup.run(rows))
}
