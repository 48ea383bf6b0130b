//! Chain-structured quadratics placed on the marked leaves. Coordinates are
//! truncated to `m_max`; index `k` in the docs is 1-based, slice index `k-1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::two_star::{Mark, TwoStarGraph};
use crate::decopt::LocalObjective;
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionRole {
    V1,
    V2,
    Other,
}

impl From<Mark> for FunctionRole {
    fn from(m: Mark) -> Self {
        match m {
            Mark::V1 => FunctionRole::V1,
            Mark::V2 => FunctionRole::V2,
            Mark::Unmarked => FunctionRole::Other,
        }
    }
}

/// Local function of one vertex:
///
/// * first set: `μ/(2n)‖x‖² + (L−μ)/(4|V2|) Σ (x_{2k−1} − x_{2k})²`
/// * second set: `μ/(2n)‖x‖² + (L−μ)/(4|V1|) [(x_1 − 1)² + Σ (x_{2k} − x_{2k+1})²]`
/// * other vertices: `μ/(2n)‖x‖²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseFunction {
    pub role: FunctionRole,
    pub n_param: usize,
    pub mu: f64,
    pub l: f64,
    pub m_max: usize,
    pub v1: usize,
    pub v2: usize,
}

fn check_constants(n: usize, mu: f64, l: f64, m_max: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n", "must be at least 2"));
    }
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(Error::param("mu", format!("need 0 < mu ≤ L, got {mu}, {l}")));
    }
    if m_max < 4 || !m_max.is_multiple_of(2) {
        return Err(Error::param("m_max", "must be even and at least 4"));
    }
    Ok(())
}

impl WorstCaseFunction {
    /// Marked sets of size `floor(n/2)`.
    pub fn new(role: FunctionRole, n: usize, mu: f64, l: f64, m_max: usize) -> Result<Self> {
        check_constants(n, mu, l, m_max)?;
        Ok(WorstCaseFunction {
            role,
            n_param: n,
            mu,
            l,
            m_max,
            v1: n / 2,
            v2: n / 2,
        })
    }

    fn base(&self) -> f64 {
        self.mu / (2.0 * self.n_param as f64)
    }

    fn chain_coef(&self) -> f64 {
        match self.role {
            FunctionRole::V1 => (self.l - self.mu) / (4.0 * self.v2 as f64),
            FunctionRole::V2 => (self.l - self.mu) / (4.0 * self.v1 as f64),
            FunctionRole::Other => 0.0,
        }
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.m_max {
            return Err(Error::DimensionMismatch {
                expected: self.m_max,
                found: x.len(),
            });
        }
        let base = self.base();
        let mut value = base * linalg::norm_sq(x);
        let mut grad: Vec<f64> = x.iter().map(|v| 2.0 * base * v).collect();
        let c = self.chain_coef();
        let mut pair = |i: usize, value: &mut f64| {
            let d = x[i] - x[i + 1];
            *value += c * d * d;
            grad[i] += 2.0 * c * d;
            grad[i + 1] -= 2.0 * c * d;
        };
        match self.role {
            FunctionRole::V1 => {
                for i in (0..self.m_max).step_by(2) {
                    pair(i, &mut value);
                }
            }
            FunctionRole::V2 => {
                for i in (1..self.m_max - 1).step_by(2) {
                    pair(i, &mut value);
                }
                let d = x[0] - 1.0;
                value += c * d * d;
                grad[0] += 2.0 * c * d;
            }
            FunctionRole::Other => {}
        }
        Ok((value, grad))
    }

    /// Smoothness constant `μ/n + (L−μ)/|V1|` of a marked vertex.
    pub fn local_smoothness(&self) -> f64 {
        2.0 * self.base() + 4.0 * self.chain_coef()
    }
}

impl LocalObjective for WorstCaseFunction {
    fn dim(&self) -> usize {
        self.m_max
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_grad(x).expect("dimension").0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_grad(x).expect("dimension").1
    }

    fn mu(&self) -> f64 {
        2.0 * self.base()
    }

    fn smoothness(&self) -> f64 {
        self.local_smoothness()
    }
}

/// `x*_k = q^k` with `q = (√κ − 1)/(√κ + 1)`, `k = 1..=m_max`.
pub fn closed_form_solution(kappa: f64, m_max: usize) -> Result<Vec<f64>> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::param("kappa", "must exceed 1"));
    }
    let s = libm::sqrt(kappa);
    let q = (s - 1.0) / (s + 1.0);
    let mut out = Vec::with_capacity(m_max);
    let mut v = 1.0;
    for _ in 0..m_max {
        v *= q;
        out.push(v);
    }
    Ok(out)
}

/// Functions on every vertex of the two-star graph for parameter `n`.
#[derive(Debug, Clone)]
pub struct WorstCaseInstance {
    pub n_param: usize,
    pub mu: f64,
    pub l: f64,
    pub m_max: usize,
    pub functions: Vec<WorstCaseFunction>,
}

impl WorstCaseInstance {
    pub fn new(graph: &TwoStarGraph, mu: f64, l: f64, m_max: usize) -> Result<Self> {
        let n = graph.n_param();
        let functions = graph
            .marks()
            .iter()
            .map(|&m| WorstCaseFunction::new(m.into(), n, mu, l, m_max))
            .collect::<Result<_>>()?;
        Ok(WorstCaseInstance {
            n_param: n,
            mu,
            l,
            m_max,
            functions,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.functions.len()
    }

    fn chain_scale(&self) -> f64 {
        (self.l - self.mu) / (2.0 * self.vertex_count() as f64)
    }

    /// Hessian of the average `(μ/n) I + (L−μ)/(2N) A`, with `A` tridiagonal
    /// (diagonal 2 except a final 1, off-diagonal −1).
    pub fn hessian(&self) -> Matrix {
        let m = self.m_max;
        let (d, s) = (self.mu / self.n_param as f64, self.chain_scale());
        Matrix::from_fn(m, m, |i, j| {
            if i == j {
                d + s * if i + 1 == m { 1.0 } else { 2.0 }
            } else if i.abs_diff(j) == 1 {
                -s
            } else {
                0.0
            }
        })
    }

    /// Strong convexity and smoothness of the average.
    pub fn global_constants(&self) -> (f64, f64) {
        let ev = linalg::symmetric_eigenvalues(&self.hessian()).expect("square");
        (ev[0], ev[self.m_max - 1])
    }

    /// Condition number of the untruncated average, `1 + 2n(L−μ)/(Nμ)`.
    pub fn kappa_effective(&self) -> f64 {
        1.0 + 2.0 * self.n_param as f64 * (self.l - self.mu) / (self.vertex_count() as f64 * self.mu)
    }

    pub fn ratio(&self) -> f64 {
        let s = libm::sqrt(self.kappa_effective());
        (s - 1.0) / (s + 1.0)
    }

    /// Minimizer of the untruncated average, cut to `m_max` coordinates.
    pub fn l2_solution(&self) -> Vec<f64> {
        closed_form_solution(self.kappa_effective(), self.m_max).expect("kappa above 1")
    }

    /// Exact minimizer of the truncated average.
    pub fn truncated_solution(&self) -> Vec<f64> {
        let m = self.m_max;
        let h = self.hessian();
        let mut rhs = vec![0.0; m];
        rhs[0] = self.chain_scale();
        let mut diag: Vec<f64> = (0..m).map(|i| h[(i, i)]).collect();
        let off = -self.chain_scale();
        for i in 1..m {
            let w = off / diag[i - 1];
            diag[i] -= w * off;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (rhs[i] - off * x[i + 1]) / diag[i];
        }
        x
    }

    /// Squared distance between the truncated and untruncated minimizers,
    /// including the tail beyond `m_max`.
    pub fn truncation_error(&self) -> f64 {
        let q = self.ratio();
        let tail = libm::pow(q, 2.0 * (self.m_max + 1) as f64) / (1.0 - q * q);
        linalg::dist_sq(&self.truncated_solution(), &self.l2_solution()) + tail
    }

    pub fn global_value(&self, x: &[f64]) -> f64 {
        crate::decopt::global_value(&self.functions, x)
    }

    pub fn global_gradient(&self, x: &[f64]) -> Vec<f64> {
        crate::decopt::global_gradient(&self.functions, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::two_star::phase_start;

    fn fd_check(f: &WorstCaseFunction, x: &[f64]) {
        let (_, g) = f.value_grad(x).unwrap();
        for k in 0..x.len() {
            let h = 1e-6;
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            let fd = (f.value(&a) - f.value(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "coord {k}");
        }
    }

    #[test]
    fn other_role_gradient() {
        let f = WorstCaseFunction::new(FunctionRole::Other, 4, 2.0, 10.0, 6).unwrap();
        let x = [1.0, -2.0, 0.5, 0.0, 3.0, 1.0];
        let (_, g) = f.value_grad(&x).unwrap();
        for (gi, xi) in g.iter().zip(&x) {
            assert_eq!(*gi, 0.5 * xi);
        }
    }

    #[test]
    fn second_set_at_origin() {
        let f = WorstCaseFunction::new(FunctionRole::V2, 4, 1.0, 9.0, 8).unwrap();
        let (v, g) = f.value_grad(&[0.0; 8]).unwrap();
        assert_eq!(v, 8.0 / 8.0);
        assert!(g[0] < 0.0);
        assert!(g[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn first_set_on_constant() {
        let f = WorstCaseFunction::new(FunctionRole::V1, 6, 1.0, 50.0, 8).unwrap();
        let x = [2.0; 8];
        let (_, g) = f.value_grad(&x).unwrap();
        assert!(g.iter().all(|&c| (c - 2.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn gradients_match_differences() {
        let x: Vec<f64> = (0..10).map(|i| libm::sin(i as f64 * 1.3)).collect();
        for role in [FunctionRole::V1, FunctionRole::V2, FunctionRole::Other] {
            fd_check(&WorstCaseFunction::new(role, 8, 1.0, 100.0, 10).unwrap(), &x);
        }
        assert!(WorstCaseFunction::new(FunctionRole::V1, 8, 1.0, 100.0, 7).is_err());
    }

    #[test]
    fn closed_form_at_four() {
        let x = closed_form_solution(4.0, 3).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 9.0).abs() < 1e-15);
        assert!((x[2] - 1.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_solution_zeroes_gradient() {
        let seq = phase_start(8).unwrap();
        let inst = WorstCaseInstance::new(seq.current(), 1.0, 100.0, 64).unwrap();
        let x = inst.truncated_solution();
        assert!(linalg::norm(&inst.global_gradient(&x)) < 1e-12);
        let l2 = inst.l2_solution();
        let resid = linalg::norm(&inst.global_gradient(&l2));
        assert!(resid <= 2.0 * inst.l * libm::pow(inst.ratio(), 64.0));
        assert!(inst.truncation_error() < 1e-10);
    }

    #[test]
    fn local_smoothness_formula() {
        let f = WorstCaseFunction::new(FunctionRole::V2, 8, 1.0, 100.0, 8).unwrap();
        let expect = 1.0 / 8.0 + 99.0 / 4.0;
        assert!((f.local_smoothness() - expect).abs() < 1e-12);
    }
}
