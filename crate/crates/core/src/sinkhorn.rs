//! Balanced entropic optimal transport as a two-block problem.
//!
//! Plans are stored row-major; `A1` takes row sums and `A2` column sums. The
//! reference measure is the product `b1 (x) b2`.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::blocklp::{primal_from_dual, BlockProblem, DualState};
use crate::error::{check_len, domain, Result};
use crate::numerics::{linf_norm, log_sum_exp_iter};

#[derive(Debug, Clone, PartialEq)]
pub struct OTProblem {
    m1: usize,
    m2: usize,
    cost: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    gamma: f64,
    z: Vec<f64>,
    log_b1: Vec<f64>,
    log_b2: Vec<f64>,
    log_gibbs: Vec<f64>,
}

/// JSON shape `{"cost": [[..]], "b1": [..], "b2": [..], "gamma": x}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OTInput {
    pub cost: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

pub(crate) fn check_probability(name: &str, b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(domain(format!("{name} is empty")));
    }
    if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(domain(format!("{name}[{i}] = {v} must be positive")));
    }
    let s: f64 = b.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(domain(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

impl OTProblem {
    pub fn new(cost: Vec<Vec<f64>>, b1: Vec<f64>, b2: Vec<f64>, gamma: f64) -> Result<Self> {
        check_probability("b1", &b1)?;
        check_probability("b2", &b2)?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(domain(format!("gamma must be positive, got {gamma}")));
        }
        let (m1, m2) = (b1.len(), b2.len());
        check_len(m1, cost.len())?;
        let mut flat = Vec::with_capacity(m1 * m2);
        for row in &cost {
            check_len(m2, row.len())?;
            flat.extend_from_slice(row);
        }
        if let Some(c) = flat.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(domain(format!("cost entry {c} must be finite and nonnegative")));
        }
        let log_b1: Vec<f64> = b1.iter().map(|b| b.ln()).collect();
        let log_b2: Vec<f64> = b2.iter().map(|b| b.ln()).collect();
        let mut z = Vec::with_capacity(m1 * m2);
        let mut log_gibbs = Vec::with_capacity(m1 * m2);
        for i in 0..m1 {
            for j in 0..m2 {
                z.push(b1[i] * b2[j]);
                log_gibbs.push(log_b1[i] + log_b2[j] - flat[i * m2 + j] / gamma);
            }
        }
        Ok(Self { m1, m2, cost: flat, b1, b2, gamma, z, log_b1, log_b2, log_gibbs })
    }

    pub fn from_input(input: OTInput, gamma: f64) -> Result<Self> {
        Self::new(input.cost, input.b1, input.b2, gamma)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.cost_matrix(), self.b1.clone(), self.b2.clone(), gamma)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.m2 + j]
    }

    pub fn cost_matrix(&self) -> Vec<Vec<f64>> {
        self.cost.chunks(self.m2).map(|r| r.to_vec()).collect()
    }

    /// `Psi1(u2)_i = -gamma log sum_j b2_j exp((u2_j - C_ij) / gamma)`.
    pub fn soft_c_transform_1(&self, u2: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m2, u2.len())?;
        let g = self.gamma;
        Ok((0..self.m1)
            .map(|i| {
                let terms = (0..self.m2).map(|j| u2[j] - self.c(i, j) + g * self.log_b2[j]);
                -log_sum_exp_iter(g, terms).expect("m2 > 0")
            })
            .collect())
    }

    /// Column counterpart of [`soft_c_transform_1`](Self::soft_c_transform_1).
    pub fn soft_c_transform_2(&self, u1: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m1, u1.len())?;
        let g = self.gamma;
        Ok((0..self.m2)
            .map(|j| {
                let terms = (0..self.m1).map(|i| u1[i] - self.c(i, j) + g * self.log_b1[i]);
                -log_sum_exp_iter(g, terms).expect("m1 > 0")
            })
            .collect())
    }

    pub fn plan_from_duals(&self, u: &DualState) -> Result<Vec<Vec<f64>>> {
        let x = primal_from_dual(self, u)?;
        Ok(x.chunks(self.m2).map(|r| r.to_vec()).collect())
    }

    /// `<C, P>` for a plan in row-major rows.
    pub fn transport_cost(&self, plan: &[Vec<f64>]) -> f64 {
        plan.iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, p)| (i, j, p)))
            .map(|(i, j, p)| self.c(i, j) * p)
            .sum()
    }

    pub fn cost_sup(&self) -> f64 {
        linf_norm(&self.cost)
    }

    pub fn min_marginal(&self) -> f64 {
        self.b1.iter().chain(&self.b2).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Closed-form constants of the transport split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtConstants {
    pub h_gamma: f64,
    pub kappa: f64,
    pub u_gamma: f64,
    pub x_gamma: f64,
}

/// With `tight`, `U = |C|_inf / 2` replaces the generic radius.
pub fn ot_constants(problem: &OTProblem, tight: bool) -> OtConstants {
    let c = problem.cost_sup();
    let log_min = problem.min_marginal().ln().abs();
    let g = problem.gamma;
    OtConstants {
        h_gamma: log_min + 2.0 * c / g,
        kappa: 1.0,
        u_gamma: if tight { c / 2.0 } else { 4.0 * c + 2.0 * g * log_min },
        x_gamma: 1.0,
    }
}

impl BlockProblem for OTProblem {
    fn dim_primal(&self) -> usize {
        self.m1 * self.m2
    }
    fn dims_dual(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }
    fn apply_a1(&self, x: &[f64]) -> Vec<f64> {
        x.chunks(self.m2).map(|r| r.iter().sum()).collect()
    }
    fn apply_a2(&self, x: &[f64]) -> Vec<f64> {
        let mut col = vec![0.0; self.m2];
        for r in x.chunks(self.m2) {
            for (c, v) in col.iter_mut().zip(r) {
                *c += v;
            }
        }
        col
    }
    fn apply_a1_adjoint(&self, u1: &[f64]) -> Vec<f64> {
        u1.iter().flat_map(|&u| std::iter::repeat_n(u, self.m2)).collect()
    }
    fn apply_a2_adjoint(&self, u2: &[f64]) -> Vec<f64> {
        (0..self.m1).flat_map(|_| u2.iter().copied()).collect()
    }
    fn b1(&self) -> &[f64] {
        &self.b1
    }
    fn b2(&self) -> &[f64] {
        &self.b2
    }
    fn cost(&self) -> &[f64] {
        &self.cost
    }
    fn reference(&self) -> &[f64] {
        &self.z
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn block_update_1(&self, u2: &[f64]) -> Result<Vec<f64>> {
        self.soft_c_transform_1(u2)
    }
    fn block_update_2(&self, u1: &[f64]) -> Result<Vec<f64>> {
        self.soft_c_transform_2(u1)
    }
    fn log_gibbs(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.log_gibbs)
    }
    fn operator_norm_1to1(&self) -> f64 {
        2.0
    }
}
