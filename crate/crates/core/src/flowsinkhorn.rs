//! Wasserstein-1 on graphs through the lifted flow split.
//!
//! The primal variable is a pair of arc flows `x = (f, g)`, stored as `f`
//! followed by `g`. Block 1 has one row per vertex,
//! `(A1 x)_i = sum_{(i,j)} f - sum_{(k,i)} g = (b2 - b1)_i`, so at `f = g` it
//! is the divergence constraint. Block 2 has one row per arc and couples the
//! copies, `(A2 x)_a = s (f_a - g_a) = 0` with `s = +1` for
//! [`Coupling::FMinusG`] and `s = -1` for [`Coupling::GMinusF`]. The cost is
//! `(W, W)`, so the lifted LP value is twice the W1 distance.
//!
//! Three interchangeable sweeps are provided: explicit matrix projections,
//! the scaling vector `sigma = exp(v / (2 gamma))`, and a log-domain update
//! of the vertex dual `v` that stays finite for small `gamma`.

use std::borrow::Cow;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocklp::{
    dual_objective, plan_schedule, primal_from_dual, solve_with, BlockProblem, DualState,
    Schedule, Solution, SolveError, StoppingRule,
};
use crate::error::{check_len, domain, Error, Result};
use crate::graph::{EdgeFlow, Graph};
use crate::numerics::{
    arsinh_from_log, dot, kl_divergence_nonneg, l1_norm, linf_norm, log_sum_exp_iter, phi_root,
};

/// Sign convention of the arc coupling block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coupling {
    /// `f - g = 0`; translation sign `tau = -1`, sign pattern `(Id, -Id)`.
    #[default]
    FMinusG,
    /// `g - f = 0`; translation sign `tau = +1`.
    GMinusF,
}

impl Coupling {
    fn sign(self) -> f64 {
        match self {
            Coupling::FMinusG => 1.0,
            Coupling::GMinusF => -1.0,
        }
    }

    /// `tau` in `A1^T 1 + tau A2^T 1 = 0`.
    pub fn tau(self) -> f64 {
        -self.sign()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowPath {
    Matrix,
    Scaling,
    #[default]
    Stable,
}

impl FromStr for FlowPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(FlowPath::Matrix),
            "scaling" => Ok(FlowPath::Scaling),
            "stable" => Ok(FlowPath::Stable),
            other => Err(domain(format!("unknown path '{other}'"))),
        }
    }
}

impl fmt::Display for FlowPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowPath::Matrix => "matrix",
            FlowPath::Scaling => "scaling",
            FlowPath::Stable => "stable",
        })
    }
}

/// JSON shape `{"graph": {"n": .., "edges": [[i, j, w], ..]}, "b1": [..], "b2": [..], "gamma": x}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowInput {
    pub graph: Graph,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowProblem {
    graph: Graph,
    b1: Vec<f64>,
    b2: Vec<f64>,
    gamma: f64,
    coupling: Coupling,
    /// per-arc reference, shared by `f` and `g`
    z: Vec<f64>,
    /// `(b1 - b2) / 2`
    r: Vec<f64>,
    /// `W - gamma log z` per arc
    w_eff: Vec<f64>,
    rhs1: Vec<f64>,
    rhs2: Vec<f64>,
    cost: Vec<f64>,
    z_lifted: Vec<f64>,
    log_gibbs: Vec<f64>,
}

fn check_marginals(n: usize, b1: &[f64], b2: &[f64]) -> Result<()> {
    check_len(n, b1.len())?;
    check_len(n, b2.len())?;
    for (name, b) in [("b1", b1), ("b2", b2)] {
        if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain(format!("{name}[{i}] = {v} must be nonnegative")));
        }
    }
    let (s1, s2): (f64, f64) = (b1.iter().sum(), b2.iter().sum());
    if (s1 - s2).abs() > 1e-12 * s1.max(s2).max(1.0) {
        return Err(domain(format!("unbalanced marginals: {s1} vs {s2}")));
    }
    Ok(())
}

/// Mass bound `2 <W, fbar> / W_min` on the lifted unregularized optimum, from
/// the spanning-tree flow. Falls back to 1 when the marginals coincide.
pub fn reference_mass(graph: &Graph, b1: &[f64], b2: &[f64]) -> Result<f64> {
    let fbar = graph.spanning_tree_flow(b1, b2)?;
    let cost = dot(&graph.arc_weights(), &fbar);
    let x0 = 2.0 * cost / graph.min_weight();
    Ok(if x0 > 0.0 { x0 } else { 1.0 })
}

impl FlowProblem {
    /// Problem with the default constant reference `X0 / (2p)`.
    pub fn new(graph: Graph, b1: Vec<f64>, b2: Vec<f64>, gamma: f64) -> Result<Self> {
        check_marginals(graph.n(), &b1, &b2)?;
        let p = graph.num_arcs();
        if p == 0 {
            return Err(domain("flow problems need at least one edge"));
        }
        let x0 = reference_mass(&graph, &b1, &b2)?;
        let z = vec![x0 / (2 * p) as f64; p];
        Self::with_reference(graph, b1, b2, gamma, z)
    }

    pub fn from_input(input: FlowInput, gamma: f64) -> Result<Self> {
        Self::new(input.graph, input.b1, input.b2, gamma)
    }

    /// Problem with an explicit per-arc reference measure.
    pub fn with_reference(graph: Graph, b1: Vec<f64>, b2: Vec<f64>, gamma: f64, z: Vec<f64>) -> Result<Self> {
        check_marginals(graph.n(), &b1, &b2)?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(domain(format!("gamma must be positive, got {gamma}")));
        }
        let p = graph.num_arcs();
        if p == 0 {
            return Err(domain("flow problems need at least one edge"));
        }
        check_len(p, z.len())?;
        if let Some(v) = z.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(domain(format!("reference entry {v} must be positive")));
        }
        let w = graph.arc_weights();
        let w_eff: Vec<f64> = w.iter().zip(&z).map(|(w, z)| w - gamma * z.ln()).collect();
        let r = b1.iter().zip(&b2).map(|(x, y)| (x - y) / 2.0).collect();
        let rhs1 = b2.iter().zip(&b1).map(|(x, y)| x - y).collect();
        let log_gibbs: Vec<f64> = w_eff.iter().chain(&w_eff).map(|w| -w / gamma).collect();
        Ok(Self {
            b1,
            b2,
            gamma,
            coupling: Coupling::default(),
            rhs1,
            rhs2: vec![0.0; p],
            cost: w.iter().chain(&w).copied().collect(),
            z_lifted: z.iter().chain(&z).copied().collect(),
            z,
            r,
            w_eff,
            log_gibbs,
            graph,
        })
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Same instance and reference at a different temperature.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Ok(Self::with_reference(self.graph.clone(), self.b1.clone(), self.b2.clone(), gamma, self.z.clone())?
            .with_coupling(self.coupling))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn marginals(&self) -> (&[f64], &[f64]) {
        (&self.b1, &self.b2)
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn arc_reference(&self) -> &[f64] {
        &self.z
    }

    pub fn effective_weights(&self) -> &[f64] {
        &self.w_eff
    }

    /// True when `b1 = b2`, so the transport cost is zero.
    pub fn is_degenerate(&self) -> bool {
        self.r.iter().all(|&r| r == 0.0)
    }

    fn p(&self) -> usize {
        self.graph.num_arcs()
    }

    /// `log sum exp` over the arcs of `arcs`, with per-arc exponent `term(a)`.
    #[inline]
    fn lse_over(&self, arcs: &[usize], term: impl Fn(usize) -> f64 + Clone) -> f64 {
        log_sum_exp_iter(self.gamma, arcs.iter().map(move |&a| term(a))).expect("every vertex has an arc")
    }

    /// `v_i = (alpha_B - alpha_A) / 2 - gamma arsinh(r_i exp(-(alpha_A + alpha_B) / (2 gamma)))`.
    #[inline]
    fn vertex_root(&self, i: usize, alpha_a: f64, alpha_b: f64) -> f64 {
        let r = self.r[i];
        let shift = if r == 0.0 {
            0.0
        } else {
            arsinh_from_log(r < 0.0, r.abs().ln() - (alpha_a + alpha_b) / (2.0 * self.gamma))
        };
        (alpha_b - alpha_a) / 2.0 - self.gamma * shift
    }

    /// Log-domain composed sweep on the vertex dual.
    pub fn sweep_stable(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.graph.n(), v.len())?;
        let g = &self.graph;
        let w = &self.w_eff;
        let out: Vec<f64> = (0..g.n())
            .map(|i| {
                let plus = self.lse_over(g.col_arcs(i), |a| -w[a] + v[g.arc(a).0] / 2.0);
                let minus = self.lse_over(g.row_arcs(i), |a| -w[a] - v[g.arc(a).1] / 2.0);
                // alpha_A = minus - v_i/2 and alpha_B = plus + v_i/2
                self.vertex_root(i, minus - v[i] / 2.0, plus + v[i] / 2.0)
            })
            .collect();
        finite(out, "stable sweep")
    }

    /// Scaling-vector sweep `sigma_i <- sqrt(sigma_i phi(2 r_i / a_i, c_i / a_i))`
    /// with `a = K (1 / sigma)` over row arcs and `c = K^T sigma` over column arcs.
    pub fn sweep_scaling(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        check_len(self.graph.n(), sigma.len())?;
        let g = &self.graph;
        let k: Vec<f64> = self.w_eff.iter().map(|w| (-w / self.gamma).exp()).collect();
        let out: Vec<f64> = (0..g.n())
            .map(|i| {
                let a: f64 = g.row_arcs(i).iter().map(|&e| k[e] / sigma[g.arc(e).1]).sum();
                let c: f64 = g.col_arcs(i).iter().map(|&e| k[e] * sigma[g.arc(e).0]).sum();
                (sigma[i] * phi_root(2.0 * self.r[i] / a, c / a)).sqrt()
            })
            .collect();
        if let Some(i) = out.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::NonFinite(format!("scaling sweep at vertex {i}: {}", out[i])));
        }
        Ok(out)
    }

    /// KL projection of `(h, h)` onto the divergence constraint.
    pub fn project_c1(&self, h: &[f64]) -> Result<(EdgeFlow, EdgeFlow)> {
        check_len(self.p(), h.len())?;
        let g = &self.graph;
        let mut s = vec![0.0; g.n()];
        for (i, si) in s.iter_mut().enumerate() {
            let row: f64 = g.row_arcs(i).iter().map(|&a| h[a]).sum();
            let col: f64 = g.col_arcs(i).iter().map(|&a| h[a]).sum();
            if !(row > 0.0) {
                return Err(Error::DegenerateVertex(i));
            }
            *si = phi_root(2.0 * self.r[i] / row, col / row);
        }
        let mut f = Vec::with_capacity(h.len());
        let mut gg = Vec::with_capacity(h.len());
        for (a, &ha) in h.iter().enumerate() {
            let (i, j) = g.arc(a);
            f.push(s[i] * ha);
            gg.push(ha / s[j]);
        }
        Ok((EdgeFlow::new(f)?, EdgeFlow::new(gg)?))
    }

    /// One sweep in primal form, starting and ending at `f = g = h`.
    pub fn sweep_matrix(&self, h: &[f64]) -> Result<EdgeFlow> {
        let (f, g) = self.project_c1(h)?;
        let next = project_c2(&f, &g)?;
        if let Some(a) = next.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::NonFinite(format!("matrix sweep underflow on arc {a}")));
        }
        Ok(next)
    }

    /// Arc duals maximizing `F` for fixed vertex duals: `-s (v_i + v_j) / 2`.
    pub fn psi2(&self, v: &[f64]) -> Vec<f64> {
        let s = self.coupling.sign();
        (0..self.p())
            .map(|a| {
                let (i, j) = self.graph.arc(a);
                -s * (v[i] + v[j]) / 2.0
            })
            .collect()
    }

    /// Vertex duals maximizing `F` for fixed arc duals.
    pub fn psi1(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p(), u.len())?;
        let g = &self.graph;
        let out = (0..g.n()).map(|i| self.psi1_at(i, u)).collect();
        finite(out, "vertex update")
    }

    fn psi1_at(&self, i: usize, u: &[f64]) -> f64 {
        let g = &self.graph;
        let w = &self.w_eff;
        let s = self.coupling.sign();
        let alpha_a = self.lse_over(g.row_arcs(i), |a| -w[a] + s * u[a]);
        let alpha_b = self.lse_over(g.col_arcs(i), |a| -w[a] - s * u[a]);
        self.vertex_root(i, alpha_a, alpha_b)
    }

    /// Full dual state `(v, Psi2(v))`.
    pub fn dual_from_vertex(&self, v: Vec<f64>) -> DualState {
        let u2 = self.psi2(&v);
        DualState { u1: v, u2 }
    }

    /// `f = K exp((v_i - v_j) / (2 gamma))`, the flow after the coupling step.
    pub fn flow_from_vertex(&self, v: &[f64]) -> Result<EdgeFlow> {
        check_len(self.graph.n(), v.len())?;
        let f = (0..self.p())
            .map(|a| {
                let (i, j) = self.graph.arc(a);
                ((-self.w_eff[a] + (v[i] - v[j]) / 2.0) / self.gamma).exp()
            })
            .collect();
        EdgeFlow::new(f)
    }

    pub fn flow_from_scaling(&self, sigma: &[f64]) -> Result<EdgeFlow> {
        check_len(self.graph.n(), sigma.len())?;
        let f = (0..self.p())
            .map(|a| {
                let (i, j) = self.graph.arc(a);
                (-self.w_eff[a] / self.gamma).exp() * sigma[i] / sigma[j]
            })
            .collect();
        EdgeFlow::new(f)
    }

    pub fn scaling_from_vertex(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| (x / (2.0 * self.gamma)).exp()).collect()
    }

    pub fn vertex_from_scaling(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        finite(sigma.iter().map(|s| 2.0 * self.gamma * s.ln()).collect(), "scaling to vertex dual")
    }

    /// Vertex dual with `v_0 = 0` reproducing a flow of the form
    /// `K exp((v_i - v_j) / (2 gamma))`, integrated along the BFS tree.
    pub fn vertex_from_flow(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p(), h.len())?;
        let g = &self.graph;
        let mut v = vec![f64::NAN; g.n()];
        v[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            for &a in g.row_arcs(i) {
                let j = g.arc(a).1;
                if v[j].is_nan() {
                    v[j] = v[i] - 2.0 * (self.gamma * h[a].ln() + self.w_eff[a]);
                    queue.push_back(j);
                }
            }
        }
        finite(v, "flow to vertex dual")
    }

    /// Gibbs kernel per arc, the matrix path's starting point.
    pub fn kernel(&self) -> EdgeFlow {
        EdgeFlow::new(self.w_eff.iter().map(|w| (-w / self.gamma).exp()).collect())
            .expect("exp is nonnegative")
    }
}

fn finite(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} at index {i}: {}", v[i]))),
        None => Ok(v),
    }
}

/// Column sums minus row sums.
pub fn divergence(g: &Graph, f: &EdgeFlow) -> Result<Vec<f64>> {
    g.divergence(f)
}

/// KL projection onto `f = g`: the entrywise geometric mean.
pub fn project_c2(f: &EdgeFlow, g: &EdgeFlow) -> Result<EdgeFlow> {
    check_len(f.len(), g.len())?;
    EdgeFlow::new(f.iter().zip(g.iter()).map(|(a, b)| (a * b).sqrt()).collect())
}

impl BlockProblem for FlowProblem {
    fn dim_primal(&self) -> usize {
        2 * self.p()
    }
    fn dims_dual(&self) -> (usize, usize) {
        (self.graph.n(), self.p())
    }
    fn apply_a1(&self, x: &[f64]) -> Vec<f64> {
        let p = self.p();
        let (f, g) = x.split_at(p);
        (0..self.graph.n())
            .map(|i| {
                let out: f64 = self.graph.row_arcs(i).iter().map(|&a| f[a]).sum();
                let inn: f64 = self.graph.col_arcs(i).iter().map(|&a| g[a]).sum();
                out - inn
            })
            .collect()
    }
    fn apply_a2(&self, x: &[f64]) -> Vec<f64> {
        let (f, g) = x.split_at(self.p());
        let s = self.coupling.sign();
        f.iter().zip(g).map(|(a, b)| s * (a - b)).collect()
    }
    fn apply_a1_adjoint(&self, v: &[f64]) -> Vec<f64> {
        let p = self.p();
        let mut y = vec![0.0; 2 * p];
        for a in 0..p {
            let (i, j) = self.graph.arc(a);
            y[a] = v[i];
            y[p + a] = -v[j];
        }
        y
    }
    fn apply_a2_adjoint(&self, u: &[f64]) -> Vec<f64> {
        let s = self.coupling.sign();
        u.iter().map(|x| s * x).chain(u.iter().map(|x| -s * x)).collect()
    }
    // block right-hand sides, not the input marginals
    #[allow(clippy::misnamed_getters)]
    fn b1(&self) -> &[f64] {
        &self.rhs1
    }
    #[allow(clippy::misnamed_getters)]
    fn b2(&self) -> &[f64] {
        &self.rhs2
    }
    fn cost(&self) -> &[f64] {
        &self.cost
    }
    fn reference(&self) -> &[f64] {
        &self.z_lifted
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn block_update_1(&self, u2: &[f64]) -> Result<Vec<f64>> {
        self.psi1(u2)
    }
    fn block_update_2(&self, u1: &[f64]) -> Result<Vec<f64>> {
        check_len(self.graph.n(), u1.len())?;
        Ok(self.psi2(u1))
    }
    fn log_gibbs(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.log_gibbs)
    }
    fn operator_norm_1to1(&self) -> f64 {
        2.0
    }
}

/// Runs one of the three sweep paths from `v = 0` and records the generic
/// trace on the lifted problem.
pub fn solve_flow(
    problem: &FlowProblem,
    stopping: StoppingRule,
    path: FlowPath,
) -> std::result::Result<Solution, SolveError> {
    match path {
        FlowPath::Stable => solve_with(problem, stopping, |u| {
            Ok(problem.dual_from_vertex(problem.sweep_stable(&u.u1)?))
        }),
        FlowPath::Scaling => {
            let mut sigma = vec![1.0; problem.graph.n()];
            solve_with(problem, stopping, |_| {
                sigma = problem.sweep_scaling(&sigma)?;
                Ok(problem.dual_from_vertex(problem.vertex_from_scaling(&sigma)?))
            })
        }
        FlowPath::Matrix => {
            let mut h = problem.kernel();
            solve_with(problem, stopping, |u| {
                h = problem.sweep_matrix(&h)?;
                // the flow fixes v up to a constant; pin it to the block maximizer
                let mut v = problem.vertex_from_flow(&h)?;
                let shift = problem.psi1_at(0, &u.u2) - v[0];
                v.iter_mut().for_each(|x| *x += shift);
                Ok(problem.dual_from_vertex(v))
            })
        }
    }
}

/// Lifted primal and dual values at a dual state; both approximate `2 W1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W1Estimate {
    /// `<W, f> + <W, g>` at `x(u)`.
    pub primal_cost: f64,
    /// `F_gamma(u)`.
    pub dual_value: f64,
}

impl W1Estimate {
    pub fn w1_primal(&self) -> f64 {
        self.primal_cost / 2.0
    }
    pub fn w1_dual(&self) -> f64 {
        self.dual_value / 2.0
    }
}

pub fn w1_estimate(problem: &FlowProblem, state: &DualState) -> Result<W1Estimate> {
    if problem.is_degenerate() {
        return Ok(W1Estimate { primal_cost: 0.0, dual_value: 0.0 });
    }
    let x = primal_from_dual(problem, state)?;
    Ok(W1Estimate {
        primal_cost: dot(&problem.cost, &x),
        dual_value: dual_objective(problem, state)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConstants {
    pub h_gamma: f64,
    /// Mass bound `(<W, fbar> + gamma KL(fbar | z)) / W_min` on one flow copy.
    pub x_bar: f64,
    pub kappa_bound: f64,
    pub u_gamma: f64,
    /// Iterate mass bound on the lifted pair.
    pub x_gamma: f64,
}

/// A priori constants from a feasible flow `fbar`.
pub fn flow_constants(problem: &FlowProblem, fbar: &EdgeFlow) -> Result<FlowConstants> {
    let g = &problem.graph;
    let div = g.divergence(fbar)?;
    let err: f64 = div.iter().zip(&problem.r).map(|(d, r)| (d - 2.0 * r).abs()).sum();
    if err > 1e-9 * l1_norm(&problem.b1).max(1.0) {
        return Err(domain(format!("fbar is infeasible: divergence error {err:.3e}")));
    }
    let gamma = problem.gamma;
    let (w_min, w_max) = (g.min_weight(), g.max_weight());
    let w = g.arc_weights();
    let x_bar = (dot(&w, fbar) + gamma * kl_divergence_nonneg(fbar, &problem.z)?) / w_min;
    let log_z_sup = linf_norm(&problem.z.iter().map(|z| z.ln()).collect::<Vec<_>>());
    let h_gamma = x_bar.ln() + 2.0 * w_max / gamma + log_z_sup;
    let kappa_bound = 2.0 * g.hop_diameter() as f64;
    let u_gamma = 2.0 * kappa_bound * (w_max + gamma * h_gamma);
    let b_l1 = 2.0 * l1_norm(&problem.r);
    let z_total: f64 = problem.z_lifted.iter().sum();
    let x_gamma = b_l1 * u_gamma / gamma + z_total * (-w_min / gamma).exp();
    Ok(FlowConstants { h_gamma, x_bar, kappa_bound, u_gamma, x_gamma })
}

/// A schedule for accuracy `eps` on the lifted value, with its constants.
#[derive(Debug, Clone)]
pub struct FlowPlan {
    pub problem: FlowProblem,
    pub schedule: Schedule,
    pub constants: FlowConstants,
    pub x0: f64,
}

/// Builds the problem at the planned temperature for lifted accuracy `eps`.
pub fn plan_flow(graph: Graph, b1: Vec<f64>, b2: Vec<f64>, eps: f64) -> Result<FlowPlan> {
    let x0 = reference_mass(&graph, &b1, &b2)?;
    let d = 2 * graph.num_arcs();
    // gamma only depends on eps, X0 and d
    let gamma = plan_schedule(eps, x0, 1.0, 1.0, 1.0, d)?.gamma;
    let fbar = graph.spanning_tree_flow(&b1, &b2)?;
    let problem = FlowProblem::new(graph, b1, b2, gamma)?;
    let constants = flow_constants(&problem, &fbar)?;
    let schedule = plan_schedule(eps, x0, constants.x_gamma.max(f64::MIN_POSITIVE), constants.u_gamma, 2.0, d)?;
    Ok(FlowPlan { problem, schedule, constants, x0 })
}
