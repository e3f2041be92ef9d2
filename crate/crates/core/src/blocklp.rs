//! Two-block entropic linear programs solved by exact block-coordinate dual
//! ascent (cyclic KL projections).
//!
//! The primal is `min <C, x> + gamma KL(x | z)` subject to `A1 x = b1`,
//! `A2 x = b2`. Its dual objective is
//! `F(u) = <b, u> + gamma Z - gamma sum_i z_i exp(((A^T u)_i - C_i) / gamma)`
//! with `Z = sum_i z_i`, and the primal is recovered as
//! `x(u) = z exp((A^T u - C) / gamma)`.

use std::borrow::Cow;
use std::io::Write;

use serde::Serialize;

use crate::error::{check_len, domain, Error, Result};
use crate::numerics::{dot, l1_norm, variation_seminorm};

/// Log-domain values above this are reported as overflow.
pub const LOG_OVERFLOW: f64 = 700.0;

/// Operators and block maximizers of a two-block entropic LP.
pub trait BlockProblem {
    fn dim_primal(&self) -> usize;
    fn dims_dual(&self) -> (usize, usize);

    fn apply_a1(&self, x: &[f64]) -> Vec<f64>;
    fn apply_a2(&self, x: &[f64]) -> Vec<f64>;
    fn apply_a1_adjoint(&self, u1: &[f64]) -> Vec<f64>;
    fn apply_a2_adjoint(&self, u2: &[f64]) -> Vec<f64>;

    fn b1(&self) -> &[f64];
    fn b2(&self) -> &[f64];
    fn cost(&self) -> &[f64];
    fn reference(&self) -> &[f64];
    fn gamma(&self) -> f64;

    /// Exact maximizer of `F` over `u1` with `u2` fixed.
    fn block_update_1(&self, u2: &[f64]) -> Result<Vec<f64>>;
    /// Exact maximizer of `F` over `u2` with `u1` fixed.
    fn block_update_2(&self, u1: &[f64]) -> Result<Vec<f64>>;

    fn seminorm_v1(&self, u1: &[f64]) -> f64 {
        variation_seminorm(u1).unwrap_or(0.0)
    }
    fn seminorm_v2(&self, u2: &[f64]) -> f64 {
        variation_seminorm(u2).unwrap_or(0.0)
    }

    /// `log z - C / gamma`. Implementations usually cache this.
    fn log_gibbs(&self) -> Cow<'_, [f64]> {
        let g = self.gamma();
        Cow::Owned(
            self.reference()
                .iter()
                .zip(self.cost())
                .map(|(z, c)| z.ln() - c / g)
                .collect(),
        )
    }

    /// `(A^T u)_i` for the stacked dual.
    fn apply_adjoint(&self, u: &DualState) -> Vec<f64> {
        let mut a = self.apply_a1_adjoint(&u.u1);
        for (ai, bi) in a.iter_mut().zip(self.apply_a2_adjoint(&u.u2)) {
            *ai += bi;
        }
        a
    }

    /// Largest column l1 norm of the stacked operator. The default probes
    /// every coordinate vector, which is quadratic in the dimension.
    fn operator_norm_1to1(&self) -> f64 {
        probe_operator_norm(self)
    }
}

/// `max_j sum_i |A_ij|` by applying `A` to each coordinate vector.
pub fn probe_operator_norm<P: BlockProblem + ?Sized>(problem: &P) -> f64 {
    let d = problem.dim_primal();
    let mut e = vec![0.0; d];
    let mut best: f64 = 0.0;
    for j in 0..d {
        e[j] = 1.0;
        let col = l1_norm(&problem.apply_a1(&e)) + l1_norm(&problem.apply_a2(&e));
        best = best.max(col);
        e[j] = 0.0;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl DualState {
    pub fn zeros<P: BlockProblem + ?Sized>(problem: &P) -> Self {
        let (m1, m2) = problem.dims_dual();
        Self {
            u1: vec![0.0; m1],
            u2: vec![0.0; m2],
        }
    }

    fn check<P: BlockProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        let (m1, m2) = problem.dims_dual();
        check_len(m1, self.u1.len())?;
        check_len(m2, self.u2.len())?;
        if self.u1.iter().chain(&self.u2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dual state".into()));
        }
        Ok(())
    }
}

/// Gibbs kernel `z exp(-C / gamma)` with its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsKernel {
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
}

pub fn gibbs_kernel<P: BlockProblem + ?Sized>(problem: &P) -> GibbsKernel {
    let log_values = problem.log_gibbs().into_owned();
    GibbsKernel {
        values: log_values.iter().map(|l| l.exp()).collect(),
        log_values,
    }
}

/// `log x(u)`, with an overflow diagnostic.
pub fn log_primal<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<Vec<f64>> {
    u.check(problem)?;
    let g = problem.gamma();
    let mut l = problem.apply_adjoint(u);
    for (li, lg) in l.iter_mut().zip(problem.log_gibbs().iter()) {
        *li = lg + *li / g;
    }
    if let Some((entry, &log_value)) = l
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v <= LOG_OVERFLOW))
    {
        return Err(Error::Overflow { entry, log_value });
    }
    Ok(l)
}

pub fn primal_from_dual<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<Vec<f64>> {
    Ok(log_primal(problem, u)?.into_iter().map(f64::exp).collect())
}

fn objective_from_primal<P: BlockProblem + ?Sized>(problem: &P, u: &DualState, x: &[f64]) -> f64 {
    let z: f64 = problem.reference().iter().sum();
    dot(problem.b1(), &u.u1) + dot(problem.b2(), &u.u2) + problem.gamma() * (z - x.iter().sum::<f64>())
}

pub fn dual_objective<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<f64> {
    let x = primal_from_dual(problem, u)?;
    Ok(objective_from_primal(problem, u, &x))
}

fn sub(a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    a.into_iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `(A1 x(u) - b1, A2 x(u) - b2)`.
pub fn residuals<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = primal_from_dual(problem, u)?;
    Ok((
        sub(problem.apply_a1(&x), problem.b1()),
        sub(problem.apply_a2(&x), problem.b2()),
    ))
}

/// `u1 <- Psi1(u2)`, then `u2 <- Psi2(u1)`.
pub fn sweep<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<DualState> {
    u.check(problem)?;
    let u1 = problem.block_update_1(&u.u2)?;
    let u2 = problem.block_update_2(&u1)?;
    let next = DualState { u1, u2 };
    next.check(problem)?;
    Ok(next)
}

/// Entropic temperature and sweep count from the iteration-budget rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub gamma: f64,
    pub sweeps: u64,
}

/// `gamma = eps / (2 X0 log d)` and
/// `k = ceil(64 X U^2 |A|^2 max(X0, X) log d / eps^2)`.
pub fn plan_schedule(eps: f64, x0: f64, x: f64, u: f64, a_norm: f64, d: usize) -> Result<Schedule> {
    for (name, v) in [("eps", eps), ("X0", x0), ("X", x), ("U", u), ("A_norm", a_norm)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if d < 3 {
        return Err(domain(format!("dimension {d} < 3")));
    }
    let log_d = (d as f64).ln();
    let gamma = eps / (2.0 * x0 * log_d);
    let k = (64.0 * x * u * u * a_norm * a_norm * x0.max(x) * log_d / (eps * eps)).ceil();
    // float-to-int casts saturate
    Ok(Schedule {
        gamma,
        sweeps: (k as u64).max(1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    MaxSweeps(usize),
    /// Stop once `|r1|_1 <= tol` at the start of a sweep.
    ResidualTol { tol: f64, max_sweeps: usize },
    /// Run exactly the planned number of sweeps. The problem must already use
    /// the planned `gamma`.
    Budget(Schedule),
}

/// Per-sweep record. Record `k` describes `u^(k)`; `res2_l1` is measured at
/// the preceding half-step `(u1^(k), u2^(k-1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    #[serde(rename = "F_gamma")]
    pub f_gamma: f64,
    pub res1_l1: f64,
    pub res2_l1: f64,
    /// `max(|x^(k-1/2)|_1, |x^(k)|_1)`.
    pub primal_mass: f64,
    pub u1_seminorm: f64,
    pub u2_seminorm: f64,
    #[serde(skip)]
    pub f_half: Option<f64>,
    /// `|A1 x - b1|_1 / max(|b1|_1, |x|_1)` at the half-step.
    #[serde(skip)]
    pub foc1_rel: Option<f64>,
    /// `|A2 x - b2|_1 / max(|b2|_1, |x|_1)` at `u^(k)`.
    #[serde(skip)]
    pub foc2_rel: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "k,F_gamma,res1_l1,res2_l1,primal_mass,u1_seminorm,u2_seminorm";

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_primal_mass(&self) -> f64 {
        self.records.iter().map(|r| r.primal_mass).fold(0.0, f64::max)
    }

    pub fn max_seminorm(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.u1_seminorm.max(r.u2_seminorm))
            .fold(0.0, f64::max)
    }

    /// Largest decrease of `F` between consecutive records, 0 if monotone.
    pub fn max_descent(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].f_gamma - w[1].f_gamma)
            .fold(0.0, f64::max)
    }

    /// Largest first-order residual over all recorded half-steps.
    pub fn max_foc_rel(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| [r.foc1_rel, r.foc2_rel])
            .flatten()
            .fold(0.0, f64::max)
    }

    /// CSV with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| domain(format!("trace write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(io)?;
        }
        if self.records.is_empty() {
            w.write_record(TRACE_HEADER.split(',')).map_err(io)?;
        }
        w.flush().map_err(|e| domain(format!("trace write failed: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: DualState,
    pub trace: ConvergenceTrace,
}

impl Solution {
    pub fn sweeps(&self) -> usize {
        self.trace.last().map_or(0, |r| r.k)
    }
}

/// A failure mid-run, keeping everything computed up to it.
#[derive(Debug, Clone)]
pub struct SolveError {
    pub error: Error,
    pub last_state: DualState,
    pub trace: ConvergenceTrace,
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} sweeps", self.error, self.trace.len().saturating_sub(1))
    }
}

impl std::error::Error for SolveError {}

struct Eval {
    x_mass: f64,
    f: f64,
    res1: f64,
    res2: f64,
    scale: f64,
}

fn evaluate<P: BlockProblem + ?Sized>(problem: &P, u: &DualState) -> Result<Eval> {
    let x = primal_from_dual(problem, u)?;
    let x_mass: f64 = x.iter().sum();
    let f = objective_from_primal(problem, u, &x);
    if !f.is_finite() {
        return Err(Error::NonFinite("dual objective".into()));
    }
    Ok(Eval {
        x_mass,
        f,
        res1: l1_norm(&sub(problem.apply_a1(&x), problem.b1())),
        res2: l1_norm(&sub(problem.apply_a2(&x), problem.b2())),
        scale: x_mass,
    })
}

/// Runs the generic sweep from `u = 0`.
pub fn solve<P: BlockProblem + ?Sized>(
    problem: &P,
    stopping: StoppingRule,
) -> std::result::Result<Solution, SolveError> {
    solve_with(problem, stopping, |u| sweep(problem, u))
}

/// Runs `step` from `u = 0`, recording a trace. `step` must realize one full
/// sweep: its output satisfies `u1 = Psi1(u2_prev)` and `u2 = Psi2(u1)`.
pub fn solve_with<P, S>(
    problem: &P,
    stopping: StoppingRule,
    mut step: S,
) -> std::result::Result<Solution, SolveError>
where
    P: BlockProblem + ?Sized,
    S: FnMut(&DualState) -> Result<DualState>,
{
    let (max_sweeps, tol) = match stopping {
        StoppingRule::MaxSweeps(k) => (k, None),
        StoppingRule::ResidualTol { tol, max_sweeps } => (max_sweeps, Some(tol)),
        StoppingRule::Budget(s) => (usize::try_from(s.sweeps).unwrap_or(usize::MAX), None),
    };
    let (b1_l1, b2_l1) = (l1_norm(problem.b1()), l1_norm(problem.b2()));
    let mut u = DualState::zeros(problem);
    let mut trace = ConvergenceTrace::default();
    let fail = |error, u: &DualState, trace: &ConvergenceTrace| SolveError {
        error,
        last_state: u.clone(),
        trace: trace.clone(),
    };

    let e0 = evaluate(problem, &u).map_err(|e| fail(e, &u, &trace))?;
    trace.records.push(TraceRecord {
        k: 0,
        f_gamma: e0.f,
        res1_l1: e0.res1,
        res2_l1: e0.res2,
        primal_mass: e0.x_mass,
        u1_seminorm: problem.seminorm_v1(&u.u1),
        u2_seminorm: problem.seminorm_v2(&u.u2),
        f_half: None,
        foc1_rel: None,
        foc2_rel: None,
    });
    let mut res1 = e0.res1;

    for k in 1..=max_sweeps {
        if tol.is_some_and(|t| res1 <= t) {
            break;
        }
        let next = step(&u).map_err(|e| fail(e, &u, &trace))?;
        let half = DualState {
            u1: next.u1.clone(),
            u2: u.u2.clone(),
        };
        let eh = evaluate(problem, &half).map_err(|e| fail(e, &u, &trace))?;
        let en = evaluate(problem, &next).map_err(|e| fail(e, &u, &trace))?;
        trace.records.push(TraceRecord {
            k,
            f_gamma: en.f,
            res1_l1: en.res1,
            res2_l1: eh.res2,
            primal_mass: eh.x_mass.max(en.x_mass),
            u1_seminorm: problem.seminorm_v1(&next.u1),
            u2_seminorm: problem.seminorm_v2(&next.u2),
            f_half: Some(eh.f),
            foc1_rel: Some(eh.res1 / b1_l1.max(eh.scale)),
            foc2_rel: Some(en.res2 / b2_l1.max(en.scale)),
        });
        res1 = en.res1;
        u = next;
    }
    Ok(Solution { state: u, trace })
}
