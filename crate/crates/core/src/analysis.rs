//! Certificates evaluated on traces, closed-form bounds, and randomized
//! structural checks of the sweep map `Psi = Psi1 o Psi2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blocklp::{primal_from_dual, solve, BlockProblem, ConvergenceTrace, DualState, StoppingRule};
use crate::error::{domain, Result};
use crate::numerics::{l1_norm, variation_seminorm};

pub const DEFAULT_SEED: u64 = 0xB7E6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCertificate {
    pub gamma: f64,
    pub x_hat: f64,
    pub u_hat: f64,
    pub a_norm: f64,
    pub envelope_bound: f64,
    pub max_k_times_gap: f64,
    pub pass: bool,
}

/// `max_k k (F* - F_k)` against `8 X U^2 |A|^2 / gamma` with the trace's own
/// largest mass and dual seminorm.
pub fn verify_rate(trace: &ConvergenceTrace, a_norm: f64, gamma: f64, f_star_ref: f64) -> RateCertificate {
    verify_rate_with(trace, a_norm, gamma, f_star_ref, trace.max_primal_mass(), trace.max_seminorm())
}

/// Same envelope with caller-supplied constants, e.g. a priori ones.
pub fn verify_rate_with(
    trace: &ConvergenceTrace,
    a_norm: f64,
    gamma: f64,
    f_star_ref: f64,
    x_hat: f64,
    u_hat: f64,
) -> RateCertificate {
    let envelope_bound = 8.0 * x_hat * u_hat * u_hat * a_norm * a_norm / gamma;
    let max_k_times_gap = trace
        .records
        .iter()
        .filter(|r| r.k >= 1)
        .map(|r| r.k as f64 * (f_star_ref - r.f_gamma))
        .fold(0.0, f64::max);
    RateCertificate {
        gamma,
        x_hat,
        u_hat,
        a_norm,
        envelope_bound,
        max_k_times_gap,
        pass: max_k_times_gap <= envelope_bound + 1e-6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AscentReport {
    /// Smallest `gain - bound` over sweeps; negative beyond the slack means failure.
    pub min_margin: f64,
    pub worst_sweep: usize,
    pub pass: bool,
}

/// Each sweep gains at least `gamma / (2 X) |r1|^2 / |A|^2`, with `X` the
/// larger recorded mass around the step.
pub fn verify_ascent(trace: &ConvergenceTrace, a_norm: f64, gamma: f64) -> AscentReport {
    let mut min_margin = f64::INFINITY;
    let mut worst_sweep = 0;
    for w in trace.records.windows(2) {
        let x_hat = w[0].primal_mass.max(w[1].primal_mass);
        let bound = gamma / (2.0 * x_hat) * w[0].res1_l1.powi(2) / (a_norm * a_norm);
        let margin = (w[1].f_gamma - w[0].f_gamma) - bound;
        if margin < min_margin {
            min_margin = margin;
            worst_sweep = w[1].k;
        }
    }
    if trace.records.len() < 2 {
        min_margin = 0.0;
    }
    AscentReport {
        min_margin,
        worst_sweep,
        pass: min_margin >= -1e-10,
    }
}

/// `F* - F_k <= 2 U |r1_k|_1 + 1e-8` on every record.
pub fn verify_gap_residual(trace: &ConvergenceTrace, f_star_ref: f64, u_hat: f64) -> bool {
    trace
        .records
        .iter()
        .all(|r| f_star_ref - r.f_gamma <= 2.0 * u_hat * r.res1_l1 + 1e-8)
}

/// `gamma X0 log d`, the entropic bias bound.
pub fn bias_bound(gamma: f64, x0_star_mass: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(domain(format!("dimension {d} < 3")));
    }
    Ok(gamma * x0_star_mass * (d as f64).ln())
}

/// `|b|_1 U / gamma + d exp(-C_min / gamma)`.
pub fn primal_bound_from_dual(gamma: f64, b_l1: f64, u_gamma: f64, d: usize, c_min: f64) -> f64 {
    b_l1 * u_gamma / gamma + d as f64 * (-c_min / gamma).exp()
}

/// `|u0| + 2 kappa (|C|_inf + gamma H)`.
pub fn dual_bound_nonexpansive(u0_seminorm: f64, kappa: f64, c_inf: f64, gamma: f64, h_gamma: f64) -> f64 {
    u0_seminorm + 2.0 * kappa * (c_inf + gamma * h_gamma)
}

/// Per-coordinate signs making `A_s diag(sigma)` entrywise nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedOrderSpec {
    pub sigma: Vec<f64>,
}

impl SignedOrderSpec {
    pub fn identity(d: usize) -> Self {
        Self { sigma: vec![1.0; d] }
    }

    /// `+1` on the first `d / 2` coordinates and `-1` on the rest.
    pub fn split(d: usize) -> Self {
        Self {
            sigma: (0..d).map(|i| if i < d / 2 { 1.0 } else { -1.0 }).collect(),
        }
    }

    /// Probes every column of both blocks.
    pub fn validate<P: BlockProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        let d = problem.dim_primal();
        if self.sigma.len() != d || self.sigma.iter().any(|s| s.abs() != 1.0) {
            return Err(domain("sigma must hold one +1/-1 entry per primal coordinate"));
        }
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = self.sigma[j];
            let bad = problem
                .apply_a1(&e)
                .into_iter()
                .chain(problem.apply_a2(&e))
                .any(|v| v < 0.0);
            e[j] = 0.0;
            if bad {
                return Err(domain(format!("A diag(sigma) has a negative entry in column {j}")));
            }
        }
        Ok(())
    }

    /// `u2 <=_sigma v2`: `sigma_i (B2^T u2)_i <= sigma_i (B2^T v2)_i`, i.e.
    /// `(A2^T u2)_i <= (A2^T v2)_i` for all `i`.
    fn le<P: BlockProblem + ?Sized>(&self, problem: &P, u2: &[f64], v2: &[f64], tol: f64) -> bool {
        let a = problem.apply_a2_adjoint(u2);
        let b = problem.apply_a2_adjoint(v2);
        a.iter().zip(&b).all(|(x, y)| x <= &(y + tol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub trial: usize,
    pub what: String,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub instance: String,
    pub seed: u64,
    pub trials: usize,
    pub violations: Vec<Violation>,
    pub pass: bool,
    /// Sampled `u2` pairs that were comparable in the signed order.
    #[serde(skip)]
    pub comparable_pairs: Option<usize>,
}

impl Report {
    fn new(check: &str, instance: &str, seed: u64, trials: usize) -> Self {
        Self {
            check: check.into(),
            instance: instance.into(),
            seed,
            trials,
            violations: Vec::new(),
            pass: true,
            comparable_pairs: None,
        }
    }

    fn flag(&mut self, trial: usize, what: impl Into<String>, excess: f64) {
        if excess > 0.0 || excess.is_nan() {
            self.violations.push(Violation { trial, what: what.into(), excess });
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.violations.is_empty();
        self
    }
}

fn psi<P: BlockProblem + ?Sized>(problem: &P, u1: &[f64]) -> Result<Vec<f64>> {
    problem.block_update_1(&problem.block_update_2(u1)?)
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-amp..=amp)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest `a_i - b_i`, i.e. how far `a <= b` fails.
fn excess_over(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

fn moments<P: BlockProblem + ?Sized>(problem: &P, u1: &[f64], u2: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let x = primal_from_dual(problem, &DualState { u1: u1.to_vec(), u2: u2.to_vec() })?;
    Ok((problem.apply_a1(&x), problem.apply_a2(&x), x.iter().sum()))
}

/// Order preservation of `Psi`, first-order conditions of `Psi1`, and
/// monotonicity of the moment maps `M_s(u) = A_s x(u)`.
pub fn check_monotone_sweep<P: BlockProblem + ?Sized>(
    problem: &P,
    sigma: &SignedOrderSpec,
    trials: usize,
    seed: u64,
    instance: &str,
) -> Result<Report> {
    sigma.validate(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m1, m2) = problem.dims_dual();
    let mut rep = Report::new("monotone_sweep", instance, seed, trials);
    let mut comparable = 0;
    let b1_l1 = l1_norm(problem.b1());
    for t in 0..trials {
        let u1 = uniform(&mut rng, m1, 1.0);
        let v1: Vec<f64> = u1.iter().map(|x| x + rng.gen_range(0.0..1.0)).collect();
        rep.flag(t, "Psi(u1) <= Psi(v1)", excess_over(&psi(problem, &u1)?, &psi(problem, &v1)?) - 1e-10);

        let u2 = uniform(&mut rng, m2, 1.0);
        let w1 = problem.block_update_1(&u2)?;
        let (mom1, _, mass) = moments(problem, &w1, &u2)?;
        let foc = mom1.iter().zip(problem.b1()).map(|(m, b)| (m - b).abs()).sum::<f64>();
        rep.flag(t, "M1(Psi1(u2), u2) = b1", foc - 1e-9 * b1_l1.max(mass));

        let (a1, a2, _) = moments(problem, &u1, &u2)?;
        let (c1, c2, mass) = moments(problem, &v1, &u2)?;
        let tol = 1e-12 * mass.max(1.0);
        rep.flag(t, "M1 nondecreasing in u1", excess_over(&a1, &c1) - tol);
        rep.flag(t, "M2 nondecreasing in u2 order", excess_over(&a2, &c2) - tol);

        // a shifted copy is comparable only when the order is nontrivial
        let v2: Vec<f64> = u2.iter().map(|x| x + rng.gen_range(0.0..1.0)).collect();
        for cand in [v2, u2.clone()] {
            if sigma.le(problem, &u2, &cand, 0.0) {
                comparable += 1;
                let (a1, a2, _) = moments(problem, &u1, &u2)?;
                let (c1, c2, mass) = moments(problem, &u1, &cand)?;
                let tol = 1e-12 * mass.max(1.0);
                rep.flag(t, "M1 nondecreasing in signed order", excess_over(&a1, &c1) - tol);
                rep.flag(t, "M2 nondecreasing in signed order", excess_over(&a2, &c2) - tol);
            }
        }
    }
    rep.comparable_pairs = Some(comparable);
    Ok(rep.finish())
}

/// Paired balance `A1^T 1 + tau A2^T 1 = 0`, the block identities
/// `Psi_s(u + c 1) = Psi_s(u) + tau c 1`, and `Psi(u1 + c 1) = Psi(u1) + c 1`.
pub fn check_translation_equivariance<P: BlockProblem + ?Sized>(
    problem: &P,
    tau: f64,
    trials: usize,
    seed: u64,
    instance: &str,
) -> Result<Report> {
    if tau.abs() != 1.0 {
        return Err(domain(format!("tau must be +1 or -1, got {tau}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m1, m2) = problem.dims_dual();
    let mut rep = Report::new("translation_equivariance", instance, seed, trials);
    let a = problem.apply_a1_adjoint(&vec![1.0; m1]);
    let b = problem.apply_a2_adjoint(&vec![1.0; m2]);
    for (j, (x, y)) in a.iter().zip(&b).enumerate() {
        rep.flag(j, format!("paired balance at coordinate {j}"), (x + tau * y).abs() - 1e-12);
    }
    for t in 0..trials {
        let c = rng.gen_range(-10.0..=10.0);
        let u1 = uniform(&mut rng, m1, 1.0);
        let u2 = uniform(&mut rng, m2, 1.0);
        let s1: Vec<f64> = u1.iter().map(|x| x + c).collect();
        let s2: Vec<f64> = u2.iter().map(|x| x + c).collect();

        let lhs = problem.block_update_2(&s1)?;
        let rhs: Vec<f64> = problem.block_update_2(&u1)?.iter().map(|x| x + tau * c).collect();
        rep.flag(t, "Psi2 shift", max_abs_diff(&lhs, &rhs) - 1e-10);

        let lhs = problem.block_update_1(&s2)?;
        let rhs: Vec<f64> = problem.block_update_1(&u2)?.iter().map(|x| x + tau * c).collect();
        rep.flag(t, "Psi1 shift", max_abs_diff(&lhs, &rhs) - 1e-10);

        let lhs = psi(problem, &s1)?;
        let rhs: Vec<f64> = psi(problem, &u1)?.iter().map(|x| x + c).collect();
        rep.flag(t, "Psi shift", max_abs_diff(&lhs, &rhs) - 1e-10);
    }
    Ok(rep.finish())
}

/// `|Psi(a) - Psi(b)|_var <= |a - b|_var + tol` on random pairs, half of
/// them close together.
pub fn check_nonexpansive<P: BlockProblem + ?Sized>(
    problem: &P,
    trials: usize,
    seed: u64,
    tol: f64,
    instance: &str,
) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m1, _) = problem.dims_dual();
    let mut rep = Report::new("nonexpansive", instance, seed, trials);
    for t in 0..trials {
        let a = uniform(&mut rng, m1, 1.0);
        let b: Vec<f64> = if t % 2 == 0 {
            uniform(&mut rng, m1, 1.0)
        } else {
            a.iter().map(|x| x + rng.gen_range(-1e-3..1e-3)).collect()
        };
        let (pa, pb) = (psi(problem, &a)?, psi(problem, &b)?);
        let out: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        let inn: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        rep.flag(t, "seminorm contraction", variation_seminorm(&out)? - variation_seminorm(&inn)? - tol);
    }
    Ok(rep.finish())
}

/// Runs `sweeps` generic sweeps and a reference run `reference_factor` times
/// longer, then checks the rate envelope, per-sweep ascent, the gap/residual
/// bound, monotone `F` and first-order conditions on the short trace.
pub fn check_run_certificates<P: BlockProblem + ?Sized>(
    problem: &P,
    sweeps: usize,
    reference_factor: usize,
    seed: u64,
    instance: &str,
) -> Result<Report> {
    let run = |k| solve(problem, StoppingRule::MaxSweeps(k)).map_err(|e| e.error);
    let trace = run(sweeps)?.trace;
    let reference = run(sweeps * reference_factor.max(1))?.trace;
    let f_star = reference.last().map_or(f64::NEG_INFINITY, |r| r.f_gamma);
    let (a_norm, gamma) = (problem.operator_norm_1to1(), problem.gamma());
    let mut rep = Report::new("run_certificates", instance, seed, sweeps);
    let cert = verify_rate(&trace, a_norm, gamma, f_star);
    rep.flag(0, "rate envelope", cert.max_k_times_gap - cert.envelope_bound - 1e-6);
    let ascent = verify_ascent(&trace, a_norm, gamma);
    rep.flag(ascent.worst_sweep, "per-sweep ascent", -ascent.min_margin - 1e-10);
    for r in &trace.records {
        let gap = f_star - r.f_gamma - 2.0 * cert.u_hat * r.res1_l1;
        rep.flag(r.k, "gap bounded by residual", gap - 1e-8);
    }
    rep.flag(0, "F nondecreasing", trace.max_descent() - 1e-12);
    rep.flag(0, "first-order conditions", trace.max_foc_rel() - 1e-9);
    Ok(rep.finish())
}
