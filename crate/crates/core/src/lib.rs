//! Entropic two-block linear programs solved by cyclic KL projections:
//! balanced optimal transport (Sinkhorn) and Wasserstein-1 on graphs
//! (flow Sinkhorn), with exact min-cost-flow references and certificate checks.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod blocklp;
pub mod error;
pub mod flowsinkhorn;
pub mod graph;
pub mod instances;
pub mod numerics;
pub mod oracle;
pub mod sinkhorn;

pub use blocklp::{
    dual_objective, gibbs_kernel, plan_schedule, primal_from_dual, residuals, solve, solve_with,
    sweep, BlockProblem, ConvergenceTrace, DualState, Schedule, Solution, SolveError,
    StoppingRule, TraceRecord,
};
pub use error::{Error, Result};
pub use graph::{EdgeFlow, GeodesicMatrix, Graph};
pub use numerics::{
    arsinh_stable, kl_divergence, kl_divergence_nonneg, log_sum_exp, phi_root, variation_seminorm, PositiveVector,
    RealVector,
};
pub use flowsinkhorn::{
    divergence, flow_constants, plan_flow, project_c2, solve_flow, w1_estimate, Coupling,
    FlowConstants, FlowInput, FlowPath, FlowPlan, FlowProblem, W1Estimate,
};
pub use sinkhorn::{ot_constants, OTInput, OTProblem, OtConstants};
pub use oracle::{exact_ot, exact_w1, min_cost_flow, MinCostFlowInstance, MinCostFlowSolution};
pub use analysis::{Report, SignedOrderSpec, DEFAULT_SEED};
