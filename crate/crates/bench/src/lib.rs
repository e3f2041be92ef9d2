//! Shared fixtures for the criterion benches.

use flowsink::instances::{random_cost, random_marginal, random_sparse_graph};
use flowsink::{FlowProblem, OTProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ring-plus-chords flow problem with about `4 n` arcs.
pub fn sparse_flow(n: usize, gamma: f64, seed: u64) -> FlowProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_sparse_graph(&mut rng, n, n);
    let b1 = random_marginal(&mut rng, n);
    let b2 = random_marginal(&mut rng, n);
    FlowProblem::new(g, b1, b2, gamma).expect("valid instance")
}

pub fn square_ot(m: usize, gamma: f64, seed: u64) -> OTProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_cost(&mut rng, m, m);
    OTProblem::new(c, random_marginal(&mut rng, m), random_marginal(&mut rng, m), gamma).expect("valid instance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowsink::BlockProblem;

    #[test]
    fn fixtures_scale_with_n() {
        let p = sparse_flow(100, 0.1, 1);
        assert_eq!(p.graph().num_arcs(), 400);
        assert_eq!(square_ot(8, 0.1, 1).dims_dual(), (8, 8));
    }
}
