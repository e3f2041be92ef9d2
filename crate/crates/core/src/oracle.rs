//! Exact references: min-cost flow by successive shortest paths, W1 on graphs
//! as uncapacitated transshipment, and discrete OT as a bipartite flow.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{check_len, domain, Error, Result};
use crate::graph::Graph;

const FEAS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    /// `None` for unbounded.
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCostFlowInstance {
    pub n: usize,
    pub arcs: Vec<Arc>,
    /// Net injection per node; positive entries are sources.
    pub supply: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinCostFlowSolution {
    pub cost: f64,
    pub flow: Vec<f64>,
    /// Node potentials with reduced costs `c + pi_from - pi_to >= 0` on
    /// every arc with residual capacity.
    pub potentials: Vec<f64>,
}

impl MinCostFlowInstance {
    fn validate(&self) -> Result<()> {
        check_len(self.n, self.supply.len())?;
        for (k, a) in self.arcs.iter().enumerate() {
            if a.from >= self.n || a.to >= self.n {
                return Err(domain(format!("arc {k} has an endpoint out of range")));
            }
            if !(a.cost.is_finite() && a.cost >= 0.0) {
                return Err(domain(format!("arc {k} has invalid cost {}", a.cost)));
            }
            if let Some(c) = a.capacity {
                if !(c >= 0.0) {
                    return Err(domain(format!("arc {k} has invalid capacity {c}")));
                }
            }
        }
        if self.supply.iter().any(|s| !s.is_finite()) {
            return Err(domain("supplies must be finite"));
        }
        let total: f64 = self.supply.iter().sum();
        let scale: f64 = self.supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
        if total.abs() > FEAS_EPS * scale {
            return Err(domain(format!("supplies sum to {total}, expected 0")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Successive shortest augmenting paths with Dijkstra on reduced costs.
pub fn min_cost_flow(inst: &MinCostFlowInstance) -> Result<MinCostFlowSolution> {
    inst.validate()?;
    let n = inst.n;
    let m = inst.arcs.len();
    let scale: f64 = inst.supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    let eps = FEAS_EPS * scale;

    // residual edge 2k is arc k forward, 2k + 1 its reverse
    let mut adj = vec![Vec::new(); n];
    for (k, a) in inst.arcs.iter().enumerate() {
        adj[a.from].push(2 * k);
        adj[a.to].push(2 * k + 1);
    }
    let head = |e: usize| {
        let a = &inst.arcs[e / 2];
        if e.is_multiple_of(2) {
            a.to
        } else {
            a.from
        }
    };
    let mut flow = vec![0.0; m];
    let residual = |e: usize, flow: &[f64]| {
        let a = &inst.arcs[e / 2];
        if e.is_multiple_of(2) {
            a.capacity.map_or(f64::INFINITY, |c| c - flow[e / 2])
        } else {
            flow[e / 2]
        }
    };
    let rcost = |e: usize| {
        let c = inst.arcs[e / 2].cost;
        if e.is_multiple_of(2) {
            c
        } else {
            -c
        }
    };

    let mut excess = inst.supply.clone();
    let mut pi = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    loop {
        if !excess.iter().any(|&x| x > eps) {
            break;
        }
        dist.fill(f64::INFINITY);
        pred.fill(None);
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            if excess[v] > eps {
                dist[v] = 0.0;
                heap.push(Reverse((Key(0.0), v)));
            }
        }
        let mut target = None;
        while let Some(Reverse((Key(d), v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if excess[v] < -eps {
                target = Some(v);
                break;
            }
            for &e in &adj[v] {
                if residual(e, &flow) <= eps {
                    continue;
                }
                let u = head(e);
                // clamp rounding noise in reduced costs
                let nd = d + (rcost(e) + pi[v] - pi[u]).max(0.0);
                if nd < dist[u] {
                    dist[u] = nd;
                    pred[u] = Some(e);
                    heap.push(Reverse((Key(nd), u)));
                }
            }
        }
        let Some(t) = target else {
            let left: f64 = excess.iter().filter(|&&x| x > eps).sum();
            return Err(Error::Infeasible(format!("{left:.3e} units of supply cannot reach any demand")));
        };
        let dt = dist[t];
        for v in 0..n {
            pi[v] += dist[v].min(dt);
        }
        // walk back to find the source and bottleneck
        let mut amount = -excess[t];
        let mut v = t;
        while let Some(e) = pred[v] {
            amount = amount.min(residual(e, &flow));
            v = head(e ^ 1);
        }
        amount = amount.min(excess[v]);
        let source = v;
        let mut v = t;
        while let Some(e) = pred[v] {
            if e.is_multiple_of(2) {
                flow[e / 2] += amount;
                if let Some(c) = inst.arcs[e / 2].capacity {
                    if c - flow[e / 2] <= eps {
                        flow[e / 2] = c;
                    }
                }
            } else {
                flow[e / 2] -= amount;
                if flow[e / 2] <= eps {
                    flow[e / 2] = 0.0;
                }
            }
            v = head(e ^ 1);
        }
        excess[source] -= amount;
        excess[t] += amount;
        if excess[source].abs() <= eps {
            excess[source] = 0.0;
        }
        if excess[t].abs() <= eps {
            excess[t] = 0.0;
        }
    }
    let cost = inst.arcs.iter().zip(&flow).map(|(a, f)| a.cost * f).sum();
    Ok(MinCostFlowSolution { cost, flow, potentials: pi })
}

/// Largest complementary-slackness violation: negative reduced cost on an
/// arc with spare capacity, or positive reduced cost on an arc carrying flow.
pub fn certificate_violation(inst: &MinCostFlowInstance, sol: &MinCostFlowSolution) -> f64 {
    let scale: f64 = inst.supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    let eps = 1e-9 * scale;
    inst.arcs
        .iter()
        .zip(&sol.flow)
        .map(|(a, &f)| {
            let rc = a.cost + sol.potentials[a.from] - sol.potentials[a.to];
            let spare = a.capacity.is_none_or(|c| c - f > eps);
            let mut worst: f64 = 0.0;
            if spare {
                worst = worst.max(-rc);
            }
            if f > eps {
                worst = worst.max(rc);
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// Net outflow minus supply, l1.
pub fn conservation_error(inst: &MinCostFlowInstance, flow: &[f64]) -> f64 {
    let mut net = inst.supply.clone();
    for (a, f) in inst.arcs.iter().zip(flow) {
        net[a.from] -= f;
        net[a.to] += f;
    }
    net.iter().map(|x| x.abs()).sum()
}

/// Optimal transshipment cost between `b1` and `b2` with both arc directions at cost `W`.
pub fn exact_w1(g: &Graph, b1: &[f64], b2: &[f64]) -> Result<f64> {
    check_len(g.n(), b1.len())?;
    check_len(g.n(), b2.len())?;
    let inst = MinCostFlowInstance {
        n: g.n(),
        arcs: (0..g.num_arcs())
            .map(|a| {
                let (i, j) = g.arc(a);
                Arc { from: i, to: j, cost: g.arc_weight(a), capacity: None }
            })
            .collect(),
        supply: b1.iter().zip(b2).map(|(x, y)| x - y).collect(),
    };
    Ok(min_cost_flow(&inst)?.cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactOt {
    pub value: f64,
    pub plan: Vec<Vec<f64>>,
}

/// Exact discrete OT as a complete bipartite min-cost flow.
pub fn exact_ot(cost: &[Vec<f64>], b1: &[f64], b2: &[f64]) -> Result<ExactOt> {
    let (m1, m2) = (b1.len(), b2.len());
    check_len(m1, cost.len())?;
    let mut arcs = Vec::with_capacity(m1 * m2);
    for (i, row) in cost.iter().enumerate() {
        check_len(m2, row.len())?;
        for (j, &c) in row.iter().enumerate() {
            arcs.push(Arc { from: i, to: m1 + j, cost: c, capacity: None });
        }
    }
    let supply = b1.iter().copied().chain(b2.iter().map(|b| -b)).collect();
    let sol = min_cost_flow(&MinCostFlowInstance { n: m1 + m2, arcs, supply })?;
    Ok(ExactOt {
        value: sol.cost,
        plan: sol.flow.chunks(m2).map(|r| r.to_vec()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_connected_graph, random_cost, random_marginal};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arc(from: usize, to: usize, cost: f64, capacity: Option<f64>) -> Arc {
        Arc { from, to, cost, capacity }
    }

    #[test]
    fn single_arc() {
        let inst = MinCostFlowInstance { n: 2, arcs: vec![arc(0, 1, 2.5, None)], supply: vec![1.0, -1.0] };
        let sol = min_cost_flow(&inst).unwrap();
        assert_eq!(sol.cost, 2.5);
        assert_eq!(certificate_violation(&inst, &sol), 0.0);
    }

    #[test]
    fn cheaper_path_under_capacity() {
        // 0 -> 1 -> 3 costs 2, 0 -> 2 -> 3 costs 5
        let inst = MinCostFlowInstance {
            n: 4,
            arcs: vec![
                arc(0, 1, 1.0, Some(3.0)),
                arc(1, 3, 1.0, None),
                arc(0, 2, 2.0, None),
                arc(2, 3, 3.0, None),
            ],
            supply: vec![2.0, 0.0, 0.0, -2.0],
        };
        let sol = min_cost_flow(&inst).unwrap();
        assert_eq!(sol.flow, vec![2.0, 2.0, 0.0, 0.0]);
        assert_eq!(sol.cost, 4.0);
        // tighten capacity: one unit spills to the dear path
        let mut tight = inst.clone();
        tight.arcs[0].capacity = Some(1.0);
        let sol = min_cost_flow(&tight).unwrap();
        assert_eq!(sol.cost, 2.0 + 5.0);
        assert!(certificate_violation(&tight, &sol) <= 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let inst = MinCostFlowInstance { n: 3, arcs: vec![arc(0, 1, 1.0, None)], supply: vec![1.0, 0.0, -1.0] };
        assert!(matches!(min_cost_flow(&inst), Err(Error::Infeasible(_))));
        let cap = MinCostFlowInstance { n: 2, arcs: vec![arc(0, 1, 1.0, Some(0.5))], supply: vec![1.0, -1.0] };
        assert!(matches!(min_cost_flow(&cap), Err(Error::Infeasible(_))));
        let bad = MinCostFlowInstance { n: 2, arcs: vec![], supply: vec![1.0, 0.0] };
        assert!(min_cost_flow(&bad).is_err());
    }

    fn floyd(n: usize, arcs: &[Arc]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for a in arcs {
            d[a.from][a.to] = d[a.from][a.to].min(a.cost);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        d
    }

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn unit_supplies_match_assignment_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = 8;
            let mut arcs = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen::<f64>() < 0.5 {
                        arcs.push(arc(i, j, rng.gen_range(0.0..3.0), None));
                    }
                }
            }
            // strongly connected backbone
            for i in 0..n {
                arcs.push(arc(i, (i + 1) % n, rng.gen_range(2.0..5.0), None));
            }
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(&mut rng);
            let k = 3;
            let (src, dst) = (&nodes[..k], &nodes[k..2 * k]);
            let mut supply = vec![0.0; n];
            src.iter().for_each(|&s| supply[s] = 1.0);
            dst.iter().for_each(|&t| supply[t] = -1.0);
            let inst = MinCostFlowInstance { n, arcs: arcs.clone(), supply };
            let sol = min_cost_flow(&inst).unwrap();
            let d = floyd(n, &arcs);
            let best = permutations(k)
                .iter()
                .map(|perm| (0..k).map(|i| d[src[i]][dst[perm[i]]]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((sol.cost - best).abs() <= 1e-9, "{} vs {}", sol.cost, best);
            assert!(certificate_violation(&inst, &sol) <= 1e-9);
            assert!(conservation_error(&inst, &sol.flow) <= 1e-12);
            let dual: f64 = -inst.supply.iter().zip(&sol.potentials).map(|(s, p)| s * p).sum::<f64>();
            assert!((dual - sol.cost).abs() <= 1e-9);
        }
    }

    /// Minimum over basic feasible solutions: spanning trees of the complete
    /// bipartite graph, each solved by peeling leaves.
    fn bfs_enumeration(cost: &[Vec<f64>], b1: &[f64], b2: &[f64]) -> f64 {
        let (m1, m2) = (b1.len(), b2.len());
        let cells: Vec<(usize, usize)> = (0..m1).flat_map(|i| (0..m2).map(move |j| (i, j))).collect();
        let size = m1 + m2 - 1;
        let mut best = f64::INFINITY;
        let mut pick = vec![0usize; size];
        fn next(pick: &mut [usize], total: usize) -> bool {
            let k = pick.len();
            for i in (0..k).rev() {
                if pick[i] < total - (k - i) {
                    pick[i] += 1;
                    for j in i + 1..k {
                        pick[j] = pick[j - 1] + 1;
                    }
                    return true;
                }
            }
            false
        }
        for (i, p) in pick.iter_mut().enumerate() {
            *p = i;
        }
        loop {
            let chosen: Vec<(usize, usize)> = pick.iter().map(|&c| cells[c]).collect();
            let mut row = b1.to_vec();
            let mut col = b2.to_vec();
            let mut left = chosen.clone();
            let mut x = Vec::new();
            let mut ok = true;
            while !left.is_empty() {
                // a leaf is a row or column touched by exactly one remaining cell
                let leaf = left.iter().position(|&(i, j)| {
                    left.iter().filter(|c| c.0 == i).count() == 1 || left.iter().filter(|c| c.1 == j).count() == 1
                });
                let Some(k) = leaf else {
                    ok = false;
                    break;
                };
                let (i, j) = left.remove(k);
                let v = if left.iter().all(|c| c.0 != i) { row[i] } else { col[j] };
                row[i] -= v;
                col[j] -= v;
                x.push((i, j, v));
            }
            let balanced = row.iter().chain(&col).all(|r| r.abs() < 1e-12);
            if ok && balanced && x.iter().all(|c| c.2 >= -1e-12) {
                best = best.min(x.iter().map(|&(i, j, v)| cost[i][j] * v).sum());
            }
            if !next(&mut pick, cells.len()) {
                break;
            }
        }
        best
    }

    #[test]
    fn ot_examples() {
        let one = exact_ot(&[vec![0.7]], &[1.0], &[1.0]).unwrap();
        assert_eq!(one.value, 0.7);
        let b = [0.2, 0.5, 0.3];
        let c = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        assert_eq!(exact_ot(&c, &b, &b).unwrap().value, 0.0);
    }

    #[test]
    fn ot_matches_basis_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..3 {
            let c = random_cost(&mut rng, 4, 4);
            let b1 = random_marginal(&mut rng, 4);
            let b2 = random_marginal(&mut rng, 4);
            let got = exact_ot(&c, &b1, &b2).unwrap();
            let want = bfs_enumeration(&c, &b1, &b2);
            assert!((got.value - want).abs() <= 1e-9, "{} vs {}", got.value, want);
            for (i, row) in got.plan.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - b1[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn w1_examples() {
        let g = Graph::new(2, [(0, 1, 1.7)]).unwrap();
        assert_eq!(exact_w1(&g, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.7);
        let path = Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(exact_w1(&path, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn w1_equals_ot_on_geodesics_and_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..5 {
            let n = rng.gen_range(5..15);
            let g = random_connected_graph(&mut rng, n, 0.3);
            let b1 = random_marginal(&mut rng, n);
            let b2 = random_marginal(&mut rng, n);
            let w1 = exact_w1(&g, &b1, &b2).unwrap();
            let ot = exact_ot(&g.geodesic_matrix().rows(), &b1, &b2).unwrap().value;
            assert!((w1 - ot).abs() <= 1e-8);
            let scaled = exact_w1(&g.scaled(4.0).unwrap(), &b1, &b2).unwrap();
            assert!((scaled - 4.0 * w1).abs() <= 1e-12);
        }
    }
}
