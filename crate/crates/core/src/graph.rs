//! Undirected weighted graphs and the directed-arc view used by flow solvers.
//!
//! Each stored edge `e = (i, j)` with `i < j` gives two arcs: `2e` is the
//! pair `(i, j)` and `2e + 1` is `(j, i)`. For arc `(i, j)` vertex `i` is the
//! *row* and `j` the *column*; the divergence of a flow is column sums minus
//! row sums.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    // arc ids grouped by row vertex / column vertex, neighbours ascending
    row_offsets: Vec<usize>,
    row_arcs: Vec<usize>,
    col_offsets: Vec<usize>,
    col_arcs: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson {
            n: self.n,
            edges: self.edges.iter().map(|e| (e.i, e.j, e.w)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        Graph::new(raw.n, raw.edges).map_err(serde::de::Error::custom)
    }
}

impl Graph {
    /// Builds a graph from `(i, j, w)` triples. Endpoint order is irrelevant.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(domain("graph needs at least one vertex"));
        }
        let mut list = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(domain(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(domain(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(domain(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            list.push(Edge { i: i.min(j), j: i.max(j), w });
        }
        let mut keys: Vec<(usize, usize)> = list.iter().map(|e| (e.i, e.j)).collect();
        keys.sort_unstable();
        if let Some(k) = keys.windows(2).find(|k| k[0] == k[1]) {
            return Err(domain(format!("duplicate edge ({}, {})", k[0].0, k[0].1)));
        }

        let p = 2 * list.len();
        let arc = |a: usize| {
            let e = &list[a / 2];
            if a.is_multiple_of(2) {
                (e.i, e.j)
            } else {
                (e.j, e.i)
            }
        };
        let mut by_row: Vec<usize> = (0..p).collect();
        by_row.sort_by_key(|&a| arc(a));
        let mut by_col: Vec<usize> = (0..p).collect();
        by_col.sort_by_key(|&a| (arc(a).1, arc(a).0));
        let offsets = |key: &dyn Fn(usize) -> usize, order: &[usize]| {
            let mut off = vec![0usize; n + 1];
            for &a in order {
                off[key(a) + 1] += 1;
            }
            for v in 0..n {
                off[v + 1] += off[v];
            }
            off
        };
        let row_offsets = offsets(&|a| arc(a).0, &by_row);
        let col_offsets = offsets(&|a| arc(a).1, &by_col);

        let g = Graph {
            n,
            edges: list,
            row_offsets,
            row_arcs: by_row,
            col_offsets,
            col_arcs: by_col,
        };
        let reached = g.bfs_hops(0).iter().filter(|h| h.is_some()).count();
        if reached < n {
            return Err(Error::Disconnected { reached, n });
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of directed arcs, twice the stored edge count.
    pub fn num_arcs(&self) -> usize {
        2 * self.edges.len()
    }

    /// `(row, col)` of an arc.
    #[inline]
    pub fn arc(&self, a: usize) -> (usize, usize) {
        let e = &self.edges[a / 2];
        if a.is_multiple_of(2) {
            (e.i, e.j)
        } else {
            (e.j, e.i)
        }
    }

    #[inline]
    pub fn arc_weight(&self, a: usize) -> f64 {
        self.edges[a / 2].w
    }

    /// Arc weights in arc order.
    pub fn arc_weights(&self) -> Vec<f64> {
        (0..self.num_arcs()).map(|a| self.arc_weight(a)).collect()
    }

    /// Arcs `(v, j)`, ordered by `j`.
    #[inline]
    pub fn row_arcs(&self, v: usize) -> &[usize] {
        &self.row_arcs[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    /// Arcs `(k, v)`, ordered by `k`.
    #[inline]
    pub fn col_arcs(&self, v: usize) -> &[usize] {
        &self.col_arcs[self.col_offsets[v]..self.col_offsets[v + 1]]
    }

    pub fn min_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).fold(0.0, f64::max)
    }

    /// Scales every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Graph> {
        Graph::new(self.n, self.edges.iter().map(|e| (e.i, e.j, e.w * c)))
    }

    /// Column sums minus row sums of an arc-indexed vector.
    pub fn divergence(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_arcs(), f.len())?;
        let mut div = vec![0.0; self.n];
        for (v, d) in div.iter_mut().enumerate() {
            let inflow: f64 = self.col_arcs(v).iter().map(|&a| f[a]).sum();
            let outflow: f64 = self.row_arcs(v).iter().map(|&a| f[a]).sum();
            *d = inflow - outflow;
        }
        Ok(div)
    }

    fn neighbours(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_arcs(v).iter().map(move |&a| (self.arc(a).1, self.arc_weight(a)))
    }

    fn bfs_hops(&self, source: usize) -> Vec<Option<usize>> {
        let mut hops = vec![None; self.n];
        hops[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let h = hops[v].unwrap_or(0);
            for (u, _) in self.neighbours(v) {
                if hops[u].is_none() {
                    hops[u] = Some(h + 1);
                    queue.push_back(u);
                }
            }
        }
        hops
    }

    /// Single-source Dijkstra.
    pub fn shortest_paths(&self, source: usize) -> Result<Vec<f64>> {
        if source >= self.n {
            return Err(domain(format!("source {source} out of range")));
        }
        let mut dist = vec![f64::INFINITY; self.n];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Dist(0.0), source)));
        while let Some(Reverse((Dist(d), v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for (u, w) in self.neighbours(v) {
                let nd = d + w;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Reverse((Dist(nd), u)));
                }
            }
        }
        Ok(dist)
    }

    pub fn geodesic_matrix(&self) -> GeodesicMatrix {
        let mut dist = Vec::with_capacity(self.n * self.n);
        for s in 0..self.n {
            dist.extend(self.shortest_paths(s).expect("source in range"));
        }
        // Dijkstra may differ in the last ulp between directions
        for i in 0..self.n {
            for j in 0..i {
                let m = dist[i * self.n + j].min(dist[j * self.n + i]);
                dist[i * self.n + j] = m;
                dist[j * self.n + i] = m;
            }
        }
        GeodesicMatrix { n: self.n, dist }
    }

    /// Largest minimum hop count between two vertices.
    pub fn hop_diameter(&self) -> usize {
        (0..self.n)
            .map(|s| self.bfs_hops(s).into_iter().flatten().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// BFS parent arcs from vertex 0, neighbours visited in ascending order.
    /// Returns the visiting order and, per vertex, `(parent, stored edge)`.
    fn bfs_tree(&self) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &a in self.row_arcs(v) {
                let u = self.arc(a).1;
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some((v, a / 2));
                    queue.push_back(u);
                }
            }
        }
        (order, parent)
    }

    /// Nonnegative flow on a BFS spanning tree with divergence `b1 - b2`.
    pub fn spanning_tree_flow(&self, b1: &[f64], b2: &[f64]) -> Result<EdgeFlow> {
        check_len(self.n, b1.len())?;
        check_len(self.n, b2.len())?;
        let (s1, s2): (f64, f64) = (b1.iter().sum(), b2.iter().sum());
        if (s1 - s2).abs() > 1e-12 * s1.abs().max(s2.abs()).max(1.0) {
            return Err(domain(format!("unbalanced marginals: {s1} vs {s2}")));
        }
        let (order, parent) = self.bfs_tree();
        let mut subtree: Vec<f64> = b1.iter().zip(b2).map(|(x, y)| x - y).collect();
        let mut f = vec![0.0; self.num_arcs()];
        for &v in order.iter().rev() {
            let Some((p, e)) = parent[v] else { continue };
            let s = subtree[v];
            // arc 2e is (min, max); pick the arc whose column lies on the side needing inflow
            let into_v = if self.edges[e].j == v { 2 * e } else { 2 * e + 1 };
            let into_p = into_v ^ 1;
            if s > 0.0 {
                f[into_v] = s;
            } else if s < 0.0 {
                f[into_p] = -s;
            }
            subtree[p] += s;
        }
        EdgeFlow::new(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dense all-pairs shortest-path distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    n: usize,
    dist: Vec<f64>,
}

impl GeodesicMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// Nonnegative arc-indexed flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EdgeFlow(Vec<f64>);

impl EdgeFlow {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((a, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(domain(format!("flow on arc {a} is {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Deref for EdgeFlow {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EdgeFlow {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EdgeFlow> for Vec<f64> {
    fn from(f: EdgeFlow) -> Vec<f64> {
        f.0
    }
}
