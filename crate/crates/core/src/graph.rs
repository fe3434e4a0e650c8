//! Weighted directed graphs, their random generators, the edge-incidence
//! operator and the diagonal degree metric.
//!
//! Vertices are 0-based internally. The plain-text edge-list format read by
//! [`WeightedDigraph::from_edge_list`] is 1-based:
//!
//! ```text
//! n m
//! i j w      (m lines)
//! ```

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};

/// Directed edge `from -> to` with a positive weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A weighted directed graph without self-loops or parallel edges.
///
/// Edges are kept sorted lexicographically by `(from, to)`. An undirected
/// graph is a digraph whose edge set is symmetric with equal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedDigraph {
    pub fn new(n: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.from)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.from, e.to, e.weight
                )));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        if let Some(w) = edges.windows(2).find(|w| (w[0].from, w[0].to) == (w[1].from, w[1].to)) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].from, w[0].to
            )));
        }
        Ok(Self { n, edges })
    }

    /// Builds an undirected graph: each `(i, j, w)` becomes the pair
    /// `(i, j, w)`, `(j, i, w)`.
    pub fn undirected(n: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .flat_map(|&(i, j, w)| {
                [
                    Edge { from: i, to: j, weight: w },
                    Edge { from: j, to: i, weight: w },
                ]
            })
            .collect();
        Self::new(n, edges)
    }

    /// Builds a digraph from `(from, to, weight)` triples.
    pub fn directed(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            n,
            triples
                .iter()
                .map(|&(from, to, weight)| Edge { from, to, weight })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.edges
            .binary_search_by_key(&(from, to), |e| (e.from, e.to))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    /// True when `(i, j, w)` present iff `(j, i, w)` present.
    pub fn is_symmetric(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.weight(e.to, e.from) == Some(e.weight))
    }

    /// Number of directed edges whose reverse edge is absent.
    pub fn one_directional_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| self.weight(e.to, e.from).is_none())
            .count()
    }

    /// Connectivity of the underlying undirected graph (BFS).
    pub fn is_weakly_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Dense weight matrix `W[i][j] = w_ij`.
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.n]; self.n];
        for e in &self.edges {
            w[e.from][e.to] = e.weight;
        }
        w
    }

    /// Serializes to the 1-based edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            // `{}` on f64 prints the shortest representation that parses back exactly
            let _ = writeln!(s, "{} {} {}", e.from + 1, e.to + 1, e.weight);
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `n m`".into(),
            });
        }
        let parse_usize = |tok: &str, line: usize| {
            tok.parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("{tok:?}: {e}"),
            })
        };
        let n = parse_usize(head[0], hline)?;
        let m = parse_usize(head[1], hline)?;
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: "edge line must be `i j w`".into(),
                });
            }
            let i = parse_usize(toks[0], line)?;
            let j = parse_usize(toks[1], line)?;
            let weight = toks[2].parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("{:?}: {e}", toks[2]),
            })?;
            if i == 0 || j == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "vertices are 1-based".into(),
                });
            }
            edges.push(Edge {
                from: i - 1,
                to: j - 1,
                weight,
            });
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: hline,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Self::new(n, edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}

fn uniform_points(n: usize, rng: &mut SeededRng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Gaussian-kernel bandwidth of the geometric generators.
pub const GEOMETRIC_BANDWIDTH: f64 = 0.5;
/// Weights of the undirected geometric graph below this value are dropped.
pub const GEOMETRIC_THRESHOLD: f64 = 0.7;

/// Random geometric graph: `n` uniform points in the unit square, symmetric
/// weights `exp(-|p_i - p_j|^2 / 0.5)`, weights below 0.7 removed.
pub fn generate_rgg(n: usize, seed: u64) -> Result<WeightedDigraph> {
    let mut rng = seeded(seed);
    let pts = uniform_points(n, &mut rng);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = (-sq_dist(pts[i], pts[j]) / GEOMETRIC_BANDWIDTH).exp();
            if w >= GEOMETRIC_THRESHOLD {
                pairs.push((i, j, w));
            }
        }
    }
    WeightedDigraph::undirected(n, &pairs)
}

/// Directed random geometric graph: each ordered pair `(i, j)` gets a unit
/// edge with probability `1 - exp(-|p_i - p_j|^2 / 0.5)`.
pub fn generate_drgg(n: usize, seed: u64) -> Result<WeightedDigraph> {
    let mut rng = seeded(seed);
    let pts = uniform_points(n, &mut rng);
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = 1.0 - (-sq_dist(pts[i], pts[j]) / GEOMETRIC_BANDWIDTH).exp();
            if rng.random::<f64>() < p {
                triples.push((i, j, 1.0));
            }
        }
    }
    WeightedDigraph::directed(n, &triples)
}

/// Resampling cap of [`generate_community`].
pub const COMMUNITY_MAX_ATTEMPTS: usize = 1000;

/// Planted-partition graph (`p_out <= p_in`): `k_clusters` contiguous blocks of near-equal size,
/// unit undirected edges with probability `p_in` inside a block and `p_out`
/// across blocks, redrawn until connected.
pub fn generate_community(
    n: usize,
    k_clusters: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<WeightedDigraph> {
    if k_clusters == 0 || k_clusters > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k_clusters <= n, got k_clusters={k_clusters}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let block = |v: usize| v * k_clusters / n;
    let mut rng = seeded(seed);
    for _ in 0..COMMUNITY_MAX_ATTEMPTS {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if block(i) == block(j) { p_in } else { p_out };
                if rng.random::<f64>() < p {
                    pairs.push((i, j, 1.0));
                }
            }
        }
        let g = WeightedDigraph::undirected(n, &pairs)?;
        if g.is_weakly_connected() {
            return Ok(g);
        }
    }
    Err(Error::Disconnected(COMMUNITY_MAX_ATTEMPTS))
}

/// Edge-incidence operator `C` (one row per directed edge, `+1` at the tail,
/// `-1` at the head) together with the edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeIncidence {
    n: usize,
    links: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl EdgeIncidence {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `C y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.links.iter().map(|&(i, j)| y[i] - y[j]).collect()
    }

    /// `C^T u`, accumulated into `out` (overwritten).
    pub fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&(i, j), &uk) in self.links.iter().zip(u) {
            out[i] += uk;
            out[j] -= uk;
        }
    }

    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_transpose_into(u, &mut out);
        out
    }

    /// Dense `|E| x n` matrix.
    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let mut c = crate::linalg::DenseMatrix::zeros(self.links.len(), self.n);
        for (k, &(i, j)) in self.links.iter().enumerate() {
            c[(k, i)] = 1.0;
            c[(k, j)] = -1.0;
        }
        c
    }
}

/// Incidence rows in lexicographic `(i, j)` order.
pub fn incidence(g: &WeightedDigraph) -> EdgeIncidence {
    EdgeIncidence {
        n: g.n,
        links: g.edges.iter().map(|e| (e.from, e.to)).collect(),
        weights: g.edges.iter().map(|e| e.weight).collect(),
    }
}

/// Diagonal positive-definite metric `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMetric {
    d: Vec<f64>,
    d_min: f64,
}

impl DiagonalMetric {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidParameter("empty metric".into()));
        }
        if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "metric entry {i} is not positive: {v}"
            )));
        }
        let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { d, d_min })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            d: vec![1.0; n],
            d_min: 1.0,
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.d
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn is_identity(&self) -> bool {
        self.d.iter().all(|&v| v == 1.0)
    }

    /// `Q x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(a, d)| a * d).collect()
    }

    /// `x^T Q y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.d).map(|((a, b), d)| a * b * d).sum()
    }

    /// `||Q^{1/2} x||`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }
}

/// Degree metric `d_i = (sum_j w_ij + sum_j w_ji) / 2`; equals the usual
/// degree on undirected graphs.
pub fn degree_metric(g: &WeightedDigraph) -> Result<DiagonalMetric> {
    let d = symmetrized_degrees(g);
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return Err(Error::IsolatedVertex(i));
    }
    DiagonalMetric::new(d)
}

pub(crate) fn symmetrized_degrees(g: &WeightedDigraph) -> Vec<f64> {
    let mut d = vec![0.0; g.n];
    for e in &g.edges {
        d[e.from] += 0.5 * e.weight;
        d[e.to] += 0.5 * e.weight;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_edges() {
        assert!(WeightedDigraph::directed(2, &[(0, 0, 1.0)]).is_err());
        assert!(WeightedDigraph::directed(2, &[(0, 1, 0.0)]).is_err());
        assert!(WeightedDigraph::directed(2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(WeightedDigraph::directed(2, &[(0, 2, 1.0)]).is_err());
        assert!(WeightedDigraph::directed(0, &[]).is_err());
    }

    #[test]
    fn single_vertex_generators_are_empty() {
        assert_eq!(generate_rgg(1, 3).unwrap().edge_count(), 0);
        assert_eq!(generate_drgg(1, 3).unwrap().edge_count(), 0);
    }

    #[test]
    fn rgg_weights_in_range_and_symmetric() {
        for seed in 0..10 {
            let g = generate_rgg(20, seed).unwrap();
            assert!(g.is_symmetric());
            assert!(g
                .edges()
                .iter()
                .all(|e| (GEOMETRIC_THRESHOLD..=1.0).contains(&e.weight)));
        }
    }

    #[test]
    fn rgg_golden_edge_count() {
        // regression golden recorded from the ChaCha8 stream
        assert_eq!(generate_rgg(20, 42).unwrap().edge_count(), RGG_20_42_EDGES);
    }

    const RGG_20_42_EDGES: usize = 130;

    #[test]
    fn drgg_unit_weights() {
        let g = generate_drgg(20, 5).unwrap();
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
    }

    #[test]
    fn drgg_one_directional_fraction() {
        let (mut one, mut total) = (0, 0);
        for seed in 0..100 {
            let g = generate_drgg(20, seed).unwrap();
            one += g.one_directional_count();
            total += g.edge_count();
        }
        let frac = one as f64 / total as f64;
        assert!((frac - 0.49).abs() <= 0.1, "fraction {frac}");
    }

    #[test]
    fn community_complete_and_single_edge() {
        let g = generate_community(4, 1, 1.0, 0.0, 1).unwrap();
        assert_eq!(g.edge_count(), 12);
        let g = generate_community(2, 2, 1.0, 1.0, 1).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(generate_community(4, 2, 0.5, 0.6, 1).is_err());
    }

    #[test]
    fn community_connected() {
        let g = generate_community(20, 4, 0.9, 0.05, 7).unwrap();
        assert!(g.is_symmetric());
        assert!(g.is_weakly_connected());
    }

    #[test]
    fn community_gives_up_when_unreachable() {
        assert!(matches!(
            generate_community(6, 3, 0.0001, 0.0, 1),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn incidence_small_cases() {
        let g = WeightedDigraph::directed(2, &[(0, 1, 3.0)]).unwrap();
        let c = incidence(&g);
        assert_eq!(c.to_dense().as_slice(), &[1.0, -1.0]);
        assert_eq!(c.weights(), &[3.0]);

        let g = WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap();
        let c = incidence(&g).to_dense();
        assert_eq!(c.row(0), &[1.0, -1.0]);
        assert_eq!(c.row(1), &[-1.0, 1.0]);
    }

    #[test]
    fn degree_metric_cases() {
        let g = WeightedDigraph::undirected(2, &[(0, 1, 2.0)]).unwrap();
        assert_eq!(degree_metric(&g).unwrap().diag(), &[2.0, 2.0]);
        let g = WeightedDigraph::directed(2, &[(0, 1, 3.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(degree_metric(&g).unwrap().diag(), &[2.0, 2.0]);
        let g = WeightedDigraph::directed(3, &[(0, 1, 3.0)]).unwrap();
        assert!(matches!(degree_metric(&g), Err(Error::IsolatedVertex(2))));
    }

    #[test]
    fn edge_list_roundtrip_exact() {
        let g = generate_rgg(15, 9).unwrap();
        let back = WeightedDigraph::from_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn edge_list_errors() {
        assert!(WeightedDigraph::from_edge_list("").is_err());
        assert!(WeightedDigraph::from_edge_list("2 1\n0 1 1.0\n").is_err());
        assert!(WeightedDigraph::from_edge_list("2 2\n1 2 1.0\n").is_err());
        assert!(WeightedDigraph::from_edge_list("2 1\n1 2 x\n").is_err());
    }

    #[test]
    fn metric_rejects_nonpositive() {
        assert!(DiagonalMetric::new(vec![1.0, 0.0]).is_err());
        let q = DiagonalMetric::new(vec![3.0, 0.5, 2.0]).unwrap();
        assert_eq!(q.d_min(), 0.5);
    }
}
