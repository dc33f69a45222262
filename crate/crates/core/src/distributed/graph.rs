use std::collections::{BTreeSet, VecDeque};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linear::LinearMap;

/// Connected undirected graph without self loops.
///
/// Nodes are `0..N`. Each edge is stored once as `(n, m)` with `n < m`, and
/// edges are sorted lexicographically; that order fixes the layout of `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    /// `(neighbor, edge index)` per node, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl AgentGraph {
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::Graph("at least two agents are needed".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Graph(format!("self loop at node {a}")));
            }
            if a >= nodes || b >= nodes {
                return Err(Error::Graph(format!("edge ({a}, {b}) references a node outside 0..{nodes}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); nodes];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let g = Self {
            nodes,
            edges,
            adjacency,
        };
        g.check_connected()?;
        Ok(g)
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(n) => Err(Error::Graph(format!("node {n} is unreachable; the graph is not connected"))),
            None => Ok(()),
        }
    }

    /// Parses one `n m` pair per line with 1-indexed nodes. Blank lines and
    /// lines starting with `#` are skipped. The node count is the largest id.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut nodes = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Graph(format!("line {}: {e}", i + 1)))?;
            let [a, b] = ids[..] else {
                return Err(Error::Graph(format!("line {}: expected two node ids", i + 1)));
            };
            if a == 0 || b == 0 {
                return Err(Error::Graph(format!("line {}: node ids are 1-indexed", i + 1)));
            }
            nodes = nodes.max(a).max(b);
            edges.push((a - 1, b - 1));
        }
        Self::new(nodes, edges)
    }

    /// Writes the graph in the edge-list format read by
    /// [`parse_edge_list`](Self::parse_edge_list).
    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(a, b)| format!("{} {}\n", a + 1, b + 1)).collect()
    }

    pub fn ring(nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Self::path(nodes);
        }
        Self::new(nodes, (0..nodes).map(|i| (i, (i + 1) % nodes)))
    }

    pub fn path(nodes: usize) -> Result<Self> {
        Self::new(nodes, (1..nodes).map(|i| (i - 1, i)))
    }

    /// Node 0 is the hub.
    pub fn star(nodes: usize) -> Result<Self> {
        Self::new(nodes, (1..nodes).map(|i| (0, i)))
    }

    pub fn complete(nodes: usize) -> Result<Self> {
        Self::new(nodes, (0..nodes).flat_map(|a| (a + 1..nodes).map(move |b| (a, b))))
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, n: usize) -> usize {
        self.adjacency[n].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// `(neighbor, edge index)` pairs of node `n`.
    pub fn neighbors(&self, n: usize) -> &[(usize, usize)] {
        &self.adjacency[n]
    }

    /// Row of the dual array holding `y_ε(n)` for edge `e`.
    pub fn dual_row(&self, e: usize, n: usize) -> usize {
        let (a, b) = self.edges[e];
        debug_assert!(n == a || n == b);
        if n == a {
            2 * e
        } else {
            2 * e + 1
        }
    }
}

/// `D x = (x_n, x_m)_{ε = {n,m}}`, mapping `X^N` to `X^{2|E|}`.
///
/// Blocks are laid out node by node on the input side and edge by edge, lower
/// endpoint first, on the output side. `D*D = diag(d_n)`.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    graph: AgentGraph,
    dim: usize,
}

impl EdgeMap {
    pub fn new(graph: AgentGraph, dim: usize) -> Self {
        Self { graph, dim }
    }

    pub fn graph(&self) -> &AgentGraph {
        &self.graph
    }
}

impl LinearMap for EdgeMap {
    fn input_dim(&self) -> usize {
        self.graph.node_count() * self.dim
    }

    fn output_dim(&self) -> usize {
        2 * self.graph.edge_count() * self.dim
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let d = self.dim;
        let mut out = Array1::zeros(self.output_dim());
        for (e, &(a, b)) in self.graph.edges().iter().enumerate() {
            for i in 0..d {
                out[2 * e * d + i] = x[a * d + i];
                out[(2 * e + 1) * d + i] = x[b * d + i];
            }
        }
        out
    }

    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        let d = self.dim;
        let mut out = Array1::zeros(self.input_dim());
        for (e, &(a, b)) in self.graph.edges().iter().enumerate() {
            for i in 0..d {
                out[a * d + i] += y[2 * e * d + i];
                out[b * d + i] += y[(2 * e + 1) * d + i];
            }
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        (self.graph.degrees().into_iter().max().unwrap_or(0) as f64).sqrt()
    }

    fn gram_diagonal(&self) -> Option<Array1<f64>> {
        let deg = self.graph.degrees();
        Some(Array1::from_shape_fn(self.input_dim(), |i| deg[i / self.dim] as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn single_edge_map() {
        let g = AgentGraph::path(2).unwrap();
        let d = EdgeMap::new(g, 1);
        assert_eq!(d.apply(array![1.0, 2.0].view()), array![1.0, 2.0]);
        assert_eq!(d.gram_diagonal().unwrap(), array![1.0, 1.0]);
    }

    #[test]
    fn ring_of_three_is_two_regular() {
        let g = AgentGraph::ring(3).unwrap();
        assert_eq!(g.degrees(), vec![2, 2, 2]);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let d = EdgeMap::new(g, 2);
        // D*D e_i recovers the gram diagonal column by column
        for i in 0..6 {
            let mut e = Array1::zeros(6);
            e[i] = 1.0;
            let col = d.adjoint(d.apply(e.view()).view());
            let mut want = Array1::zeros(6);
            want[i] = 2.0;
            assert_eq!(col, want);
        }
    }

    #[test]
    fn adjoint_identity_on_random_graph() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3), (1, 5), (2, 4)];
        let g = AgentGraph::new(6, edges).unwrap();
        let d = EdgeMap::new(g.clone(), 3);
        let mut r = rng::seeded(6);
        for _ in 0..20 {
            let x = Array1::from_shape_fn(d.input_dim(), |_| r.random_range(-1.0..1.0));
            let y = Array1::from_shape_fn(d.output_dim(), |_| r.random_range(-1.0..1.0));
            let lhs = d.apply(x.view()).dot(&y);
            let rhs = x.dot(&d.adjoint(y.view()));
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let deg = g.degrees();
        assert_eq!(deg.iter().sum::<usize>(), 2 * g.edge_count());
        let gram = d.gram_diagonal().unwrap();
        for n in 0..6 {
            assert_eq!(gram[3 * n], deg[n] as f64);
        }
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        assert!(matches!(AgentGraph::new(3, [(0, 0), (1, 2)]), Err(Error::Graph(_))));
        assert!(matches!(AgentGraph::new(4, [(0, 1), (2, 3)]), Err(Error::Graph(_))));
        assert!(matches!(AgentGraph::new(2, [(0, 2)]), Err(Error::Graph(_))));
        assert!(matches!(AgentGraph::new(2, [(0, 1), (1, 0)]), Err(Error::Graph(_))));
        assert!(AgentGraph::new(1, []).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = AgentGraph::parse_edge_list("# ring\n1 2\n2 3\n\n3 1\n").unwrap();
        assert_eq!(g, AgentGraph::ring(3).unwrap());
        assert_eq!(AgentGraph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(AgentGraph::parse_edge_list("0 1\n").is_err());
        assert!(AgentGraph::parse_edge_list("1 2 3\n").is_err());
        assert!(AgentGraph::parse_edge_list("1 x\n").is_err());
    }

    #[test]
    fn helper_shapes() {
        assert_eq!(AgentGraph::star(4).unwrap().degrees(), vec![3, 1, 1, 1]);
        assert_eq!(AgentGraph::complete(4).unwrap().edge_count(), 6);
        assert_eq!(AgentGraph::path(4).unwrap().degrees(), vec![1, 2, 2, 1]);
        assert_eq!(AgentGraph::ring(10).unwrap().edge_count(), 10);
    }
}
