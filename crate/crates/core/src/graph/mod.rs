//! Undirected simple communication networks.

mod generate;
mod io;
mod rewire;

use std::collections::{BTreeMap, VecDeque};

pub use generate::{generate, generate_connected, GraphModel};
pub use io::{load_edge_list, parse_edge_list, save_edge_list, write_edge_list};
pub use rewire::{degree_assortativity, rewire_to_assortativity, AnnealSchedule, Rewired};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
    #[error("node id {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop on node {node} (line {line})")]
    SelfLoop { node: usize, line: usize },
    #[error("duplicate edge {{{u}, {v}}} (line {line})")]
    DuplicateEdge { u: usize, v: usize, line: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("graph is not connected ({components} components)")]
    NotConnected { components: usize },
    #[error("assortativity target {target} unreachable, best achieved {achieved}")]
    TargetUnreachable {
        target: f64,
        achieved: f64,
        best: Box<Graph>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An immutable undirected simple graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; adjacency lists
/// are sorted as well, so two graphs with the same edge set compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range ids.
    /// The `line` reported in errors is the 1-based index into `edges`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n];
        for (idx, &(u, v)) in edges.iter().enumerate() {
            let line = idx + 1;
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u, line });
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let v = w[0];
                let line = edges
                    .iter()
                    .enumerate()
                    .filter(|(_, &(a, b))| (a.min(b), a.max(b)) == (u.min(v), u.max(v)))
                    .nth(1)
                    .map(|(i, _)| i + 1)
                    .unwrap_or(0);
                return Err(GraphError::DuplicateEdge {
                    u: u.min(v),
                    v: u.max(v),
                    line,
                });
            }
        }
        Ok(Self::from_adjacency(adj))
    }

    /// Builds from sorted, duplicate-free, symmetric adjacency lists.
    pub(crate) fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        let n = adj.len();
        let mut edges = Vec::with_capacity(adj.iter().map(Vec::len).sum::<usize>() / 2);
        for (u, list) in adj.iter().enumerate() {
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]));
            edges.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        Graph { n, edges, adj }
    }

    /// Builds from an edge list known to be simple; duplicate pairs and
    /// self-loops are dropped (erased projection).
    pub(crate) fn from_edges_erased(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self::from_adjacency(adj)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }

    /// True iff the graph has a single connected component. The empty graph
    /// counts as connected.
    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Breadth-first hop distances from `source`; unreachable nodes are `None`.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::from([source]);
        dist[source] = Some(0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Exact diameter by all-pairs BFS; `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.n {
            for d in self.bfs_distances(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Degree moments of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub mean_degree: f64,
    /// Mean excess degree `⟨k²⟩/⟨k⟩ − 1`; zero for edgeless graphs.
    pub excess_mean: f64,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn degree_stats(g: &Graph) -> DegreeStats {
    let mut histogram = BTreeMap::new();
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in g.degrees() {
        *histogram.entry(k).or_insert(0) += 1;
        s1 += k as f64;
        s2 += (k * k) as f64;
    }
    let n = g.n().max(1) as f64;
    let mean = s1 / n;
    let excess_mean = if s1 > 0.0 { s2 / s1 - 1.0 } else { 0.0 };
    DegreeStats {
        mean_degree: mean,
        excess_mean,
        histogram,
    }
}
