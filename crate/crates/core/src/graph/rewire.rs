//! Degree-preserving double-edge swaps and assortativity annealing.

use std::collections::{HashSet, VecDeque};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};
use crate::rng::{self, Rng};

pub(crate) struct Swap {
    i: usize,
    j: usize,
    old: [(usize, usize); 2],
    new: [(usize, usize); 2],
}

/// Mutable edge list used while swapping; always simple.
pub(crate) struct SwapGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    set: HashSet<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl SwapGraph {
    pub(crate) fn new(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let set: HashSet<_> = edges.iter().copied().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        SwapGraph { n, edges, set, adj }
    }

    pub(crate) fn from_graph(g: &Graph) -> Self {
        Self::new(g.n(), g.edges().to_vec())
    }

    pub(crate) fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Picks two distinct edges `(a,b)`, `(c,d)` and proposes `(a,d)`, `(c,b)`
    /// (with a random orientation of the second edge). Returns `None` if the
    /// proposal would create a self-loop or a multi-edge.
    pub(crate) fn propose(&self, rng: &mut Rng) -> Option<Swap> {
        let m = self.edges.len();
        if m < 2 {
            return None;
        }
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m - 1);
        let j = if j >= i { j + 1 } else { j };
        let (a, b) = self.edges[i];
        let (mut c, mut d) = self.edges[j];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        if a == d || c == b {
            return None;
        }
        let (e1, e2) = (key(a, d), key(c, b));
        if e1 == e2 || self.set.contains(&e1) || self.set.contains(&e2) {
            return None;
        }
        Some(Swap {
            i,
            j,
            old: [self.edges[i], self.edges[j]],
            new: [e1, e2],
        })
    }

    fn replace(&mut self, i: usize, j: usize, from: [(usize, usize); 2], to: [(usize, usize); 2]) {
        for (u, v) in from {
            self.set.remove(&(u, v));
            remove_one(&mut self.adj[u], v);
            remove_one(&mut self.adj[v], u);
        }
        for (u, v) in to {
            self.set.insert((u, v));
            self.adj[u].push(v);
            self.adj[v].push(u);
        }
        self.edges[i] = to[0];
        self.edges[j] = to[1];
    }

    pub(crate) fn apply(&mut self, s: &Swap) {
        self.replace(s.i, s.j, s.old, s.new);
    }

    pub(crate) fn revert(&mut self, s: &Swap) {
        self.replace(s.i, s.j, s.new, s.old);
    }

    pub(crate) fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    pub(crate) fn into_graph(self) -> Graph {
        Graph::from_edges_erased(self.n, self.edges)
    }

    fn to_graph(&self) -> Graph {
        Graph::from_edges_erased(self.n, self.edges.iter().copied())
    }
}

fn remove_one(list: &mut Vec<usize>, v: usize) {
    if let Some(pos) = list.iter().position(|&x| x == v) {
        list.swap_remove(pos);
    }
}

/// Edge-end degree sums that determine Newman's assortativity coefficient.
/// Degree-preserving swaps change only `sum_prod`.
#[derive(Debug, Clone, Copy)]
struct EdgeMoments {
    m: f64,
    sum_half: f64,
    sum_sq_half: f64,
    sum_prod: f64,
}

impl EdgeMoments {
    fn of(edges: &[(usize, usize)], degree: &[usize]) -> Self {
        let mut s = EdgeMoments {
            m: edges.len() as f64,
            sum_half: 0.0,
            sum_sq_half: 0.0,
            sum_prod: 0.0,
        };
        for &(u, v) in edges {
            let (j, k) = (degree[u] as f64, degree[v] as f64);
            s.sum_half += 0.5 * (j + k);
            s.sum_sq_half += 0.5 * (j * j + k * k);
            s.sum_prod += j * k;
        }
        s
    }

    fn rho(&self, sum_prod: f64) -> Option<f64> {
        if self.m == 0.0 {
            return None;
        }
        let mean = self.sum_half / self.m;
        let denom = self.sum_sq_half / self.m - mean * mean;
        if denom.abs() < 1e-12 {
            return None;
        }
        Some((sum_prod / self.m - mean * mean) / denom)
    }
}

/// Newman's degree assortativity; `None` when every edge end has the same
/// degree (e.g. regular graphs) or the graph has no edges.
pub fn degree_assortativity(g: &Graph) -> Option<f64> {
    let m = EdgeMoments::of(g.edges(), &g.degrees());
    m.rho(m.sum_prod)
}

/// Simulated-annealing parameters for [`rewire_to_assortativity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    /// Multiplicative temperature decay applied after every proposal.
    pub cooling: f64,
    pub max_proposals: usize,
    /// Stop once `|ρ − target|` is at most this.
    pub tolerance: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temperature: 1e-4,
            cooling: 0.9995,
            max_proposals: 2_000_000,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rewired {
    pub graph: Graph,
    pub achieved: f64,
    pub accepted_swaps: usize,
}

/// Rewires `g` by degree-preserving double-edge swaps towards the target
/// degree assortativity. Metropolis acceptance on `|ρ − target|` with a
/// geometric temperature decay; swaps that disconnect the graph are undone.
pub fn rewire_to_assortativity(
    g: &Graph,
    target: f64,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<Rewired, GraphError> {
    let components = g.component_count();
    if components > 1 {
        return Err(GraphError::NotConnected { components });
    }
    let degree = g.degrees();
    let moments = EdgeMoments::of(g.edges(), &degree);
    let unreachable = |achieved: f64, best: Graph| GraphError::TargetUnreachable {
        target,
        achieved,
        best: Box::new(best),
    };
    let Some(start) = moments.rho(moments.sum_prod) else {
        return Err(unreachable(f64::NAN, g.clone()));
    };
    if (start - target).abs() <= schedule.tolerance {
        return Ok(Rewired {
            graph: g.clone(),
            achieved: start,
            accepted_swaps: 0,
        });
    }

    let mut rng = rng::stream(seed, &[rng::tag::REWIRE]);
    let mut sg = SwapGraph::from_graph(g);
    let mut sum_prod = moments.sum_prod;
    let mut energy = (start - target).abs();
    let mut best = (energy, start, g.clone());
    let mut temperature = schedule.initial_temperature;
    let mut accepted = 0;

    for _ in 0..schedule.max_proposals {
        temperature *= schedule.cooling;
        let Some(swap) = sg.propose(&mut rng) else {
            continue;
        };
        let d = |(u, v): (usize, usize)| (degree[u] * degree[v]) as f64;
        let delta = d(swap.new[0]) + d(swap.new[1]) - d(swap.old[0]) - d(swap.old[1]);
        if delta == 0.0 {
            continue;
        }
        let candidate = sum_prod + delta;
        let rho = moments.rho(candidate).unwrap_or(start);
        let new_energy = (rho - target).abs();
        let d_energy = new_energy - energy;
        let accept = d_energy <= 0.0 || (temperature > 0.0 && rng.random::<f64>() < (-d_energy / temperature).exp());
        if !accept {
            continue;
        }
        sg.apply(&swap);
        if !sg.is_connected() {
            sg.revert(&swap);
            continue;
        }
        sum_prod = candidate;
        energy = new_energy;
        accepted += 1;
        if energy < best.0 {
            best = (energy, rho, sg.to_graph());
        }
        if energy <= schedule.tolerance {
            return Ok(Rewired {
                graph: sg.into_graph(),
                achieved: rho,
                accepted_swaps: accepted,
            });
        }
    }
    Err(unreachable(best.1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphModel};

    fn star_swaps_possible(n: usize) -> usize {
        // exhaustive: every pair of star edges, both orientations
        let g = generate(&GraphModel::Star, n, 0).unwrap();
        let sg = SwapGraph::from_graph(&g);
        let mut valid = 0;
        for i in 0..sg.edges.len() {
            for j in 0..sg.edges.len() {
                if i == j {
                    continue;
                }
                let (a, b) = sg.edges[i];
                for (c, d) in [sg.edges[j], (sg.edges[j].1, sg.edges[j].0)] {
                    let ok = a != d
                        && c != b
                        && !sg.set.contains(&key(a, d))
                        && !sg.set.contains(&key(c, b))
                        && key(a, d) != key(c, b);
                    valid += ok as usize;
                }
            }
        }
        valid
    }

    #[test]
    fn star_admits_no_swaps() {
        assert_eq!(star_swaps_possible(5), 0);
        let star = generate(&GraphModel::Star, 5, 0).unwrap();
        assert_eq!(degree_assortativity(&star), Some(-1.0));
        let schedule = AnnealSchedule {
            max_proposals: 10_000,
            ..Default::default()
        };
        for target in [-0.5, 0.0, 0.5] {
            match rewire_to_assortativity(&star, target, &schedule, 1) {
                Err(GraphError::TargetUnreachable { achieved, best, .. }) => {
                    assert_eq!(achieved, -1.0);
                    assert_eq!(*best, star);
                }
                other => panic!("expected TargetUnreachable, got {other:?}"),
            }
        }
    }

    #[test]
    fn current_target_needs_no_swaps() {
        let g = generate(&GraphModel::BarabasiAlbert { m: 2 }, 200, 4).unwrap();
        let rho = degree_assortativity(&g).unwrap();
        let out = rewire_to_assortativity(&g, rho, &AnnealSchedule::default(), 0).unwrap();
        assert_eq!(out.accepted_swaps, 0);
        assert_eq!(out.graph, g);
    }

    #[test]
    fn rewiring_reaches_target_and_keeps_degrees() {
        let (g, _) =
            crate::graph::generate_connected(&GraphModel::ErMeanDegree { mean_degree: 6.0 }, 300, 2, 50).unwrap();
        for target in [-0.2, 0.2] {
            let out = rewire_to_assortativity(&g, target, &AnnealSchedule::default(), 3).unwrap();
            assert!((out.achieved - target).abs() <= 0.01);
            assert!((degree_assortativity(&out.graph).unwrap() - out.achieved).abs() < 1e-9);
            assert_eq!(out.graph.degrees(), g.degrees());
            assert!(out.graph.is_connected());
        }
    }

    #[test]
    fn regular_graphs_have_undefined_assortativity() {
        let g = generate(&GraphModel::Cycle, 10, 0).unwrap();
        assert_eq!(degree_assortativity(&g), None);
        assert!(matches!(
            rewire_to_assortativity(&g, 0.1, &AnnealSchedule::default(), 0),
            Err(GraphError::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn disconnected_input_rejected() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            rewire_to_assortativity(&g, 0.0, &AnnealSchedule::default(), 0),
            Err(GraphError::NotConnected { components: 2 })
        ));
    }
}
