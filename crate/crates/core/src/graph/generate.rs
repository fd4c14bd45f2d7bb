use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::rewire::SwapGraph;
use super::{Graph, GraphError};
use crate::rng::{self, Rng};

/// Random and deterministic network families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphModel {
    Complete,
    /// Erdős–Rényi `G(n, p)`.
    ErGnp {
        p: f64,
    },
    /// `G(n, p)` with `p = mean_degree / (n − 1)`, convenient for size sweeps.
    ErMeanDegree {
        mean_degree: f64,
    },
    /// Uniform simple `k`-regular graph (stub matching, repair, then
    /// double-edge-swap mixing).
    KRegular {
        k: usize,
    },
    /// Preferential attachment seeded by a complete graph on `m` nodes.
    BarabasiAlbert {
        m: usize,
    },
    /// Erased configuration model with `p(k) ∝ k^−γ` on `[k_min, n − 1]`.
    ConfigPowerlaw {
        gamma: f64,
        k_min: usize,
    },
    /// Periodic lattice with `side^dim` nodes.
    TorusLattice {
        dim: usize,
        side: usize,
    },
    Star,
    Path,
    Cycle,
}

impl GraphModel {
    pub fn family_name(&self) -> &'static str {
        match self {
            GraphModel::Complete => "complete",
            GraphModel::ErGnp { .. } => "er_gnp",
            GraphModel::ErMeanDegree { .. } => "er_mean_degree",
            GraphModel::KRegular { .. } => "k_regular",
            GraphModel::BarabasiAlbert { .. } => "barabasi_albert",
            GraphModel::ConfigPowerlaw { .. } => "config_powerlaw",
            GraphModel::TorusLattice { .. } => "torus_lattice",
            GraphModel::Star => "star",
            GraphModel::Path => "path",
            GraphModel::Cycle => "cycle",
        }
    }

    /// Checks family preconditions for `n` nodes without generating.
    pub fn check(&self, n: usize) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InfeasibleParameters(msg));
        match *self {
            GraphModel::ErGnp { p } if !(0.0..=1.0).contains(&p) => bad(format!("p = {p} outside [0, 1]")),
            GraphModel::ErMeanDegree { mean_degree }
                if !(mean_degree >= 0.0) || (n > 1 && mean_degree > (n - 1) as f64) =>
            {
                bad(format!("mean degree {mean_degree} infeasible for n = {n}"))
            }
            GraphModel::KRegular { k } if k >= n.max(1) && !(k == 0 && n == 0) => {
                bad(format!("k = {k} must be below n = {n}"))
            }
            GraphModel::KRegular { k } if (n * k) % 2 == 1 => bad(format!("n·k = {} is odd", n * k)),
            GraphModel::BarabasiAlbert { m: 0 } => bad("m must be at least 1".into()),
            GraphModel::BarabasiAlbert { m } if n < m => bad(format!("n = {n} below seed clique size m = {m}")),
            GraphModel::ConfigPowerlaw { gamma, .. } if !(gamma > 2.0) => bad(format!("gamma = {gamma} must exceed 2")),
            GraphModel::ConfigPowerlaw { k_min, .. } if k_min == 0 || k_min >= n => {
                bad(format!("k_min = {k_min} must be in [1, n)"))
            }
            GraphModel::TorusLattice { dim, side } => {
                if dim == 0 || side < 3 {
                    return bad(format!("torus needs dim ≥ 1 and side ≥ 3 (got {dim}, {side})"));
                }
                match side.checked_pow(dim as u32) {
                    Some(size) if size == n => Ok(()),
                    _ => bad(format!("torus side^dim = {side}^{dim} does not equal n = {n}")),
                }
            }
            GraphModel::Cycle if n < 3 => bad(format!("cycle needs n ≥ 3 (got {n})")),
            _ => Ok(()),
        }
    }
}

/// Generates a graph of the requested family. Connectivity is not enforced;
/// see [`generate_connected`].
pub fn generate(model: &GraphModel, n: usize, seed: u64) -> Result<Graph, GraphError> {
    model.check(n)?;
    let mut rng = rng::stream(seed, &[rng::tag::GRAPH]);
    let g = match *model {
        GraphModel::Complete => complete(n),
        GraphModel::ErGnp { p } => gnp(n, p, &mut rng),
        GraphModel::ErMeanDegree { mean_degree } => {
            let p = if n > 1 { mean_degree / (n - 1) as f64 } else { 0.0 };
            gnp(n, p, &mut rng)
        }
        GraphModel::KRegular { k } => k_regular(n, k, &mut rng)?,
        GraphModel::BarabasiAlbert { m } => barabasi_albert(n, m, &mut rng),
        GraphModel::ConfigPowerlaw { gamma, k_min } => config_powerlaw(n, gamma, k_min, &mut rng),
        GraphModel::TorusLattice { dim, side } => torus(dim, side),
        GraphModel::Star => Graph::from_edges_erased(n, (1..n).map(|v| (0, v))),
        GraphModel::Path => Graph::from_edges_erased(n, (1..n).map(|v| (v - 1, v))),
        GraphModel::Cycle => Graph::from_edges_erased(n, (0..n).map(|v| (v, (v + 1) % n))),
    };
    Ok(g)
}

/// Generates graphs with successive derived seeds until one is connected.
/// Returns the graph and the attempt index that produced it.
pub fn generate_connected(
    model: &GraphModel,
    n: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(Graph, usize), GraphError> {
    let mut components = 0;
    for attempt in 0..max_attempts.max(1) {
        let s = if attempt == 0 {
            seed
        } else {
            rng::derive(seed, &[attempt as u64])
        };
        let g = generate(model, n, s)?;
        components = g.component_count();
        if components <= 1 {
            return Ok((g, attempt));
        }
    }
    Err(GraphError::NotConnected { components })
}

fn complete(n: usize) -> Graph {
    let adj = (0..n).map(|u| (0..n).filter(|&v| v != u).collect()).collect();
    Graph::from_adjacency(adj)
}

/// Geometric skipping over the lower triangle (Batagelj–Brandes).
fn gnp(n: usize, p: f64, rng: &mut Rng) -> Graph {
    if p <= 0.0 || n < 2 {
        return Graph::from_edges_erased(n, std::iter::empty());
    }
    if p >= 1.0 {
        return complete(n);
    }
    let log_q = (1.0 - p).ln();
    let mut edges = Vec::new();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    Graph::from_edges_erased(n, edges)
}

fn stub_match(degrees: &[usize], rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &k)| std::iter::repeat_n(v, k))
        .collect();
    stubs.shuffle(rng);
    stubs.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn k_regular(n: usize, k: usize, rng: &mut Rng) -> Result<Graph, GraphError> {
    if k == 0 {
        return Ok(Graph::from_edges_erased(n, std::iter::empty()));
    }
    // Swap repair stalls on dense targets: build the sparse complement instead.
    if 2 * k > n - 1 {
        let complement = k_regular(n, n - 1 - k, rng)?;
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !complement.has_edge(u, v))
            .collect();
        return Ok(Graph::from_edges_erased(n, edges));
    }
    let mut edges = stub_match(&vec![k; n], rng);
    let mut mult: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, v) in &edges {
        *mult.entry(key(u, v)).or_insert(0) += 1;
    }
    let is_bad = |mult: &HashMap<(usize, usize), usize>, (u, v): (usize, usize)| u == v || mult[&key(u, v)] > 1;

    // Repair loops and multi-edges by swapping with random edges; every
    // accepted swap strictly lowers the number of bad edges.
    let budget = 1000 * edges.len() + 10_000;
    let mut attempts = 0;
    while let Some(i) = edges.iter().position(|&e| is_bad(&mult, e)) {
        attempts += 1;
        if attempts > budget {
            return Err(GraphError::InfeasibleParameters(format!(
                "could not realise a simple {k}-regular graph on {n} nodes"
            )));
        }
        let j = rng.random_range(0..edges.len());
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (mut c, mut d) = edges[j];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        let (e1, e2) = ((a, c), (b, d));
        if a == c || b == d || key(a, c) == key(b, d) {
            continue;
        }
        if mult.get(&key(e1.0, e1.1)).copied().unwrap_or(0) > 0 || mult.get(&key(e2.0, e2.1)).copied().unwrap_or(0) > 0
        {
            continue;
        }
        for old in [edges[i], edges[j]] {
            let m = mult.get_mut(&key(old.0, old.1)).expect("edge present");
            *m -= 1;
        }
        edges[i] = e1;
        edges[j] = e2;
        *mult.entry(key(e1.0, e1.1)).or_insert(0) += 1;
        *mult.entry(key(e2.0, e2.1)).or_insert(0) += 1;
    }

    let mut sg = SwapGraph::new(n, edges.into_iter().map(|(u, v)| key(u, v)).collect());
    let sweeps = 10 * sg.num_edges();
    for _ in 0..sweeps {
        if let Some(swap) = sg.propose(rng) {
            sg.apply(&swap);
        }
    }
    Ok(sg.into_graph())
}

fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m * (m - 1) / 2 + m * n.saturating_sub(m));
    // One entry per edge endpoint: uniform draws are degree-proportional.
    let mut endpoints: Vec<usize> = Vec::new();
    for u in 0..m {
        for v in (u + 1)..m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for new in m..n {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..new)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new));
            endpoints.extend([t, new]);
        }
    }
    Graph::from_edges_erased(n, edges)
}

fn config_powerlaw(n: usize, gamma: f64, k_min: usize, rng: &mut Rng) -> Graph {
    let k_max = n - 1;
    let mut cdf = Vec::with_capacity(k_max - k_min + 1);
    let mut acc = 0.0;
    for k in k_min..=k_max {
        acc += (k as f64).powf(-gamma);
        cdf.push(acc);
    }
    let draw = |rng: &mut Rng| {
        let u = rng.random::<f64>() * acc;
        k_min + cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    };
    let mut degrees: Vec<usize> = (0..n).map(|_| draw(rng)).collect();
    while degrees.iter().sum::<usize>() % 2 == 1 {
        let i = rng.random_range(0..n);
        degrees[i] = draw(rng);
    }
    Graph::from_edges_erased(n, stub_match(&degrees, rng))
}

fn torus(dim: usize, side: usize) -> Graph {
    let n = side.pow(dim as u32);
    let mut edges = Vec::with_capacity(n * dim);
    for v in 0..n {
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (v / stride) % side;
            let next = v - coord * stride + ((coord + 1) % side) * stride;
            edges.push((v, next));
            stride *= side;
        }
    }
    Graph::from_edges_erased(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph() {
        let g = generate(&GraphModel::Complete, 4, 0).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert!(g.degrees().iter().all(|&k| k == 3));
    }

    #[test]
    fn k_regular_degrees() {
        for seed in 0..5 {
            for (n, k) in [(64, 4), (256, 32), (17, 2), (10, 9)] {
                let g = generate(&GraphModel::KRegular { k }, n, seed).unwrap();
                assert!(g.degrees().iter().all(|&d| d == k), "n={n} k={k}");
                assert_eq!(g.num_edges(), n * k / 2);
            }
        }
    }

    #[test]
    fn k_regular_rejects_odd_stub_count() {
        assert!(matches!(
            generate(&GraphModel::KRegular { k: 3 }, 7, 0),
            Err(GraphError::InfeasibleParameters(_))
        ));
        assert!(generate(&GraphModel::KRegular { k: 8 }, 8, 0).is_err());
    }

    #[test]
    fn barabasi_albert_edge_count() {
        // seed clique K_m plus m edges per subsequent node
        for (n, m) in [(32, 8), (100, 2), (10, 1), (8, 8)] {
            let g = generate(&GraphModel::BarabasiAlbert { m }, n, 5).unwrap();
            assert_eq!(g.num_edges(), m * (m - 1) / 2 + m * (n - m), "n={n} m={m}");
            assert!(g.is_connected());
        }
    }

    #[test]
    fn gnp_density() {
        let n = 1000;
        let p = 0.01;
        let g = generate(&GraphModel::ErGnp { p }, n, 11).unwrap();
        let expected = p * (n * (n - 1) / 2) as f64;
        let sd = expected.sqrt();
        assert!((g.num_edges() as f64 - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn gnp_extremes() {
        assert_eq!(generate(&GraphModel::ErGnp { p: 0.0 }, 10, 0).unwrap().num_edges(), 0);
        assert_eq!(generate(&GraphModel::ErGnp { p: 1.0 }, 10, 0).unwrap().num_edges(), 45);
    }

    #[test]
    fn torus_is_2d_regular() {
        let g = generate(&GraphModel::TorusLattice { dim: 2, side: 5 }, 25, 0).unwrap();
        assert!(g.degrees().iter().all(|&k| k == 4));
        assert!(g.is_connected());
        assert!(generate(&GraphModel::TorusLattice { dim: 2, side: 5 }, 24, 0).is_err());
    }

    #[test]
    fn powerlaw_is_simple_and_heavy_tailed() {
        let g = generate(&GraphModel::ConfigPowerlaw { gamma: 2.5, k_min: 2 }, 2000, 1).unwrap();
        let degrees = g.degrees();
        let max = *degrees.iter().max().unwrap();
        let mean = degrees.iter().sum::<usize>() as f64 / 2000.0;
        assert!(max as f64 > 8.0 * mean);
        assert!(generate(&GraphModel::ConfigPowerlaw { gamma: 2.0, k_min: 2 }, 10, 1).is_err());
    }

    #[test]
    fn supercritical_er_mostly_connected() {
        let connected = (0..100)
            .filter(|&s| {
                generate(&GraphModel::ErGnp { p: 8.0 / 1023.0 }, 1024, s)
                    .unwrap()
                    .is_connected()
            })
            .count();
        // P(isolated node) ≈ 1024·e^-8 ≈ 0.34 per graph, so a few failures are expected.
        assert!(connected >= 50, "{connected}");
    }

    #[test]
    fn generate_connected_retries() {
        let (g, _) = generate_connected(&GraphModel::ErMeanDegree { mean_degree: 8.0 }, 4096, 3, 100).unwrap();
        assert!(g.is_connected());
    }

    #[test]
    fn generation_is_deterministic() {
        let m = GraphModel::KRegular { k: 6 };
        assert_eq!(generate(&m, 50, 9).unwrap(), generate(&m, 50, 9).unwrap());
        assert_ne!(generate(&m, 50, 9).unwrap(), generate(&m, 50, 10).unwrap());
    }
}
