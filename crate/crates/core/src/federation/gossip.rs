//! Network-size estimation by extrema propagation: nodes gossip element-wise
//! minima of exponential variates. The minimum of `n` Exp(1) draws is
//! Exp(n), so after flooding, `(m − 1) / Σ minima` is an unbiased estimate
//! of `n` from `m` samples.

use rand_distr::{Distribution, Exp1};

use super::FederationError;
use crate::graph::Graph;
use crate::rng;

/// Per-node size estimates after `rounds` synchronous exchange rounds.
pub fn estimate_n_gossip(g: &Graph, m_samples: usize, rounds: usize, seed: u64) -> Result<Vec<f64>, FederationError> {
    if m_samples < 2 {
        return Err(FederationError::InvalidParameter(format!(
            "extrema propagation needs at least 2 samples, got {m_samples}"
        )));
    }
    let n = g.n();
    let mut state: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, &[rng::tag::GOSSIP, i as u64]);
            (0..m_samples).map(|_| Exp1.sample(&mut r)).collect()
        })
        .collect();
    for _ in 0..rounds {
        let prev = state.clone();
        let mut changed = false;
        for (i, mine) in state.iter_mut().enumerate() {
            for &j in g.neighbours(i) {
                for (a, &b) in mine.iter_mut().zip(&prev[j]) {
                    if b < *a {
                        *a = b;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(state
        .iter()
        .map(|mins| (m_samples - 1) as f64 / mins.iter().sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphModel};

    #[test]
    fn single_node() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let mut errs: Vec<f64> = (0..20)
            .map(|s| (estimate_n_gossip(&g, 1000, 0, s).unwrap()[0] - 1.0).abs())
            .collect();
        errs.sort_by(f64::total_cmp);
        assert!(errs.iter().all(|&e| e < 0.3));
    }

    #[test]
    fn complete_graph_one_round() {
        let g = generate(&GraphModel::Complete, 64, 0).unwrap();
        let mut ests = Vec::new();
        for seed in 0..50 {
            let e = estimate_n_gossip(&g, 1000, 1, seed).unwrap();
            assert!(e.iter().all(|&x| x == e[0]));
            ests.push(e[0]);
        }
        ests.sort_by(f64::total_cmp);
        let median = 0.5 * (ests[24] + ests[25]);
        assert!((median / 64.0 - 1.0).abs() < 0.15);
    }

    #[test]
    fn path_floods_in_diameter_rounds() {
        let g = generate(&GraphModel::Path, 8, 0).unwrap();
        let e = estimate_n_gossip(&g, 200, 7, 3).unwrap();
        assert!(e.iter().all(|&x| x == e[0]));
        let early = estimate_n_gossip(&g, 200, 3, 3).unwrap();
        assert!(early.iter().any(|&x| x != early[0]));
    }

    #[test]
    fn too_few_samples() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(estimate_n_gossip(&g, 1, 1, 0).is_err());
    }
}
