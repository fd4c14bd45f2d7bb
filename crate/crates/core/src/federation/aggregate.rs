use serde::{Deserialize, Serialize};

use super::FederationError;
use crate::graph::Graph;
use crate::neural::Scalar;

/// Data-size-weighted average over a closed neighbourhood: every participant
/// `j` (the aggregating node included) gets weight `|D_j| / Σ |D|`.
/// Accumulates in f64 in the order given.
pub fn decavg_weighted<T: Scalar>(participants: &[(&[T], f64)]) -> Result<Vec<T>, FederationError> {
    let (first, _) = participants
        .first()
        .ok_or_else(|| FederationError::InvalidParameter("aggregation needs at least one participant".into()))?;
    let len = first.len();
    if let Some((p, _)) = participants.iter().find(|(p, _)| p.len() != len) {
        return Err(FederationError::ShapeMismatch {
            expected: len,
            found: p.len(),
        });
    }
    let total: f64 = participants.iter().map(|&(_, s)| s).sum();
    if !(total > 0.0) {
        return Err(FederationError::InvalidParameter(
            "data sizes must sum to a positive value".into(),
        ));
    }
    let mut acc = vec![0.0f64; len];
    for &(p, size) in participants {
        let beta = size / total;
        acc.iter_mut().zip(p.iter()).for_each(|(a, &w)| *a += beta * w.as_f64());
    }
    Ok(acc.into_iter().map(T::of).collect())
}

/// DecAvg for one node: its own parameters and data size, then the active
/// neighbours'. A node without active neighbours keeps its parameters.
pub fn decavg<T: Scalar>(own: (&[T], f64), neighbours: &[(&[T], f64)]) -> Result<Vec<T>, FederationError> {
    if neighbours.is_empty() {
        return Ok(own.0.to_vec());
    }
    let mut all = Vec::with_capacity(neighbours.len() + 1);
    all.push(own);
    all.extend_from_slice(neighbours);
    decavg_weighted(&all)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dropout {
    #[default]
    None,
    /// Each link is usable in a round with probability `p`.
    Link { p: f64 },
    /// Each node takes part in aggregation with probability `p`; inactive
    /// nodes still train but neither send nor receive.
    Node { p: f64 },
}

impl Dropout {
    pub fn validate(&self) -> Result<(), FederationError> {
        match *self {
            Dropout::None => Ok(()),
            Dropout::Link { p } | Dropout::Node { p } if (0.0..=1.0).contains(&p) => Ok(()),
            Dropout::Link { p } | Dropout::Node { p } => Err(FederationError::InvalidParameter(format!(
                "dropout probability must be in [0, 1], got {p}"
            ))),
        }
    }

    /// Active neighbour lists for one round, each sorted ascending.
    pub fn active_neighbours(&self, g: &Graph, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
        let n = g.n();
        match *self {
            Dropout::None => (0..n).map(|i| g.neighbours(i).to_vec()).collect(),
            Dropout::Link { p } => {
                let mut out = vec![Vec::new(); n];
                for &(u, v) in g.edges() {
                    if rng.random_bool(p) {
                        out[u].push(v);
                        out[v].push(u);
                    }
                }
                out.iter_mut().for_each(|l| l.sort_unstable());
                out
            }
            Dropout::Node { p } => {
                let active: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
                (0..n)
                    .map(|i| {
                        if !active[i] {
                            return Vec::new();
                        }
                        g.neighbours(i).iter().copied().filter(|&j| active[j]).collect()
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphModel};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn equal_sizes_mean() {
        let out = decavg((&[2.0f64][..], 1.0), &[(&[0.0][..], 1.0), (&[1.0][..], 1.0)]).unwrap();
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn size_weighted() {
        let out = decavg((&[0.0f64][..], 100.0), &[(&[4.0][..], 300.0)]).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_unchanged() {
        let own = [1.5f32, -2.0, 0.25];
        assert_eq!(decavg((&own[..], 7.0), &[]).unwrap(), own.to_vec());
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            decavg((&[0.0f64, 1.0][..], 1.0), &[(&[1.0][..], 1.0)]),
            Err(FederationError::ShapeMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn dropout_extremes() {
        let g = generate(&GraphModel::Complete, 6, 0).unwrap();
        let mut r = rng::stream(0, &[]);
        let full = Dropout::None.active_neighbours(&g, &mut r);
        assert_eq!(Dropout::Link { p: 1.0 }.active_neighbours(&g, &mut r), full);
        assert_eq!(Dropout::Node { p: 1.0 }.active_neighbours(&g, &mut r), full);
        assert!(Dropout::Link { p: 0.0 }
            .active_neighbours(&g, &mut r)
            .iter()
            .all(Vec::is_empty));
        assert!(Dropout::Node { p: 2.0 }.validate().is_err());
    }

    #[test]
    fn node_dropout_is_symmetric() {
        let g = generate(&GraphModel::ErGnp { p: 0.3 }, 30, 1).unwrap();
        let mut r = rng::stream(5, &[]);
        let act = Dropout::Node { p: 0.5 }.active_neighbours(&g, &mut r);
        for (i, l) in act.iter().enumerate() {
            for &j in l {
                assert!(act[j].contains(&i));
            }
        }
    }

    proptest! {
        /// On regular graphs with equal sizes the averaging operator is doubly
        /// stochastic, so the global mean is conserved.
        #[test]
        fn regular_graphs_conserve_mean(n in 6usize..40, half_k in 1usize..3, seed in any::<u64>()) {
            let k = 2 * half_k;
            prop_assume!(k < n);
            let g = generate(&GraphModel::KRegular { k }, n, seed).unwrap();
            let mut r = rng::stream(seed, &[1]);
            let params: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| r.random::<f64>() * 10.0 - 5.0).collect()).collect();
            let before: Vec<f64> = (0..5).map(|d| params.iter().map(|p| p[d]).sum::<f64>() / n as f64).collect();
            let after: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let nb: Vec<(&[f64], f64)> = g.neighbours(i).iter().map(|&j| (params[j].as_slice(), 1.0)).collect();
                    decavg((params[i].as_slice(), 1.0), &nb).unwrap()
                })
                .collect();
            for d in 0..5 {
                let m = after.iter().map(|p| p[d]).sum::<f64>() / n as f64;
                prop_assert!((m - before[d]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn star_does_not_conserve_mean() {
        let g = generate(&GraphModel::Star, 4, 0).unwrap();
        let params = [vec![4.0f64], vec![0.0], vec![0.0], vec![0.0]];
        let after: Vec<f64> = (0..4)
            .map(|i| {
                let nb: Vec<(&[f64], f64)> = g.neighbours(i).iter().map(|&j| (params[j].as_slice(), 1.0)).collect();
                decavg((params[i].as_slice(), 1.0), &nb).unwrap()[0]
            })
            .collect();
        // hub: 4/4 = 1, leaves: 4/2 = 2 → mean 7/4 ≠ 1
        assert!((after.iter().sum::<f64>() / 4.0 - 1.75).abs() < 1e-15);
    }
}
