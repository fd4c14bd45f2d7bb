use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FederationError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionScheme {
    /// Stratified: every node gets (almost) the same count of every class.
    Iid,
    /// Each node ranks the classes at random and takes proportions
    /// `∝ rank^(−alpha)`.
    Zipf { alpha: f64 },
}

/// Disjoint per-node index sets into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<Vec<usize>>,
    /// Items that had to come from a different class than the scheme asked
    /// for because the requested class pool ran dry.
    pub reassigned: usize,
}

impl Partition {
    /// Wraps explicit index sets, which must be pairwise disjoint.
    pub fn from_sets(nodes: Vec<Vec<usize>>) -> Result<Self, FederationError> {
        let mut seen = std::collections::HashSet::new();
        if let Some(&dup) = nodes.iter().flatten().find(|&&i| !seen.insert(i)) {
            return Err(FederationError::InvalidParameter(format!("item {dup} assigned twice")));
        }
        Ok(Partition { nodes, reassigned: 0 })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &[usize] {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec<usize>] {
        &self.nodes
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(Vec::len).collect()
    }

    /// Union of all node sets, in node order.
    pub fn union(&self) -> Vec<usize> {
        self.nodes.concat()
    }

    pub fn class_counts(&self, node: usize, labels: &[u8], classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for &i in &self.nodes[node] {
            counts[labels[i] as usize] += 1;
        }
        counts
    }
}

/// Largest-remainder apportionment of `total` by non-negative weights; ties
/// go to the lower index.
pub(crate) fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Zipf proportions over ranks `1..=classes`.
pub fn zipf_weights(classes: usize, alpha: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=classes).map(|r| (r as f64).powf(-alpha)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

/// Assigns `per_node` distinct items to each of `n_nodes` nodes.
pub fn partition(
    labels: &[u8],
    classes: usize,
    n_nodes: usize,
    per_node: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<Partition, FederationError> {
    if n_nodes == 0 || per_node == 0 {
        return Err(FederationError::InvalidParameter(
            "partition needs at least one node and one item per node".into(),
        ));
    }
    let needed = n_nodes * per_node;
    if needed > labels.len() {
        return Err(FederationError::InsufficientData {
            needed,
            available: labels.len(),
        });
    }
    let mut r = rng::stream(seed, &[rng::tag::PARTITION]);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        let pool = pools.get_mut(l as usize).ok_or_else(|| {
            FederationError::InvalidParameter(format!("label {l} out of range for {classes} classes"))
        })?;
        pool.push(i);
    }
    for p in &mut pools {
        p.shuffle(&mut r);
    }

    match scheme {
        PartitionScheme::Iid => {
            let sizes: Vec<f64> = pools.iter().map(|p| p.len() as f64).collect();
            let quotas = apportion(&sizes, needed);
            let order: Vec<usize> = pools
                .iter()
                .zip(&quotas)
                .flat_map(|(p, &q)| p[..q].iter().copied())
                .collect();
            let mut nodes = vec![Vec::with_capacity(per_node); n_nodes];
            for (pos, item) in order.into_iter().enumerate() {
                nodes[pos % n_nodes].push(item);
            }
            Ok(Partition { nodes, reassigned: 0 })
        }
        PartitionScheme::Zipf { alpha } => {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(FederationError::InvalidParameter(format!(
                    "zipf alpha must be ≥ 0, got {alpha}"
                )));
            }
            let by_rank = apportion(&zipf_weights(classes, alpha), per_node);
            let mut reassigned = 0;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let mut ranking: Vec<usize> = (0..classes).collect();
                ranking.shuffle(&mut r);
                let mut items = Vec::with_capacity(per_node);
                for (&class, &count) in ranking.iter().zip(&by_rank) {
                    for _ in 0..count {
                        let item = match pools[class].pop() {
                            Some(i) => i,
                            None => {
                                reassigned += 1;
                                let fallback = (0..classes)
                                    .max_by_key(|&c| (pools[c].len(), usize::MAX - c))
                                    .expect("classes ≥ 1");
                                pools[fallback].pop().expect("enough items overall")
                            }
                        };
                        items.push(item);
                    }
                }
                nodes.push(items);
            }
            Ok(Partition { nodes, reassigned })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn balanced_labels(per_class: usize, classes: usize) -> Vec<u8> {
        (0..per_class * classes).map(|i| (i % classes) as u8).collect()
    }

    #[test]
    fn iid_is_stratified() {
        let labels = balanced_labels(410, 10);
        let p = partition(&labels, 10, 8, 512, PartitionScheme::Iid, 3).unwrap();
        for node in 0..8 {
            assert_eq!(p.node(node).len(), 512);
            for c in p.class_counts(node, &labels, 10) {
                assert!(c == 51 || c == 52, "count {c}");
            }
        }
    }

    #[test]
    fn zipf_top_class_share() {
        let labels = balanced_labels(4000, 10);
        let p = partition(&labels, 10, 4, 1000, PartitionScheme::Zipf { alpha: 1.8 }, 1).unwrap();
        // 1 / Σ_{r=1..10} r^(−1.8)
        let expect = 1.0 / (1..=10).map(|r| (r as f64).powf(-1.8)).sum::<f64>();
        assert!((expect - 0.5911).abs() < 1e-4);
        for node in 0..4 {
            let top = *p.class_counts(node, &labels, 10).iter().max().unwrap();
            assert!((top as f64 / 1000.0 - expect).abs() < 1e-3);
        }
        assert_eq!(p.reassigned, 0);
    }

    #[test]
    fn zipf_zero_alpha_is_balanced() {
        let labels = balanced_labels(100, 10);
        let p = partition(&labels, 10, 5, 100, PartitionScheme::Zipf { alpha: 0.0 }, 2).unwrap();
        for node in 0..5 {
            assert!(p.class_counts(node, &labels, 10).iter().all(|&c| c == 10));
        }
    }

    #[test]
    fn zipf_exhaustion_is_reported() {
        let labels = balanced_labels(20, 10);
        let p = partition(&labels, 10, 10, 20, PartitionScheme::Zipf { alpha: 3.0 }, 0).unwrap();
        assert!(p.reassigned > 0);
        assert_eq!(p.union().into_iter().collect::<HashSet<_>>().len(), 200);
    }

    #[test]
    fn rejects_bad_requests() {
        let labels = balanced_labels(2, 2);
        assert!(matches!(
            partition(&labels, 2, 5, 1, PartitionScheme::Iid, 0),
            Err(FederationError::InsufficientData {
                needed: 5,
                available: 4
            })
        ));
        assert!(partition(&labels, 2, 2, 1, PartitionScheme::Zipf { alpha: -1.0 }, 0).is_err());
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(apportion(&[0.0, 1.0], 3), vec![0, 3]);
    }

    proptest! {
        #[test]
        fn disjoint_and_equal_sized(
            classes in 2usize..12,
            per_class in 5usize..40,
            n_nodes in 1usize..10,
            alpha in proptest::option::of(0.0f64..3.0),
            seed in any::<u64>(),
        ) {
            let labels = balanced_labels(per_class, classes);
            let per_node = (labels.len() / n_nodes).max(1);
            prop_assume!(per_node * n_nodes <= labels.len());
            let scheme = alpha.map_or(PartitionScheme::Iid, |alpha| PartitionScheme::Zipf { alpha });
            let p = partition(&labels, classes, n_nodes, per_node, scheme, seed).unwrap();
            let mut seen = HashSet::new();
            for node in p.nodes() {
                prop_assert_eq!(node.len(), per_node);
                for &i in node {
                    prop_assert!(seen.insert(i));
                }
            }
        }
    }
}
