//! Round-based decentralised training: each node trains locally, then
//! replaces its parameters with the data-size-weighted mean over itself and
//! its currently reachable neighbours.

mod aggregate;
mod gain;
mod gossip;
mod partition;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use aggregate::{decavg, decavg_weighted, Dropout};
pub use gain::{pipeline_gain, GainMode, SizeEstimate, TopologyKnowledge};
pub use gossip::estimate_n_gossip;
pub use partition::{partition, zipf_weights, Partition, PartitionScheme};

use crate::data::Dataset;
use crate::graph::Graph;
use crate::neural::{init_model, Mlp, MlpSpec, NeuralError, OptimiserKind, OptimiserState};
use crate::rng::{self, Rng};
use crate::spectral::SpectralError;

#[derive(Debug, thiserror::Error)]
pub enum FederationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need {needed} training items, dataset has {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("parameter vectors differ in length: {expected} vs {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("no topology information available to compute a gain")]
    NoInformation,
    #[error("graph is disconnected")]
    Disconnected,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn default_local_batches() -> usize {
    8
}
fn default_batch_size() -> usize {
    16
}
fn default_true() -> bool {
    true
}
fn default_eval_batch() -> usize {
    500
}

/// Per-round training behaviour shared by all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Minibatches each node trains on between communications.
    #[serde(default = "default_local_batches")]
    pub local_batches: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimiser: OptimiserKind,
    #[serde(default)]
    pub dropout: Dropout,
    /// Zero optimiser state after every aggregation.
    #[serde(default = "default_true")]
    pub reset_optimiser: bool,
    #[serde(default = "default_eval_batch")]
    pub eval_batch: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            local_batches: default_local_batches(),
            batch_size: default_batch_size(),
            optimiser: OptimiserKind::default(),
            dropout: Dropout::None,
            reset_optimiser: true,
            eval_batch: default_eval_batch(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), FederationError> {
        if self.local_batches == 0 || self.batch_size == 0 || self.eval_batch == 0 {
            return Err(FederationError::InvalidParameter(
                "local_batches, batch_size and eval_batch must be positive".into(),
            ));
        }
        self.optimiser.validate().map_err(FederationError::InvalidParameter)?;
        self.dropout.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub mean_test_loss: f64,
    pub mean_test_accuracy: f64,
    /// Computed on the first weight matrix.
    pub sigma_ap: f64,
    pub sigma_an: f64,
    pub mean_delta_train: f64,
    pub mean_delta_agg: f64,
    /// Mean over nodes where both deltas are non-zero; 0 when there are none.
    pub mean_cosine: f64,
}

impl RoundMetrics {
    pub const CSV_HEADER: &'static str =
        "round,mean_test_loss,mean_test_accuracy,sigma_ap,sigma_an,mean_delta_train,mean_delta_agg,mean_cosine";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.round,
            self.mean_test_loss,
            self.mean_test_accuracy,
            self.sigma_ap,
            self.sigma_an,
            self.mean_delta_train,
            self.mean_delta_agg,
            self.mean_cosine
        )
    }
}

struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl BatchCursor {
    fn new(items: &[usize], rng: Rng) -> Self {
        BatchCursor {
            order: items.to_vec(),
            pos: items.len(),
            rng,
        }
    }

    /// Next `size` items of a reshuffled-per-epoch pass over the node's data.
    fn next(&mut self, size: usize, out: &mut Vec<usize>) {
        out.clear();
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let take = (size - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
    }
}

pub struct FederationState<'a> {
    graph: Graph,
    train: &'a Dataset,
    test: &'a Dataset,
    data_sizes: Vec<f64>,
    models: Vec<Mlp<f32>>,
    optimisers: Vec<OptimiserState<f32>>,
    cursors: Vec<BatchCursor>,
    dropout_rng: Rng,
    config: TrainingConfig,
    round: usize,
}

impl<'a> FederationState<'a> {
    /// Node `i` is initialised from its own seed stream, scaled by `gain`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: Graph,
        spec: &MlpSpec,
        train: &'a Dataset,
        test: &'a Dataset,
        partition: &Partition,
        gain: f64,
        config: TrainingConfig,
        seed: u64,
    ) -> Result<Self, FederationError> {
        config.validate()?;
        let n = graph.n();
        if partition.num_nodes() != n {
            return Err(FederationError::InvalidParameter(format!(
                "partition has {} nodes, graph has {n}",
                partition.num_nodes()
            )));
        }
        if partition.nodes().iter().any(Vec::is_empty) {
            return Err(FederationError::InvalidParameter(
                "every node needs training data".into(),
            ));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(FederationError::InvalidParameter(format!(
                "gain must be positive, got {gain}"
            )));
        }
        if train.width != spec.inputs() || test.width != spec.inputs() {
            return Err(FederationError::ShapeMismatch {
                expected: spec.inputs(),
                found: train.width,
            });
        }
        let models: Vec<Mlp<f32>> = (0..n)
            .map(|i| init_model(spec, gain, rng::derive(seed, &[rng::tag::INIT, i as u64])))
            .collect();
        let optimisers = (0..n)
            .map(|_| OptimiserState::new(config.optimiser, spec.num_params()))
            .collect();
        let cursors = (0..n)
            .map(|i| BatchCursor::new(partition.node(i), rng::stream(seed, &[rng::tag::BATCH, i as u64])))
            .collect();
        Ok(FederationState {
            data_sizes: partition.sizes().into_iter().map(|s| s as f64).collect(),
            graph,
            train,
            test,
            models,
            optimisers,
            cursors,
            dropout_rng: rng::stream(seed, &[rng::tag::DROPOUT]),
            config,
            round: 0,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn models(&self) -> &[Mlp<f32>] {
        &self.models
    }

    /// Metrics of the current parameters with zero deltas (used for round 0).
    pub fn snapshot_metrics(&self) -> Result<RoundMetrics, FederationError> {
        let (loss, acc) = self.evaluate()?;
        let (sigma_ap, sigma_an) = self.sigmas();
        Ok(RoundMetrics {
            round: self.round,
            mean_test_loss: loss,
            mean_test_accuracy: acc,
            sigma_ap,
            sigma_an,
            mean_delta_train: 0.0,
            mean_delta_agg: 0.0,
            mean_cosine: 0.0,
        })
    }

    pub fn run_round(&mut self) -> Result<RoundMetrics, FederationError> {
        let n = self.graph.n();
        let before: Vec<Vec<f32>> = self.models.iter().map(|m| m.params().to_vec()).collect();

        let (mut xs, mut ys, mut idx) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            for _ in 0..self.config.local_batches {
                self.cursors[i].next(self.config.batch_size, &mut idx);
                self.train.gather(&idx, &mut xs, &mut ys);
                let (_, grads) = self.models[i].loss_and_grads(&xs, &ys)?;
                self.optimisers[i].step(self.models[i].params_mut(), &grads)?;
            }
        }

        let active = self
            .config
            .dropout
            .active_neighbours(&self.graph, &mut self.dropout_rng);
        let mut aggregated: Vec<Option<Vec<f32>>> = Vec::with_capacity(n);
        for (i, nb) in active.iter().enumerate() {
            if nb.is_empty() {
                aggregated.push(None);
                continue;
            }
            // Closed neighbourhood in ascending node order, so identical
            // neighbourhoods give bit-identical results.
            let mut members = nb.clone();
            members.push(i);
            members.sort_unstable();
            let parts: Vec<(&[f32], f64)> = members
                .iter()
                .map(|&j| (self.models[j].params(), self.data_sizes[j]))
                .collect();
            aggregated.push(Some(decavg_weighted(&parts)?));
        }

        let (mut sum_train, mut sum_agg, mut sum_cos, mut cos_count) = (0.0, 0.0, 0.0, 0usize);
        for (i, agg) in aggregated.into_iter().enumerate() {
            let trained = self.models[i].params();
            let (mut tt, mut aa, mut ta) = (0.0f64, 0.0f64, 0.0f64);
            for (k, (&t, &b)) in trained.iter().zip(&before[i]).enumerate() {
                let dt = t as f64 - b as f64;
                let da = agg.as_ref().map_or(0.0, |a| a[k] as f64 - t as f64);
                tt += dt * dt;
                aa += da * da;
                ta += dt * da;
            }
            sum_train += tt.sqrt();
            sum_agg += aa.sqrt();
            if tt > 0.0 && aa > 0.0 {
                sum_cos += (ta / (tt.sqrt() * aa.sqrt())).clamp(-1.0, 1.0);
                cos_count += 1;
            }
            if let Some(a) = agg {
                self.models[i].params_mut().copy_from_slice(&a);
            }
        }
        if self.config.reset_optimiser {
            self.optimisers.iter_mut().for_each(OptimiserState::reset);
        }
        self.round += 1;

        let mut m = self.snapshot_metrics()?;
        m.mean_delta_train = sum_train / n as f64;
        m.mean_delta_agg = sum_agg / n as f64;
        m.mean_cosine = if cos_count > 0 { sum_cos / cos_count as f64 } else { 0.0 };
        Ok(m)
    }

    /// Mean test loss and accuracy over nodes. Nodes holding bit-identical
    /// parameters share one evaluation.
    fn evaluate(&self) -> Result<(f64, f64), FederationError> {
        let mut done: Vec<(usize, (f64, f64))> = Vec::new();
        let (mut loss, mut acc) = (0.0, 0.0);
        for (i, m) in self.models.iter().enumerate() {
            let hit = done
                .iter()
                .find(|(j, _)| self.models[*j].params() == m.params())
                .map(|&(_, r)| r);
            let r = match hit {
                Some(r) => r,
                None => {
                    let r = m.evaluate(self.test, self.config.eval_batch)?;
                    done.push((i, r));
                    r
                }
            };
            loss += r.0;
            acc += r.1;
        }
        let n = self.models.len() as f64;
        Ok((loss / n, acc / n))
    }

    /// `(σ_ap, σ_an)` of the first weight matrix: the mean within-node
    /// spread and the mean across-node spread (population deviations).
    pub fn sigmas(&self) -> (f64, f64) {
        let layer: Vec<&[f32]> = self.models.iter().map(|m| m.weights(0)).collect();
        let n = layer.len() as f64;
        let d = layer[0].len();
        let sigma_ap = layer
            .iter()
            .map(|w| population_std(w.iter().map(|&x| x as f64)))
            .sum::<f64>()
            / n;
        let mut sum_an = 0.0;
        for k in 0..d {
            sum_an += population_std(layer.iter().map(|w| w[k] as f64));
        }
        (sigma_ap, sum_an / d as f64)
    }

    /// Round 0 metrics, then `rounds` rounds. Stops early once the mean test
    /// loss is at or below `stop_below`.
    pub fn run(&mut self, rounds: usize, stop_below: Option<f64>) -> Result<Vec<RoundMetrics>, FederationError> {
        let mut out = vec![self.snapshot_metrics()?];
        for _ in 0..rounds {
            let m = self.run_round()?;
            out.push(m);
            if stop_below.is_some_and(|t| m.mean_test_loss <= t) {
                break;
            }
        }
        Ok(out)
    }
}

fn population_std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        s += x;
        s2 += x * x;
    }
    let mean = s / n;
    (s2 / n - mean * mean).max(0.0).sqrt()
}

/// First round whose mean test loss is at or below `threshold`.
pub fn rounds_to_threshold(metrics: &[RoundMetrics], threshold: f64) -> Option<usize> {
    metrics.iter().find(|m| m.mean_test_loss <= threshold).map(|m| m.round)
}

/// A single model trained on the union of the given items, with the same
/// per-round schedule as the federated nodes (no aggregation).
pub fn central_baseline(
    spec: &MlpSpec,
    train: &Dataset,
    items: &[usize],
    test: &Dataset,
    config: TrainingConfig,
    rounds: usize,
    seed: u64,
) -> Result<Vec<RoundMetrics>, FederationError> {
    let graph = Graph::from_edges(1, &[]).expect("single node");
    let partition = Partition::from_sets(vec![items.to_vec()])?;
    let mut state = FederationState::new(graph, spec, train, test, &partition, 1.0, config, seed)?;
    state.run(rounds, None)
}
