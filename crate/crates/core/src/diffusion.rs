//! Reduced model of the early rounds of decentralised training.
//!
//! Each of `n` nodes holds `d` parameters drawn from `N(0, σ_init²)`. A round
//! replaces every node's vector by the mean over its closed neighbourhood and
//! then adds `N(0, σ_noise²)` noise standing in for local training. In matrix
//! form `W ← W·M + N` with `M` the [`MarkovMatrix`].

use rand_distr::{Distribution, Normal};

use crate::graph::Graph;
use crate::rng;
use crate::spectral::MarkovMatrix;

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("parameter block has {block} nodes but the operator has {operator}")]
    DimensionMismatch { block: usize, operator: usize },
    #[error("{what} needs at least 2 entries along the averaged axis, got {got}")]
    DegenerateDimension { what: &'static str, got: usize },
    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("invalid standard deviation {0}")]
    InvalidSigma(f64),
}

/// A `d × n` parameter matrix; column `i` is node `i`'s parameter vector.
///
/// Stored column-major so that neighbourhood averaging works on contiguous
/// per-node slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    d: usize,
    n: usize,
    values: Vec<f64>,
}

impl ParamBlock {
    /// Builds a block from per-node columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.len();
        let d = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == d), "ragged columns");
        ParamBlock {
            d,
            n,
            values: columns.concat(),
        }
    }

    /// Builds a block from rows (`rows[j][i]` is parameter `j` of node `i`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut values = vec![0.0; d * n];
        for (j, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "ragged rows");
            for (i, &v) in row.iter().enumerate() {
                values[i * d + j] = v;
            }
        }
        ParamBlock { d, n, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, node: usize) -> &[f64] {
        &self.values[node * self.d..(node + 1) * self.d]
    }

    pub fn get(&self, param: usize, node: usize) -> f64 {
        self.values[node * self.d + param]
    }

    pub fn row(&self, param: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(param, i)).collect()
    }
}

/// Per-round `σ_ap` and `σ_an`, index 0 being the initial block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SigmaTrace {
    pub sigma_ap: Vec<f64>,
    pub sigma_an: Vec<f64>,
}

impl SigmaTrace {
    pub fn len(&self) -> usize {
        self.sigma_ap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_ap.is_empty()
    }

    fn push(&mut self, b: &ParamBlock) {
        self.sigma_ap.push(sigma_ap(b).unwrap_or(0.0));
        self.sigma_an.push(sigma_an(b).unwrap_or(0.0));
    }
}

fn fill_normal(out: &mut [f64], sigma: f64, seed: u64, path: &[u64]) {
    if sigma == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let dist = Normal::new(0.0, sigma).expect("finite sigma");
    let mut r = rng::stream(seed, path);
    out.iter_mut().for_each(|v| *v = dist.sample(&mut r));
}

fn check_sigma(s: f64) -> Result<(), DiffusionError> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(DiffusionError::InvalidSigma(s))
    }
}

/// iid `N(0, σ_init²)` entries, reproducible per seed.
pub fn init_block(d: usize, n: usize, sigma_init: f64, seed: u64) -> ParamBlock {
    let mut values = vec![0.0; d * n];
    fill_normal(&mut values, sigma_init, seed, &[rng::tag::INIT]);
    ParamBlock { d, n, values }
}

/// One round: `W·M` plus iid `N(0, σ_noise²)` noise.
pub fn step(block: &ParamBlock, m: &MarkovMatrix, sigma_noise: f64, seed: u64) -> Result<ParamBlock, DiffusionError> {
    check_sigma(sigma_noise)?;
    if block.n != m.n() {
        return Err(DiffusionError::DimensionMismatch {
            block: block.n,
            operator: m.n(),
        });
    }
    let d = block.d;
    let mut values = vec![0.0; block.values.len()];
    for (j, out) in values.chunks_exact_mut(d.max(1)).enumerate().take(block.n) {
        for &i in m.closed_neighbourhood(j) {
            out.iter_mut().zip(block.column(i)).for_each(|(o, v)| *o += v);
        }
        let w = m.column_weight(j);
        out.iter_mut().for_each(|o| *o *= w);
    }
    if sigma_noise > 0.0 {
        let mut noise = vec![0.0; values.len()];
        fill_normal(&mut noise, sigma_noise, seed, &[rng::tag::NOISE]);
        values.iter_mut().zip(noise).for_each(|(v, e)| *v += e);
    }
    Ok(ParamBlock { d, n: block.n, values })
}

fn population_std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = xs.clone().fold((0usize, 0.0), |(c, s), x| (c + 1, s + x));
    let mean = sum / count as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / count as f64;
    var.sqrt()
}

/// Mean over nodes of the population standard deviation of each node's
/// parameters.
pub fn sigma_ap(block: &ParamBlock) -> Result<f64, DiffusionError> {
    if block.d < 2 {
        return Err(DiffusionError::DegenerateDimension {
            what: "sigma_ap",
            got: block.d,
        });
    }
    let total: f64 = (0..block.n)
        .map(|i| population_std(block.column(i).iter().copied()))
        .sum();
    Ok(total / block.n as f64)
}

/// Mean over parameters of the population standard deviation of each
/// parameter across nodes.
pub fn sigma_an(block: &ParamBlock) -> Result<f64, DiffusionError> {
    if block.n < 2 {
        return Err(DiffusionError::DegenerateDimension {
            what: "sigma_an",
            got: block.n,
        });
    }
    let d = block.d;
    let n = block.n as f64;
    let mut mean = vec![0.0; d];
    for i in 0..block.n {
        mean.iter_mut().zip(block.column(i)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for i in 0..block.n {
        var.iter_mut()
            .zip(block.column(i).iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    Ok(var.iter().map(|s| (s / n).sqrt()).sum::<f64>() / d as f64)
}

/// Runs the reduced model for `rounds` rounds on a connected graph.
pub fn run_diffusion(
    g: &Graph,
    d: usize,
    sigma_init: f64,
    sigma_noise: f64,
    rounds: usize,
    seed: u64,
) -> Result<SigmaTrace, DiffusionError> {
    Ok(run_diffusion_with_block(g, d, sigma_init, sigma_noise, rounds, seed)?.0)
}

/// Like [`run_diffusion`] but also returns the final block.
pub fn run_diffusion_with_block(
    g: &Graph,
    d: usize,
    sigma_init: f64,
    sigma_noise: f64,
    rounds: usize,
    seed: u64,
) -> Result<(SigmaTrace, ParamBlock), DiffusionError> {
    check_sigma(sigma_init)?;
    check_sigma(sigma_noise)?;
    let components = g.component_count();
    if components > 1 {
        return Err(DiffusionError::Disconnected { components });
    }
    let m = MarkovMatrix::from_graph(g);
    let mut block = init_block(d, g.n(), sigma_init, seed);
    let mut trace = SigmaTrace::default();
    trace.push(&block);
    for t in 0..rounds {
        block = step(&block, &m, sigma_noise, rng::derive(seed, &[t as u64 + 1]))?;
        trace.push(&block);
    }
    Ok((trace, block))
}

/// First round at which `σ_an` is within a factor `1 + eps` of the minimum
/// over the next `window` rounds (or the remainder of the trace), i.e. where
/// the series has flattened out.
pub fn stabilisation_round(sigma_an: &[f64], eps: f64, window: usize) -> Option<usize> {
    (0..sigma_an.len()).find(|&t| {
        let end = (t + window + 1).min(sigma_an.len());
        let floor = sigma_an[t..end].iter().copied().fold(f64::INFINITY, f64::min);
        sigma_an[t] <= (1.0 + eps) * floor
    })
}
