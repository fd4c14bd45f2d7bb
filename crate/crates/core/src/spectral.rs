//! The self-inclusive averaging operator of a network and its stationary
//! behaviour.
//!
//! For a graph with adjacency `A` the operator is
//! `M[i][j] = (A[i][j] + I[i][j]) / (k_j + 1)`: every column sums to one, and
//! right-multiplying a row of per-node values by `M` replaces each node's value
//! by the plain mean over itself and its neighbours. Its stationary vector `π`
//! (`Mπ = π`, `Σπ = 1`) sets how far repeated averaging compresses the spread
//! of independently drawn parameters: the limit spread is `σ · ‖π‖₂`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
    #[error("graph has {components} connected components")]
    DisconnectedGraph { components: usize },
    #[error("degree sample is empty")]
    EmptySample,
    #[error("invalid size estimate {0}")]
    InvalidSizeEstimate(f64),
    #[error("unknown graph family {0:?}")]
    UnknownFamily(String),
    #[error("scaling exponent {0} outside (0, 1]")]
    InvalidExponent(f64),
    #[error("family {0} needs a fitted exponent")]
    MissingExponent(&'static str),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

/// Sparse column-normalised `(A + I)` operator.
#[derive(Debug, Clone)]
pub struct MarkovMatrix {
    n: usize,
    /// CSR over closed neighbourhoods `N_j ∪ {j}`, sorted.
    offsets: Vec<usize>,
    indices: Vec<usize>,
    /// `1 / (k_j + 1)`, the value of every non-zero entry in column `j`.
    col_weight: Vec<f64>,
    components: usize,
}

impl MarkovMatrix {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(n + 2 * g.num_edges());
        offsets.push(0);
        for j in 0..n {
            let nb = g.neighbours(j);
            let split = nb.partition_point(|&v| v < j);
            indices.extend_from_slice(&nb[..split]);
            indices.push(j);
            indices.extend_from_slice(&nb[split..]);
            offsets.push(indices.len());
        }
        let col_weight = (0..n).map(|j| 1.0 / (g.degree(j) + 1) as f64).collect();
        MarkovMatrix {
            n,
            offsets,
            indices,
            col_weight,
            components: g.component_count(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Closed neighbourhood of `j` (rows with a non-zero in column `j`).
    pub fn closed_neighbourhood(&self, j: usize) -> &[usize] {
        &self.indices[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn column_weight(&self, j: usize) -> f64 {
        self.col_weight[j]
    }

    /// Degree of node `j` in the underlying graph.
    pub fn degree(&self, j: usize) -> usize {
        self.offsets[j + 1] - self.offsets[j] - 1
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.closed_neighbourhood(j).binary_search(&i).is_ok() {
            self.col_weight[j]
        } else {
            0.0
        }
    }

    /// Non-zero entries of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = self.col_weight[j];
        self.closed_neighbourhood(j).iter().map(move |&i| (i, w))
    }

    #[allow(clippy::needless_range_loop)]
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                m[i][j] = v;
            }
        }
        m
    }

    /// `out = M x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        // The closed neighbourhood is symmetric, so row i's support is N_i ∪ {i}.
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .closed_neighbourhood(i)
                .iter()
                .map(|&j| x[j] * self.col_weight[j])
                .sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }

    /// `out = xᵀ M` for a row vector `x`: the neighbourhood mean at each node.
    pub fn apply_left_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let s: f64 = self.closed_neighbourhood(j).iter().map(|&i| x[i]).sum();
            *o = s * self.col_weight[j];
        }
    }
}

/// Stationary vector of a [`MarkovMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    /// `‖π‖₂`, the compression factor.
    pub norm: f64,
    pub iterations: usize,
    /// `‖Mπ − π‖∞` of the returned vector.
    pub residual: f64,
}

impl SteadyState {
    fn from_pi(pi: Vec<f64>, iterations: usize, residual: f64) -> Self {
        let norm = pi.iter().map(|p| p * p).sum::<f64>().sqrt();
        SteadyState {
            pi,
            norm,
            iterations,
            residual,
        }
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Stationary vector by power iteration with sum renormalisation.
///
/// Iteration stops once the estimated error `r / (1 − ρ̂)` falls below `tol`,
/// where `r` is the sup-norm step and `ρ̂` the observed contraction rate of
/// successive steps; on slowly mixing graphs a small step alone does not mean
/// the iterate is close.
pub fn steady_state_exact(m: &MarkovMatrix, tol: f64, max_iter: usize) -> Result<SteadyState, SpectralError> {
    if m.components > 1 {
        return Err(SpectralError::DisconnectedGraph {
            components: m.components,
        });
    }
    let n = m.n;
    if n == 0 {
        return Ok(SteadyState::from_pi(Vec::new(), 0, 0.0));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut prev_step = f64::INFINITY;
    let mut step = f64::INFINITY;
    for it in 1..=max_iter {
        m.apply_into(&x, &mut next);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        step = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        let rate = step / prev_step;
        if step == 0.0 || (rate < 1.0 && step / (1.0 - rate) <= tol) {
            m.apply_into(&x, &mut next);
            let residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            return Ok(SteadyState::from_pi(x, it, residual));
        }
        prev_step = step;
    }
    Err(SpectralError::NotConverged {
        iterations: max_iter,
        residual: step,
        best: x,
    })
}

/// Degree-only estimate `√(⟨(k+1)²⟩ / (n̂ ⟨k+1⟩²))` of `‖π‖₂` from a sample of
/// degrees and an estimate of the network size.
pub fn vsteady_norm_from_degrees(degree_sample: &[usize], n_estimate: f64) -> Result<f64, SpectralError> {
    if degree_sample.is_empty() {
        return Err(SpectralError::EmptySample);
    }
    if !(n_estimate >= 1.0) {
        return Err(SpectralError::InvalidSizeEstimate(n_estimate));
    }
    let len = degree_sample.len() as f64;
    let (s1, s2) = degree_sample.iter().fold((0.0, 0.0), |(a, b), &k| {
        let k1 = (k + 1) as f64;
        (a + k1, b + k1 * k1)
    });
    let (m1, m2) = (s1 / len, s2 / len);
    Ok((m2 / (n_estimate * m1 * m1)).sqrt())
}

/// Prior knowledge of how a network was formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkFamily {
    /// Homogeneous centralities (ER, k-regular, tori, complete): exponent ½.
    RegularLike,
    Ba,
    Powerlaw {
        gamma: f64,
    },
}

impl NetworkFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkFamily::RegularLike => "regular_like",
            NetworkFamily::Ba => "ba",
            NetworkFamily::Powerlaw { .. } => "powerlaw",
        }
    }
}

impl std::str::FromStr for NetworkFamily {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regular_like" | "regular" | "er" | "k_regular" | "complete" | "lattice" => Ok(NetworkFamily::RegularLike),
            "ba" | "barabasi_albert" => Ok(NetworkFamily::Ba),
            _ => match s.strip_prefix("powerlaw:").map(str::parse::<f64>) {
                Some(Ok(gamma)) => Ok(NetworkFamily::Powerlaw { gamma }),
                _ => Err(SpectralError::UnknownFamily(s.to_string())),
            },
        }
    }
}

/// `‖π‖₂ ≈ n̂^(−α)` from a family prior. Regular-like families use `α = ½`
/// unless an exponent is supplied; heavy-tailed ones require a fitted exponent.
pub fn vsteady_norm_from_family(
    family: NetworkFamily,
    n_estimate: f64,
    fitted_exponent: Option<f64>,
) -> Result<f64, SpectralError> {
    if !(n_estimate >= 1.0) {
        return Err(SpectralError::InvalidSizeEstimate(n_estimate));
    }
    let alpha = match (family, fitted_exponent) {
        (_, Some(a)) => a,
        (NetworkFamily::RegularLike, None) => 0.5,
        (f, None) => return Err(SpectralError::MissingExponent(f.name())),
    };
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SpectralError::InvalidExponent(alpha));
    }
    Ok(n_estimate.powf(-alpha))
}

fn check_scaling_points(points: &[(f64, f64)]) -> Result<(), SpectralError> {
    if points.len() < 3 {
        return Err(SpectralError::DegenerateInput(format!(
            "need ≥ 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0) || !(v > 0.0)) {
        return Err(SpectralError::DegenerateInput(
            "sizes and norms must be positive".into(),
        ));
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() != points.len() {
        return Err(SpectralError::DegenerateInput("sizes must be distinct".into()));
    }
    Ok(())
}

/// Negated least-squares slope of `ln ‖π‖` against `ln n`.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<f64, SpectralError> {
    check_scaling_points(points)?;
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

/// Exponent of a pure power law `‖π‖ = n^(−α)` (no prefactor) by least
/// squares through the origin in log–log space. This is the form consumed by
/// [`vsteady_norm_from_family`].
pub fn fit_pure_power_exponent(points: &[(f64, f64)]) -> Result<f64, SpectralError> {
    check_scaling_points(points)?;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), &(n, v)| {
        let x = n.ln();
        (a + x * v.ln(), b + x * x)
    });
    if sxx == 0.0 {
        return Err(SpectralError::DegenerateInput("all sizes are 1".into()));
    }
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MixingMethod {
    /// `|λ₂|` only.
    Spectral,
    /// `|λ₂|` plus the first round at which every column of `Mᵗ` is within
    /// total-variation distance `tol` of `π`.
    Empirical { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingEstimate {
    pub second_eigenvalue_modulus: f64,
    /// `1 / (1 − |λ₂|)`.
    pub relaxation_time: f64,
    pub empirical_rounds: Option<usize>,
}

const LAMBDA_TOL: f64 = 1e-10;
const LAMBDA_MAX_ITER: usize = 200_000;
const EMPIRICAL_MAX_ROUNDS: usize = 10_000_000;

pub fn mixing_estimate(m: &MarkovMatrix, method: MixingMethod) -> Result<MixingEstimate, SpectralError> {
    let pi = steady_state_exact(m, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?.pi;
    let lambda2 = second_eigenvalue_modulus(m, &pi)?;
    let empirical_rounds = match method {
        MixingMethod::Spectral => None,
        MixingMethod::Empirical { tol } => Some(empirical_mixing_rounds(m, &pi, tol)?),
    };
    Ok(MixingEstimate {
        second_eigenvalue_modulus: lambda2,
        relaxation_time: 1.0 / (1.0 - lambda2),
        empirical_rounds,
    })
}

/// `|λ₂|` by power iteration on the complement of `π`.
///
/// `M` is reversible with respect to `π`, hence self-adjoint in the inner
/// product `⟨x, y⟩ = Σ xᵢyᵢ/πᵢ`; the subspace `Σx = 0` is invariant and its
/// dominant modulus is `|λ₂|`. The norm ratio `‖Mx‖/‖x‖` in that inner product
/// increases monotonically towards it.
fn second_eigenvalue_modulus(m: &MarkovMatrix, pi: &[f64]) -> Result<f64, SpectralError> {
    let n = m.n;
    if n <= 1 {
        return Ok(0.0);
    }
    let mut gen = rng::stream(0x5eed, &[n as u64]);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut gen)).collect();
    let wnorm = |v: &[f64]| v.iter().zip(pi).map(|(a, p)| a * a / p).sum::<f64>().sqrt();
    let deflate = |v: &mut [f64]| {
        let s: f64 = v.iter().sum();
        v.iter_mut().zip(pi).for_each(|(a, p)| *a -= s * p);
    };
    deflate(&mut x);
    let mut next = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..LAMBDA_MAX_ITER {
        let nx = wnorm(&x);
        if nx == 0.0 || !nx.is_finite() {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        m.apply_into(&x, &mut next);
        deflate(&mut next);
        let ratio = wnorm(&next);
        std::mem::swap(&mut x, &mut next);
        if ratio < 1e-14 {
            return Ok(0.0);
        }
        if (ratio - estimate).abs() <= LAMBDA_TOL * ratio.max(1e-300) {
            return Ok(ratio.min(1.0));
        }
        estimate = ratio;
    }
    Err(SpectralError::NotConverged {
        iterations: LAMBDA_MAX_ITER,
        residual: estimate,
        best: x,
    })
}

/// Max over start nodes of the first `t` with `TV(Mᵗ e_j, π) ≤ tol`.
fn empirical_mixing_rounds(m: &MarkovMatrix, pi: &[f64], tol: f64) -> Result<usize, SpectralError> {
    let n = m.n;
    let mut worst = 0;
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    for j in 0..n {
        x.iter_mut().for_each(|v| *v = 0.0);
        x[j] = 1.0;
        let mut t = 0;
        loop {
            let tv = 0.5 * x.iter().zip(pi).map(|(a, p)| (a - p).abs()).sum::<f64>();
            if tv <= tol {
                break;
            }
            if t >= EMPIRICAL_MAX_ROUNDS {
                return Err(SpectralError::NotConverged {
                    iterations: t,
                    residual: tv,
                    best: x,
                });
            }
            m.apply_into(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
            t += 1;
        }
        worst = worst.max(t);
    }
    Ok(worst)
}
