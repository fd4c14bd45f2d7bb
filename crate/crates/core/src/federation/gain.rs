use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{estimate_n_gossip, FederationError};
use crate::graph::Graph;
use crate::rng;
use crate::spectral::{self, MarkovMatrix, NetworkFamily};

/// What a node knows about the network when it initialises its model.
#[derive(Debug, Clone, Default)]
pub struct TopologyKnowledge<'a> {
    pub graph: Option<&'a Graph>,
    pub degree_sample: Option<Vec<usize>>,
    pub family: Option<NetworkFamily>,
    pub fitted_exponent: Option<f64>,
    pub n_estimate: Option<f64>,
}

/// `1 / ‖v_steady‖` from the most precise information available: the full
/// graph, then a degree sample with a size estimate, then a family prior
/// with a size estimate.
pub fn pipeline_gain(k: &TopologyKnowledge<'_>) -> Result<f64, FederationError> {
    let norm = if let Some(g) = k.graph {
        let m = MarkovMatrix::from_graph(g);
        spectral::steady_state_exact(&m, spectral::DEFAULT_TOLERANCE, spectral::DEFAULT_MAX_ITER)?.norm
    } else if let (Some(sample), Some(n)) = (&k.degree_sample, k.n_estimate) {
        spectral::vsteady_norm_from_degrees(sample, n)?
    } else if let (Some(family), Some(n)) = (k.family, k.n_estimate) {
        spectral::vsteady_norm_from_family(family, n, k.fitted_exponent)?
    } else {
        return Err(FederationError::NoInformation);
    };
    Ok(1.0 / norm)
}

/// How a simulated run chooses its initialisation gain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainMode {
    /// Plain He initialisation.
    #[default]
    None,
    Fixed {
        value: f64,
    },
    /// Stationary vector of the actual graph.
    Exact,
    /// Degrees of `sample_size` random nodes plus a size estimate.
    DegreeSample {
        sample_size: usize,
        #[serde(default)]
        size: SizeEstimate,
    },
    Family {
        family: NetworkFamily,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default)]
        size: SizeEstimate,
    },
}

/// Source of `n̂`: the true size, or extrema-propagation gossip, optionally
/// scaled to mimic mis-estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeEstimate {
    #[serde(default)]
    pub gossip_samples: Option<usize>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SizeEstimate {
    fn default() -> Self {
        SizeEstimate {
            gossip_samples: None,
            scale: 1.0,
        }
    }
}

impl SizeEstimate {
    fn resolve(&self, g: &Graph, seed: u64) -> Result<f64, FederationError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(FederationError::InvalidParameter(format!(
                "size scale must be positive, got {}",
                self.scale
            )));
        }
        let base = match self.gossip_samples {
            None => g.n() as f64,
            Some(m) => {
                let rounds = g.diameter().ok_or(FederationError::Disconnected)?;
                estimate_n_gossip(g, m, rounds, seed)?[0]
            }
        };
        Ok(base * self.scale)
    }
}

impl GainMode {
    pub fn validate(&self) -> Result<(), FederationError> {
        let bad_scale =
            |s: &SizeEstimate| !(s.scale > 0.0 && s.scale.is_finite()) || s.gossip_samples.is_some_and(|m| m < 2);
        match self {
            GainMode::Fixed { value } if !(*value > 0.0 && value.is_finite()) => Err(
                FederationError::InvalidParameter(format!("gain must be positive, got {value}")),
            ),
            GainMode::DegreeSample { sample_size: 0, .. } => Err(FederationError::InvalidParameter(
                "degree sample must be non-empty".into(),
            )),
            GainMode::DegreeSample { size, .. } | GainMode::Family { size, .. } if bad_scale(size) => Err(
                FederationError::InvalidParameter("size estimate needs a positive scale and ≥ 2 gossip samples".into()),
            ),
            _ => Ok(()),
        }
    }

    /// The gain for a run on `g`. The graph is only consulted as far as the
    /// mode allows: sampled degrees, gossip, or the full structure.
    pub fn resolve(&self, g: &Graph, seed: u64) -> Result<f64, FederationError> {
        self.validate()?;
        match *self {
            GainMode::None => Ok(1.0),
            GainMode::Fixed { value } => Ok(value),
            GainMode::Exact => pipeline_gain(&TopologyKnowledge {
                graph: Some(g),
                ..Default::default()
            }),
            GainMode::DegreeSample { sample_size, size } => {
                let mut r = rng::stream(seed, &[rng::tag::SKETCH]);
                let sample = (0..sample_size).map(|_| g.degree(r.random_range(0..g.n()))).collect();
                pipeline_gain(&TopologyKnowledge {
                    degree_sample: Some(sample),
                    n_estimate: Some(size.resolve(g, seed)?),
                    ..Default::default()
                })
            }
            GainMode::Family { family, exponent, size } => pipeline_gain(&TopologyKnowledge {
                family: Some(family),
                fitted_exponent: exponent,
                n_estimate: Some(size.resolve(g, seed)?),
                ..Default::default()
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphModel};

    #[test]
    fn exact_regular_gain_is_sqrt_n() {
        let g = generate(&GraphModel::KRegular { k: 4 }, 64, 1).unwrap();
        let gain = GainMode::Exact.resolve(&g, 0).unwrap();
        assert!((gain - 8.0).abs() < 1e-9);
    }

    #[test]
    fn star_degree_sample() {
        // π = (4, 2, 2, 2)/10 so ‖π‖² = 0.28
        let gain = pipeline_gain(&TopologyKnowledge {
            degree_sample: Some(vec![3, 1, 1, 1]),
            n_estimate: Some(4.0),
            ..Default::default()
        })
        .unwrap();
        assert!((gain - 1.0 / 0.28f64.sqrt()).abs() < 1e-12);
        assert!((gain - 1.8898).abs() < 1e-4);
    }

    #[test]
    fn overestimated_size_scales_gain() {
        let g = generate(&GraphModel::KRegular { k: 4 }, 64, 1).unwrap();
        let mode = GainMode::Family {
            family: NetworkFamily::RegularLike,
            exponent: None,
            size: SizeEstimate {
                gossip_samples: None,
                scale: 2.0,
            },
        };
        let gain = mode.resolve(&g, 0).unwrap();
        assert!((gain / 8.0 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gossip_sized_family_gain() {
        let g = generate(&GraphModel::Complete, 64, 0).unwrap();
        let mode = GainMode::Family {
            family: NetworkFamily::RegularLike,
            exponent: None,
            size: SizeEstimate {
                gossip_samples: Some(2000),
                scale: 1.0,
            },
        };
        assert!((mode.resolve(&g, 3).unwrap() / 8.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn no_information() {
        assert!(matches!(
            pipeline_gain(&TopologyKnowledge::default()),
            Err(FederationError::NoInformation)
        ));
        assert!(matches!(
            pipeline_gain(&TopologyKnowledge {
                n_estimate: Some(10.0),
                ..Default::default()
            }),
            Err(FederationError::NoInformation)
        ));
    }

    #[test]
    fn config_round_trip() {
        let mode: GainMode =
            toml::from_str("mode = \"degree_sample\"\nsample_size = 10\n[size]\nscale = 4.0\n").unwrap();
        assert_eq!(
            mode,
            GainMode::DegreeSample {
                sample_size: 10,
                size: SizeEstimate {
                    gossip_samples: None,
                    scale: 4.0
                }
            }
        );
        assert!(GainMode::Fixed { value: -1.0 }.validate().is_err());
    }
}
