//! Simulator and library for uncoordinated decentralised federated learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] generates and manipulates undirected communication networks.
//! * [`spectral`] builds the self-inclusive averaging operator of a network,
//!   its stationary vector and the compression factor `‖π‖₂` used to correct
//!   the initial weight scale, plus mixing-time estimates.
//! * [`diffusion`] is the reduced model of early rounds: parameter blocks that
//!   are averaged over neighbourhoods and perturbed with Gaussian noise.
//! * [`neural`] is a small from-scratch multilayer perceptron with He
//!   initialisation, the topology gain, and SGD/AdamW optimisers.
//! * [`federation`] runs the round-based DecAvg training loop with dropout and
//!   uncoordinated gain estimation.
//! * [`experiment`] ties everything together into reproducible, seeded runs
//!   that emit CSV.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diffusion;
pub mod experiment;
pub mod federation;
pub mod graph;
pub mod neural;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use graph::{Graph, GraphError, GraphModel};
pub use spectral::{MarkovMatrix, SteadyState};
