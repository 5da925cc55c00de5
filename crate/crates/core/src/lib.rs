//! SIS epidemic propagation on hypergraphs.
//!
//! A hyperedge groups the nodes of one community (a household, a workplace,
//! a clique of an underlying contact graph). A susceptible node in a state
//! with `k_h` infected nodes in hyperedge `h` is infected at rate
//! `tau * sum_h f(k_h)` over the hyperedges containing it, where
//! `f(x) = min(x, c)` discounts the pressure of crowded hyperedges; infected
//! nodes recover at rate `gamma`.
//!
//! The crate provides three levels of description that can be cross-checked
//! against each other:
//!
//! * [`simulate`] — discrete-time individual-based stochastic simulation with
//!   ensemble averaging, on hypergraphs and on their weighted clique
//!   expansions;
//! * [`masterq`] — the exact Kolmogorov master equations over all `2^N`
//!   configurations, block-tridiagonal in the infected-count classes;
//! * [`meanfield`] — closed scalar mean-field ODEs for bi-uniform
//!   (household/workplace) and regular random hypergraphs.
//!
//! [`generators`] builds the random hypergraphs used in the experiments and
//! [`cli`] orchestrates multi-engine parameter sweeps.

pub mod cli;
pub mod generators;
pub mod hypercore;
pub mod masterq;
pub mod meanfield;
pub mod ode;
pub mod simulate;

pub use hypercore::{
    EpidemicParams, EpidemicState, Hypergraph, InfectionFunction, WeightedGraph,
};
