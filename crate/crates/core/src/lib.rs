//! Deterministic discrete-event simulator of a decentralised
//! application-deployment pipeline across cloud-edge resource providers:
//! offer collection from a network of resource agents, optimisation-based
//! offer ranking, lead-resource selection, network-modelled deployment,
//! workload execution, and QoS/energy/price reporting.
//!
//! The numeric core (attribute normalisation, cost and Borda scoring, the
//! power and transfer models) is generic over the scalar type via
//! `num-traits`; the simulator instantiates it at [`Scalar`].

pub mod deployment;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod offers;
pub mod ranking;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod sim;

/// Scalar type used for simulation time and all continuous quantities.
pub type Scalar = f64;

pub use error::{Error, Result};
