//! Frequency-dependent beyond-diagonal RIS modelling and optimisation.
//!
//! The crate is organised bottom-up: [`linalg`] (vec/vech, duplication
//! matrix, guarded solves), [`circuit`] (branch impedances → Θ(C, f)),
//! [`scenario`] (geometry, fading, ZF), [`optimizer`] (relaxed solvers and
//! codebook projection), [`metrics`] and [`sim`] (Monte Carlo), and
//! [`experiment`] (the named studies driven by the CLI).

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod scenario;
pub mod sim;

pub use circuit::{
    Architecture, Branch, CapacitancePlan, CapacitanceRange, CircuitParams, Codebook,
    InterBranches, RisTopology, ScatteringMatrix,
};
pub use error::{Error, Result};
pub use linalg::{c64, CMatrix, CVector, DuplicationMatrix};
pub use scenario::{ChannelSet, DirectLinks, NetworkScenario, PowerConfig};
