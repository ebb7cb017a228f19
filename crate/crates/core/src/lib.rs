//! Simulation toolkit for random Schrödinger operators `H = A + αV` on
//! bounded-degree graphs: eigenvalue statistics, localization envelopes,
//! and the auxiliary Bernoulli process used to compare against Poisson limits.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod hamiltonian;
pub mod linalg;
pub mod localization;
pub mod poisson;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
