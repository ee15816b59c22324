//! Quantum-reservoir estimation of the zero-delay second-order coherence g²(0).
//!
//! Source states of light are prepared as density matrices, cascaded into a
//! small randomly coupled qubit network, and the node occupations sampled over
//! time become features for a tree-ensemble regressor that predicts g²(0).

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod quantum;
pub mod reservoir;
pub mod seed;
pub mod sources;

pub use error::{Error, ErrorKind, Result};
