//! Spectral graph neural network for node classification on heterogeneous,
//! possibly heterophilic graphs.
//!
//! The model filters each meta-path subgraph with its own learnable
//! polynomial (local branch) and additionally filters a learnable weighted
//! sum of all meta-path adjacencies (global branch). See the README for an
//! overview of the crate layout.

pub mod checkpoint;
pub mod dataio;
pub mod error;
pub mod filters;
pub mod hetgraph;
pub mod model;
pub mod oracle;
pub mod sparse;
pub mod synthetic;
pub mod train;

pub use checkpoint::Checkpoint;
pub use dataio::{DatasetBundle, ExperimentConfig};
pub use error::{Error, Result};
pub use filters::{BasisStack, FilterBasis};
pub use hetgraph::{HeteroGraph, MetaPath, MetaPathSubgraph, SubgraphOptions};
pub use model::{ModelConfig, ModelInput, ModelParams, Variant};
pub use sparse::{CsrMatrix, DenseMatrix, LinearOperator};
pub use train::{Splits, TrainHyper, TrainReport};
