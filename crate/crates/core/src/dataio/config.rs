//! Experiment configuration files (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterBasis;
use crate::hetgraph::{HeteroGraph, MetaPath, SubgraphOptions};
use crate::model::{LocalBases, ModelConfig, Variant};
use crate::train::{AdamConfig, TrainHyper};

fn d_order() -> usize {
    10
}
fn d_local_basis() -> LocalBases {
    LocalBases::Shared(FilterBasis::Jacobi { a: 1.0, b: 1.0 })
}
fn d_global_basis() -> FilterBasis {
    FilterBasis::Monomial
}
fn d_hidden() -> usize {
    64
}
fn d_layers() -> usize {
    2
}
fn d_dropout() -> f64 {
    0.5
}
fn d_lr() -> f64 {
    0.005
}
fn d_wd() -> f64 {
    5e-4
}
fn d_epochs() -> usize {
    2000
}
fn d_patience() -> Option<usize> {
    Some(100)
}
fn d_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn d_true() -> bool {
    true
}

/// Every key is optional; see the README for the documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory. Relative paths that do not exist resolve against
    /// `$H2SGNN_DATA_DIR`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Meta-path specs, either `PAP`-style abbreviations or `NAME=rel1,rel2`.
    #[serde(default)]
    pub metapaths: Vec<String>,
    #[serde(default = "d_order")]
    pub order: usize,
    #[serde(default = "d_local_basis")]
    pub local_basis: LocalBases,
    #[serde(default = "d_global_basis")]
    pub global_basis: FilterBasis,
    #[serde(default = "d_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "d_layers")]
    pub num_mlp_layers: usize,
    #[serde(default = "d_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub materialize_global: bool,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default)]
    pub coeff_lr: Option<f64>,
    #[serde(default)]
    pub coeff_weight_decay: Option<f64>,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// `null` disables early stopping.
    #[serde(default = "d_patience")]
    pub patience: Option<usize>,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub binarize: bool,
    #[serde(default = "d_true")]
    pub drop_selfloops: bool,
    /// L1-normalize feature rows after loading.
    #[serde(default)]
    pub row_normalize: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all keys have defaults")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        for (k, v) in [("lr", self.lr), ("weight_decay", self.weight_decay)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("`{k}` must be finite and non-negative, got {v}")));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("`epochs` must be positive".into()));
        }
        Ok(())
    }

    pub fn subgraph_options(&self) -> SubgraphOptions {
        SubgraphOptions {
            binarize: self.binarize,
            drop_selfloops: self.drop_selfloops,
        }
    }

    /// Resolves the meta-path specs against a loaded graph.
    pub fn resolve_metapaths(&self, graph: &HeteroGraph) -> Result<Vec<MetaPath>> {
        if self.metapaths.is_empty() {
            return Err(Error::Config("no meta-paths configured".into()));
        }
        self.metapaths
            .iter()
            .map(|s| {
                MetaPath::parse(s, graph).map_err(|e| Error::Config(format!("meta-path `{s}`: {e}")))
            })
            .collect()
    }

    pub fn model_config(&self, metapaths: &[MetaPath]) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            order: self.order,
            metapaths: metapaths.iter().map(|m| m.name.clone()).collect(),
            local_basis: self.local_basis.clone(),
            global_basis: self.global_basis,
            hidden_dim: self.hidden_dim,
            num_mlp_layers: self.num_mlp_layers,
            dropout: self.dropout,
            variant: self.variant,
            materialize_global: self.materialize_global,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hyper(&self, seed: u64) -> TrainHyper {
        TrainHyper {
            adam: AdamConfig {
                lr: self.lr,
                weight_decay: self.weight_decay,
                coeff_lr: self.coeff_lr,
                coeff_weight_decay: self.coeff_weight_decay,
                ..AdamConfig::default()
            },
            epochs: self.epochs,
            patience: self.patience,
            seed,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
