//! Model checkpoints as JSON.
//!
//! A checkpoint holds the format version, the model configuration, the
//! meta-path definitions and preprocessing flags needed to rebuild the
//! input, and every parameter tensor. Floats are written with shortest
//! round-trip formatting, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{MetaPath, SubgraphOptions};
use crate::model::{ModelConfig, ModelParams};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    #[serde(default)]
    pub dataset: Option<String>,
    pub config: ModelConfig,
    pub metapaths: Vec<MetaPath>,
    pub options: SubgraphOptions,
    #[serde(default)]
    pub row_normalize: bool,
    pub in_dim: usize,
    pub num_classes: usize,
    pub seed: u64,
    #[serde(default)]
    pub best_epoch: Option<usize>,
    pub params: ModelParams,
}

impl Checkpoint {
    /// Checks version, meta-path naming and tensor shapes.
    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {} (supported: {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.config.validate().map_err(|e| Error::Format(e.to_string()))?;
        let names: Vec<&str> = self.metapaths.iter().map(|m| m.name.as_str()).collect();
        if names != self.config.metapaths.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Format(format!(
                "meta-path definitions {names:?} do not match the config's {:?}",
                self.config.metapaths
            )));
        }
        self.params
            .check_shapes(&self.config, self.in_dim, self.num_classes)
            .map_err(|e| Error::Format(e.to_string()))?;
        if !self.params.is_finite() {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterBasis;
    use crate::model::{LocalBases, Variant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let config = ModelConfig {
            order: 3,
            metapaths: vec!["IGI".into(), "ITI".into()],
            local_basis: LocalBases::Shared(FilterBasis::Jacobi { a: 1.0, b: 0.5 }),
            global_basis: FilterBasis::Monomial,
            hidden_dim: 4,
            num_mlp_layers: 2,
            dropout: 0.5,
            variant: Variant::Full,
            materialize_global: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = ModelParams::init(&config, 5, 3, &mut rng);
        Checkpoint {
            version: CHECKPOINT_VERSION,
            dataset: Some("mixed".into()),
            metapaths: vec![
                MetaPath::new("IGI", vec!["IG".into(), "IG_rev".into()]),
                MetaPath::new("ITI", vec!["IT".into(), "IT_rev".into()]),
            ],
            config,
            options: SubgraphOptions::default(),
            row_normalize: false,
            in_dim: 5,
            num_classes: 3,
            seed: 7,
            best_epoch: Some(12),
            params,
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        for ((_, _, a), (_, _, b)) in c.params.tensors().into_iter().zip(back.params.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_checkpoints_are_format_errors() {
        assert!(matches!(Checkpoint::from_json("{"), Err(Error::Format(_))));
        let mut c = sample();
        c.version = 99;
        assert!(matches!(Checkpoint::from_json(&c.to_json().unwrap()), Err(Error::Format(_))));
        let mut c = sample();
        c.params.gamma.pop();
        assert!(matches!(Checkpoint::from_json(&c.to_json().unwrap()), Err(Error::Format(_))));
        let mut c = sample();
        c.metapaths.pop();
        assert!(Checkpoint::from_json(&c.to_json().unwrap()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/ckpt.json");
        sample().save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), sample());
        assert!(matches!(Checkpoint::load(&dir.path().join("none.json")), Err(Error::Io { .. })));
    }
}
