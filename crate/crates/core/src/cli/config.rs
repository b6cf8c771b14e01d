use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artic::FeatureBlock;
use crate::embedding::Architecture;
use crate::error::{Error, Result};
use crate::meta_learn::Procedure;

/// Everything a run needs. Loaded from TOML, then overridden by flags, then
/// echoed into the output directory as `config.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub featurize: FeaturizeConfig,
    pub embed_train: EmbedTrainConfig,
    pub meta_train: MetaTrainSection,
    pub finetune: FinetuneSection,
    pub align: AlignConfig,
    pub analyze: AnalyzeConfig,
}

/// Synthetic task family used when no corpus file is given. Tasks
/// `0..tasks` are for meta-training, task `tasks` is the unseen one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub tasks: usize,
    pub inventory_size: usize,
    pub frame_dim: usize,
    pub offset_scale: f64,
    pub noise: f64,
    pub family_seed: u64,
    /// Kept out of every meta-training inventory.
    pub heldout: Vec<String>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            tasks: 4,
            inventory_size: 30,
            frame_dim: 8,
            offset_scale: 0.3,
            noise: 0.0,
            family_seed: 1,
            heldout: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeConfig {
    pub word_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedTrainConfig {
    /// Gold TSV; a synthetic teacher is used when absent.
    pub gold: Option<PathBuf>,
    pub architecture: Architecture,
    pub block: FeatureBlock,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub teacher_hidden: usize,
    pub teacher_gain: f64,
    pub teacher_seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            gold: None,
            architecture: Architecture::NonLinear,
            block: FeatureBlock::Combined,
            hidden_dim: 100,
            output_dim: 512,
            epochs: 3000,
            batch_size: 32,
            lr: 1e-3,
            teacher_hidden: 64,
            teacher_gain: 3.0,
            teacher_seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaTrainSection {
    pub corpus: Option<PathBuf>,
    pub procedure: Procedure,
    pub steps: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub inner_steps: usize,
    pub inner_lr: f64,
}

impl Default for MetaTrainSection {
    fn default() -> Self {
        MetaTrainSection {
            corpus: None,
            procedure: Procedure::Laml,
            steps: 500,
            hidden: 32,
            batch_size: 16,
            lr: 1e-3,
            inner_steps: 1,
            inner_lr: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub meta: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub steps: usize,
    pub lr: f64,
    pub snapshot_every: usize,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        FinetuneSection { meta: None, corpus: None, steps: 100, lr: 1e-3, snapshot_every: 10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub attention: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub checkpoint: Option<PathBuf>,
    /// Falls back to `synthetic.heldout` when empty.
    pub heldout: Vec<String>,
    pub k: usize,
    pub collapse_tolerance: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            checkpoint: None,
            heldout: Vec::new(),
            k: 5,
            collapse_tolerance: crate::analysis::COLLAPSE_TOLERANCE,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        let s = &self.synthetic;
        if s.tasks == 0 || s.inventory_size == 0 || s.frame_dim == 0 {
            return bad("synthetic tasks, inventory_size and frame_dim must be positive");
        }
        if !(s.noise >= 0.0) || !s.offset_scale.is_finite() {
            return bad("synthetic noise must be >= 0 and offset_scale finite");
        }
        let e = &self.embed_train;
        if e.output_dim == 0 || e.batch_size == 0 || e.teacher_hidden == 0 || !(e.lr > 0.0) {
            return bad("embed_train dims, batch_size and lr must be positive");
        }
        if e.architecture == Architecture::NonLinear && e.hidden_dim == 0 {
            return bad("embed_train hidden_dim must be positive for the non-linear design");
        }
        let m = &self.meta_train;
        if m.hidden == 0 || m.batch_size == 0 || !(m.lr > 0.0) || !(m.inner_lr > 0.0) {
            return bad("meta_train hidden, batch_size, lr and inner_lr must be positive");
        }
        let f = &self.finetune;
        if !(f.lr > 0.0) {
            return bad("finetune lr must be positive");
        }
        let a = &self.analyze;
        if a.k == 0 || !(a.collapse_tolerance > 0.0) {
            return bad("analyze k and collapse_tolerance must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("sed = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(RunConfig::parse("[meta_train]\nstep = 3"), Err(Error::InvalidConfig(_))));
        let c = RunConfig::parse("seed = 4\n[meta_train]\nprocedure = \"fomaml\"\nsteps = 3").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.meta_train.procedure, Procedure::Fomaml);
        assert_eq!(c.meta_train.hidden, 32);
    }
}
