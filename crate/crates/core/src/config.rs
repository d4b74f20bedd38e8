//! Pipeline configuration file (TOML) and per-stage seed derivation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::lar::RefineConfig;
use crate::roleclf::ClassifierConfig;
use crate::synth::{PlantedRoleSpec, TreeSpec};
use crate::txgraph::ColumnSchema;
use crate::walkfeat::WalkConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub transactions: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleFiles {
    /// `buidl`, `usdy`, `benji`, or a path to a bucket rule file.
    pub buckets: String,
    /// `default` or a path to a role rule file.
    pub roles: String,
}

impl Default for RuleFiles {
    fn default() -> Self {
        Self {
            buckets: "buidl".into(),
            roles: "default".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub tree: TreeSpec,
    pub roles: PlantedRoleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every stage's randomness.
    pub seed: u64,
    /// Neighbourhood radius of the hierarchical features.
    pub k_hop: usize,
    pub inputs: InputPaths,
    pub schema: ColumnSchema,
    pub rules: RuleFiles,
    pub geometry: GeometryConfig,
    pub embed: TrainConfig,
    pub refine: RefineConfig,
    pub walk: WalkConfig,
    pub classifier: ClassifierConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k_hop: 1,
            inputs: InputPaths::default(),
            schema: ColumnSchema::default(),
            rules: RuleFiles::default(),
            geometry: GeometryConfig::default(),
            embed: TrainConfig::default(),
            refine: RefineConfig::default(),
            walk: WalkConfig::default(),
            classifier: ClassifierConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Stage labels fed to [`derive_seed`].
pub mod stage {
    pub const EMBED: &str = "embed";
    pub const WALK: &str = "walk";
    pub const SPLIT: &str = "split";
    pub const CLASSIFY: &str = "classify";
    pub const SYNTH: &str = "synth";
}

/// FNV-1a of the label, mixed with the root and finalised with splitmix64.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = (h ^ root).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Copies the shared geometry into each stage, derives stage seeds from
    /// the root seed, and validates everything.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        c.geometry.validate()?;
        c.embed.dim = c.geometry.dim;
        c.embed.eps_boundary = c.geometry.eps_boundary;
        c.refine.eps_boundary = c.geometry.eps_boundary;
        c.refine.delta_stab = c.geometry.delta_stab;
        c.embed.seed = derive_seed(c.seed, stage::EMBED);
        c.walk.seed = derive_seed(c.seed, stage::WALK);
        c.classifier.seed = derive_seed(c.seed, stage::CLASSIFY);
        c.synth.roles.seed = c.seed;
        if c.k_hop == 0 {
            return Err(Error::InvalidConfig("k_hop must be at least 1".into()));
        }
        c.embed.validate()?;
        c.refine.validate()?;
        c.walk.validate()?;
        c.classifier.validate()?;
        c.synth.tree.validate()?;
        c.synth.roles.validate()?;
        Ok(c)
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, stage::SPLIT)
    }
}
