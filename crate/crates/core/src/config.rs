//! TOML model configuration.
//!
//! ```toml
//! d = 2
//! localization = [0, 5]
//!
//! [potential]
//! kind = "sos"        # sos | log | psos | custom | identity
//! beta = 2.4
//!
//! [space]
//! kind = "window"     # window | cyclic
//! radius = 60
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{auto_radius, PotentialKind, TransferOperator};
use crate::seqspace::{GroupSpace, SeqFn};
use crate::solver::{LocalizationProblem, Tolerances};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default = "default_localization")]
    pub localization: Vec<i64>,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub ggm: GgmConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_d() -> u32 {
    2
}

fn default_localization() -> Vec<i64> {
    vec![0, 5]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialName {
    Sos,
    Log,
    Psos,
    Custom,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialName,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Values on the space in index order (custom only).
    #[serde(default)]
    pub table: Option<Vec<f64>>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig { kind: PotentialName::Sos, beta: Some(2.4), p: None, table: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceName {
    Window,
    Cyclic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceName,
    /// Window radius; chosen from the tail tolerance when absent.
    #[serde(default)]
    pub radius: Option<usize>,
    #[serde(default)]
    pub modulus: Option<usize>,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig { kind: SpaceName::Window, radius: Some(60), modulus: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub seed: u64,
    pub trees: usize,
    pub depth: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { seed: 0, trees: 100_000, depth: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GgmConfig {
    pub modulus: usize,
    pub localization: Vec<i64>,
    pub n_grid: Vec<usize>,
    pub k: i64,
    pub samples: usize,
    pub branches: usize,
    pub branch_length: usize,
    /// Number of highest-mass pair cells compared with the limit formula.
    pub top_cells: usize,
}

impl Default for GgmConfig {
    fn default() -> Self {
        GgmConfig {
            modulus: 5,
            localization: vec![0, 1],
            n_grid: vec![4, 8, 16, 32, 64],
            k: 0,
            samples: 100_000,
            branches: 100,
            branch_length: 10_000,
            top_cells: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdModel {
    Sos,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub d: Vec<u32>,
    pub n: Vec<u32>,
    pub model: ThresholdModel,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig { d: vec![2, 3, 6], n: vec![1, 2, 10], model: ThresholdModel::Sos }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub d: Vec<u32>,
    pub n: Vec<u32>,
    pub grid: usize,
    /// Shift applied to `A` in the translation-covariance check.
    pub shift: i64,
    pub dlr_configurations: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { d: (2..=10).collect(), n: (1..=50).collect(), grid: 10_000, shift: 3, dlr_configurations: 100_000 }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: default_d(),
            localization: default_localization(),
            potential: PotentialConfig::default(),
            space: SpaceConfig::default(),
            tolerances: Tolerances::default(),
            sampling: SamplingConfig::default(),
            ggm: GgmConfig::default(),
            thresholds: ThresholdsConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.localization.is_empty() {
            return Err(Error::Config("localization must be nonempty".into()));
        }
        if self.ggm.modulus < 2 {
            return Err(Error::Config("ggm.modulus must be at least 2".into()));
        }
        if self.ggm.branch_length < 1 || self.ggm.branches < 1 || self.ggm.samples < 2 {
            return Err(Error::Config("ggm sample sizes must be positive".into()));
        }
        if self.sampling.trees < 1 {
            return Err(Error::Config("sampling.trees must be positive".into()));
        }
        let t = &self.tolerances;
        if !(t.inner > 0.0 && t.outer > 0.0 && t.tail > 0.0 && t.max_iter > 0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn beta(&self) -> Result<f64> {
        self.potential.beta.ok_or_else(|| Error::Config("potential.beta is required".into()))
    }

    fn kind(&self) -> Result<Option<PotentialKind>> {
        Ok(match self.potential.kind {
            PotentialName::Sos => Some(PotentialKind::Sos { beta: self.beta()? }),
            PotentialName::Log => Some(PotentialKind::Log { beta: self.beta()? }),
            PotentialName::Psos => Some(PotentialKind::Psos {
                beta: self.beta()?,
                p: self.potential.p.ok_or_else(|| Error::Config("potential.p is required".into()))?,
            }),
            PotentialName::Custom | PotentialName::Identity => None,
        })
    }

    pub fn group_space(&self) -> Result<GroupSpace> {
        match self.space.kind {
            SpaceName::Cyclic => {
                GroupSpace::cyclic(self.space.modulus.ok_or_else(|| Error::Config("space.modulus is required".into()))?)
            }
            SpaceName::Window => match (self.space.radius, self.kind()?) {
                (Some(r), _) => GroupSpace::window(r),
                (None, Some(kind)) => GroupSpace::window(auto_radius(kind, self.d, self.tolerances.tail)?),
                (None, None) => match &self.potential.table {
                    Some(t) if t.len() % 2 == 1 => GroupSpace::window(t.len() / 2),
                    _ => Err(Error::Config("space.radius is required".into())),
                },
            },
        }
    }

    pub fn operator(&self) -> Result<TransferOperator> {
        let space = self.group_space()?;
        match self.potential.kind {
            PotentialName::Sos => TransferOperator::sos(self.beta()?, space),
            PotentialName::Log => TransferOperator::log(self.beta()?, space),
            PotentialName::Psos => {
                let p = self.potential.p.ok_or_else(|| Error::Config("potential.p is required".into()))?;
                TransferOperator::psos(self.beta()?, p, space)
            }
            PotentialName::Identity => Ok(TransferOperator::identity(space)),
            PotentialName::Custom => {
                let table = self
                    .potential
                    .table
                    .clone()
                    .ok_or_else(|| Error::Config("potential.table is required".into()))?;
                if table.len() != space.size() {
                    return Err(Error::Config(format!(
                        "potential.table has {} entries, space has {}",
                        table.len(),
                        space.size()
                    )));
                }
                TransferOperator::custom(SeqFn::new(space, table)?)
            }
        }
    }

    pub fn problem(&self) -> Result<LocalizationProblem> {
        LocalizationProblem::new(self.d, self.operator()?, &self.localization, self.tolerances)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_file() {
        let cfg = ModelConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ModelConfig::default());
    }

    #[test]
    fn full_file_parses() {
        let cfg = ModelConfig::from_toml_str(
            r#"
            d = 3
            localization = [0]
            [potential]
            kind = "log"
            beta = 4.0
            [space]
            kind = "window"
            radius = 30
            [tolerances]
            outer = 1e-10
            [sampling]
            seed = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.d, 3);
        assert_eq!(cfg.tolerances.outer, 1e-10);
        assert_eq!(cfg.tolerances.inner, 1e-13);
        assert_eq!(cfg.sampling.seed, 7);
        assert_eq!(cfg.operator().unwrap().space(), GroupSpace::window(30).unwrap());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(ModelConfig::from_toml_str("dd = 2"), Err(Error::Config(_))));
        assert!(matches!(ModelConfig::from_toml_str("d = 1"), Err(Error::Config(_))));
        let cfg = ModelConfig::from_toml_str("[potential]\nkind = \"sos\"").unwrap();
        assert!(matches!(cfg.operator(), Err(Error::Config(_))));
    }

    #[test]
    fn auto_radius_when_missing() {
        let cfg = ModelConfig::from_toml_str("[space]\nkind = \"window\"").unwrap();
        let space = cfg.group_space().unwrap();
        assert!(cfg.operator().unwrap().tail_norm(2) <= 1e-12);
        assert!(space.size() > 3);
    }

    #[test]
    fn custom_table() {
        let cfg = ModelConfig::from_toml_str(
            "localization = [0]\n[potential]\nkind = \"custom\"\ntable = [0.01, 0.02, 1.0, 0.02, 0.01]\n[space]\nkind = \"window\"",
        )
        .unwrap();
        assert_eq!(cfg.operator().unwrap().evaluate(1), 0.02);
    }
}
