//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use corral_core::environments::{EnvConfig, EnvKind};
use corral_core::unconstrained::GridCap;
use serde::Deserialize;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CorralLp,
    CorralGauge,
    MabRecipe,
    UnconstrainedOco,
    UnconstrainedReduction,
    RestartBaseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CorralLp => "corral_lp",
            Algorithm::CorralGauge => "corral_gauge",
            Algorithm::MabRecipe => "mab_recipe",
            Algorithm::UnconstrainedOco => "unconstrained_oco",
            Algorithm::UnconstrainedReduction => "unconstrained_reduction",
            Algorithm::RestartBaseline => "restart_baseline",
        }
    }

    pub fn is_unconstrained(self) -> bool {
        matches!(self, Algorithm::UnconstrainedOco | Algorithm::UnconstrainedReduction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKindName {
    PiecewiseFixed,
    PiecewiseDrift,
    StochasticNoise,
    Zero,
}

impl From<EnvKindName> for EnvKind {
    fn from(k: EnvKindName) -> Self {
        match k {
            EnvKindName::PiecewiseFixed => EnvKind::PiecewiseFixed,
            EnvKindName::PiecewiseDrift => EnvKind::PiecewiseDrift,
            EnvKindName::StochasticNoise => EnvKind::StochasticNoise,
            EnvKindName::Zero => EnvKind::Zero,
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_gap() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKindName,
    pub d: usize,
    pub horizon: usize,
    pub switches: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub noise: f64,
    /// Bandit runs only: how far the best arm's mean sits below the rest.
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Read losses from this file instead of generating them.
    #[serde(default)]
    pub loss_file: Option<PathBuf>,
}

impl EnvSection {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            kind: self.kind.into(),
            d: self.d,
            horizon: self.horizon,
            switches: self.switches,
            p: self.p,
            noise: self.noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridCapSetting {
    Capped(f64),
    Named(GridCapName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridCapName {
    Full,
}

impl From<GridCapSetting> for GridCap {
    fn from(s: GridCapSetting) -> Self {
        match s {
            GridCapSetting::Capped(v) => GridCap::Capped(v),
            GridCapSetting::Named(GridCapName::Full) => GridCap::Full,
        }
    }
}

/// Individual overrides of derived parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub mu: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    /// Strong-convexity constant of the gauge body.
    pub alpha: Option<f64>,
    /// The gauge body is the unit `l_s` ball for this `s`.
    pub gauge_exponent: Option<f64>,
    /// Number of base copies in the bandit recipe.
    pub copies: Option<usize>,
    /// Restart period of the baseline.
    pub period: Option<usize>,
    pub grid_cap: Option<GridCapSetting>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparatorSection {
    /// Number of comparator segments; defaults to the environment's `switches`.
    pub switches: Option<usize>,
    /// Unconstrained runs compare against `norm` times the unit-ball optimum.
    pub norm: Option<f64>,
    /// Explicit comparator, used instead of the DP optimum.
    pub starts: Option<Vec<usize>>,
    pub anchors: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub env: EnvSection,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub comparator: ComparatorSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(f) = &cfg.env.loss_file {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.env.loss_file = Some(dir.join(f));
                }
            }
        }
        Ok(cfg)
    }

    /// Checks that need no simulation. Parameter bounds are checked again when the
    /// learner is built.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let env = &self.env;
        if env.loss_file.is_none() {
            if self.algorithm == Algorithm::MabRecipe {
                if env.d < 2 || env.horizon == 0 || env.switches == 0 || env.switches > env.horizon {
                    return bad("bandit environment needs d >= 2 and 1 <= switches <= horizon".into());
                }
            } else {
                env.env_config().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            }
        }
        if self.algorithm.is_unconstrained() && env.p != 2.0 {
            return bad(format!("{} requires p = 2, got {}", self.algorithm.name(), env.p));
        }
        if self.algorithm == Algorithm::MabRecipe && env.kind == EnvKindName::PiecewiseDrift {
            return bad("mab_recipe supports piecewise_fixed, stochastic_noise or zero environments".into());
        }
        if let Some(u) = self.comparator.norm {
            if !(u >= 0.0 && u.is_finite()) {
                return bad(format!("comparator norm {u} must be finite and non-negative"));
            }
            if !self.algorithm.is_unconstrained() && u > 1.0 {
                return bad("comparator norm above 1 leaves the domain".into());
            }
        }
        match (&self.comparator.starts, &self.comparator.anchors) {
            (Some(s), Some(a)) if s.len() != a.len() => {
                return bad("comparator starts and anchors differ in length".into());
            }
            (Some(_), None) | (None, Some(_)) => {
                return bad("comparator starts and anchors must be given together".into());
            }
            _ => {}
        }
        if let Some(k) = self.comparator.switches {
            if k == 0 {
                return bad("comparator switches must be at least 1".into());
            }
        }
        if self.params.period == Some(0) {
            return bad("restart period must be at least 1".into());
        }
        if self.params.copies == Some(0) {
            return bad("copies must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
algorithm = "corral_lp"
seeds = [1, 2]

[env]
kind = "piecewise_fixed"
d = 4
horizon = 1000
switches = 4
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::CorralLp);
        assert_eq!(cfg.env.p, 2.0);
        assert_eq!(cfg.params, ParamOverrides::default());
    }

    #[test]
    fn grid_cap_accepts_number_or_full() {
        let text = format!("{BASE}\n[params]\ngrid_cap = \"full\"\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.params.grid_cap, Some(GridCapSetting::Named(GridCapName::Full)));
        let text = format!("{BASE}\n[params]\ngrid_cap = 1024.0\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.params.grid_cap, Some(GridCapSetting::Capped(1024.0)));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            BASE.replace("corral_lp", "unconstrained_reduction").replace("switches = 4", "switches = 4\np = 1.5"),
            BASE.replace("seeds = [1, 2]", "seeds = []"),
            BASE.replace("seeds = [1, 2]", "seeds = [3, 3]"),
            BASE.replace("switches = 4", "switches = 4000"),
            BASE.replace("d = 4", "d = 4\ncolour = 1"),
            BASE.replace("corral_lp", "nonsense"),
        ] {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(HarnessError::Config(_))), "{text}");
        }
    }
}
