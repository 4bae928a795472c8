//! Scenario configuration: JSON schema with strict validation (unknown keys
//! rejected everywhere).

use serde::{Deserialize, Serialize};
use sptsim_core::{Generator, ModelSpec, SimConfig};

use crate::CliError;

/// Declarative description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSpec,
    pub sim: SimConfig,
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub mode: Mode,
    /// Rescale the generating function so G(μ(0)) = 1 before anything else.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn default_true() -> bool {
    true
}

/// Which generation legs to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Additive,
    Multiplicative,
    #[default]
    Both,
}

impl Mode {
    pub fn additive(self) -> bool {
        matches!(self, Mode::Additive | Mode::Both)
    }

    pub fn multiplicative(self) -> bool {
        matches!(self, Mode::Multiplicative | Mode::Both)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmptyParams {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankCutParams {
    pub m: usize,
}

/// Generating-function choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Entropy(EmptyParams),
    Quadratic(QuadraticParams),
    Gini(EmptyParams),
    LargeCap(RankCutParams),
    SmallCap(RankCutParams),
    GeometricMean(EmptyParams),
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Generator, CliError> {
        let g = match self {
            GeneratorSpec::Entropy(_) => Generator::entropy(),
            GeneratorSpec::Quadratic(p) => Generator::quadratic(p.c).map_err(validation)?,
            GeneratorSpec::Gini(_) => Generator::gini(),
            GeneratorSpec::LargeCap(p) => Generator::large_cap(p.m).map_err(validation)?,
            GeneratorSpec::SmallCap(p) => Generator::small_cap(p.m).map_err(validation)?,
            GeneratorSpec::GeometricMean(_) => Generator::geometric_mean(),
        };
        Ok(g)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outperformance: Option<OutperformanceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supermartingale: Option<SupermartingaleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutperformanceConfig {
    /// Activation horizon for the sufficient condition.
    pub t_star: f64,
    /// Margin for the multiplicative theorem (ignored for additive-only runs).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupermartingaleConfig {
    /// Checkpoint times as fractions of the horizon.
    pub checkpoints: Vec<f64>,
}

impl Default for SupermartingaleConfig {
    fn default() -> Self {
        Self {
            checkpoints: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Emit per-path CSV files.
    pub paths_csv: bool,
    /// Include share-holdings columns (phi/psi).
    pub holdings: bool,
    /// Include portfolio-weight columns (pi).
    pub weights: bool,
    /// Cap on the number of per-path CSV files written.
    pub max_csv_paths: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            paths_csv: true,
            holdings: false,
            weights: false,
            max_csv_paths: 16,
        }
    }
}

pub(crate) fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl ScenarioConfig {
    /// Full structural validation; everything here exits with code 2.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(CliError::Validation(format!(
                "scenario name `{}` must be nonempty and filesystem-safe",
                self.name
            )));
        }
        self.model.validate().map_err(validation)?;
        self.sim.validate().map_err(validation)?;
        let g = self.generator.build()?;
        g.check_dim(self.model.dim()).map_err(validation)?;

        if self.mode.multiplicative() {
            if let GeneratorSpec::Quadratic(p) = &self.generator {
                if p.c <= 1.0 {
                    return Err(CliError::Validation(format!(
                        "multiplicative generation with the quadratic function requires c > 1 \
                         so that G stays positive on the simplex; got c = {}",
                        p.c
                    )));
                }
            }
        }

        if let Some(op) = &self.diagnostics.outperformance {
            if !(op.t_star > 0.0 && op.t_star <= self.sim.horizon) {
                return Err(CliError::Validation(format!(
                    "t_star = {} must lie in (0, horizon = {}]",
                    op.t_star, self.sim.horizon
                )));
            }
            if op.epsilon.is_nan() || op.epsilon <= 0.0 {
                return Err(CliError::Validation(format!(
                    "epsilon must be positive, got {}",
                    op.epsilon
                )));
            }
        }
        if let Some(sm) = &self.diagnostics.supermartingale {
            if sm.checkpoints.is_empty()
                || sm.checkpoints.iter().any(|&f| !(f > 0.0 && f <= 1.0))
            {
                return Err(CliError::Validation(
                    "supermartingale checkpoints must be fractions in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parse and validate a scenario file.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("malformed config {}: {e}", path.display()))
    })?;
    config.validate()?;
    Ok(config)
}
