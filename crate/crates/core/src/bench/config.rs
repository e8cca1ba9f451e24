//! Experiment configuration, stored as TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::Problem;
use crate::model::{AmbiguitySpec, CoupledAffinePiece, DecisionSpace, DecisionTerm, LossModel, LossPiece, SampleTerm, SeparablePiece};
use crate::oracle_pairs::ToleranceConfig;
use crate::reference::GridSpec;

use super::stream::StreamSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub loss: LossSpec,
    pub space: SpaceSpec,
    pub tolerance: ToleranceConfig,
    pub stream: StreamSpec,
    #[serde(default)]
    pub comparator: ComparatorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub horizon: usize,
    /// Radius `ρ` of the ambiguity ball.
    pub radius: f64,
    /// Starting decision; defaults to the center of the decision set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Vec<f64>>,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceSpec {
    Separable { decision: DecisionTerm, sample: SampleTerm },
    Coupled { x_coef: Vec<f64>, xi_coef: Vec<f64>, offset: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Fixed point `x°` against which regret is measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparatorSpec {
    None,
    Fixed { x: Vec<f64> },
    /// Minimizer of the worst-case risk around a hold-out sample, found by
    /// grid search. Also enables the gap proxy in the summary.
    Reference {
        #[serde(default = "default_holdout")]
        holdout: usize,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        #[serde(default = "default_true")]
        refine: bool,
    },
}

fn default_holdout() -> usize {
    2000
}

fn default_grid_points() -> usize {
    21
}

fn default_true() -> bool {
    true
}

impl Default for ComparatorSpec {
    fn default() -> Self {
        ComparatorSpec::Reference { holdout: default_holdout(), grid_points: default_grid_points(), refine: true }
    }
}

/// File names are resolved against `dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub trace: PathBuf,
    pub timing: PathBuf,
    pub summary: PathBuf,
    pub validation: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: "out".into(),
            trace: "trace.csv".into(),
            timing: "timing.csv".into(),
            summary: "summary.json".into(),
            validation: "validation.json".into(),
        }
    }
}

/// Brute-force comparison of the oracle on the first rounds of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSpec {
    pub enabled: bool,
    pub rounds: usize,
    pub grid: GridSpec,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec { enabled: false, rounds: 4, grid: GridSpec::default() }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Config(m),
        other => other,
    }
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        let mut pieces: Vec<Arc<dyn LossPiece>> = Vec::with_capacity(self.loss.pieces.len());
        for p in &self.loss.pieces {
            pieces.push(match p {
                PieceSpec::Separable { decision, sample } => {
                    Arc::new(SeparablePiece::new(decision.clone(), sample.clone()).map_err(config_err)?)
                }
                PieceSpec::Coupled { x_coef, xi_coef, offset } => {
                    Arc::new(CoupledAffinePiece { x_coef: x_coef.clone(), xi_coef: xi_coef.clone(), offset: *offset })
                }
            });
        }
        LossModel::new(pieces).map_err(config_err)
    }

    pub fn decision_space(&self) -> Result<DecisionSpace> {
        match &self.space {
            SpaceSpec::Box { lower, upper } => DecisionSpace::boxed(lower.clone(), upper.clone()),
            SpaceSpec::Ball { center, radius } => DecisionSpace::ball(center.clone(), *radius),
        }
        .map_err(config_err)
    }

    pub fn problem(&self) -> Result<Problem> {
        let amb = AmbiguitySpec::new(self.experiment.radius).map_err(config_err)?;
        Problem::new(self.loss_model()?, self.decision_space()?, amb, self.tolerance.clone()).map_err(config_err)
    }

    /// Cross-field checks; every failure is a [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if !(e.radius >= 0.0 && e.radius.is_finite()) {
            return Err(Error::Config(format!("experiment.radius must be finite and >= 0, got {}", e.radius)));
        }
        if e.horizon == 0 {
            return Err(Error::Config("experiment.horizon must be at least 1".into()));
        }
        let problem = self.problem()?;
        self.tolerance.validate_for(problem.loss.lip_xi(), e.horizon, e.radius)?;
        self.stream.validate()?;
        if self.stream.dim() != problem.loss.sample_dim() {
            return Err(Error::Config(format!(
                "stream dimension {} does not match the loss sample dimension {}",
                self.stream.dim(),
                problem.loss.sample_dim()
            )));
        }
        let n = problem.space.dim();
        if let Some(x1) = &e.x1 {
            if x1.len() != n || !problem.space.contains(x1, 1e-12) {
                return Err(Error::Config("experiment.x1 must be a point of the decision set".into()));
            }
        }
        match &self.comparator {
            ComparatorSpec::Fixed { x } if x.len() != n => {
                return Err(Error::Config(format!("comparator.x has dimension {}, expected {n}", x.len())));
            }
            ComparatorSpec::Reference { holdout, grid_points, .. } if *holdout == 0 || *grid_points < 2 => {
                return Err(Error::Config("comparator needs holdout >= 1 and grid_points >= 2".into()));
            }
            _ => {}
        }
        if self.validation.enabled {
            self.validation.grid.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[experiment]
name = "tiny"
horizon = 5
radius = 0.2

[[loss.pieces]]
kind = "separable"
decision = { kind = "abs_deviation", scale = 1.0, center = [0.5] }
sample = { kind = "hyperbolic", height = 0.0, slope = 1.0, center = [1.0] }

[[loss.pieces]]
kind = "separable"
decision.kind = "abs_deviation"
decision.scale = 1.0
decision.center = [-0.5]
sample.kind = "hyperbolic"
sample.height = 0.0
sample.slope = 1.0
sample.center = [-1.0]

[space]
kind = "box"
lower = [-1.0]
upper = [1.0]

[tolerance]
delta = 0.01

[stream]
family = "gaussian"
seed = 3
mean = [0.3]
std = [1.0]

[comparator]
kind = "fixed"
x = [0.0]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.loss.pieces.len(), 2);
        assert_eq!(cfg.output, OutputSpec::default());
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn negative_radius_is_a_config_error() {
        let text = SAMPLE.replace("radius = 0.2", "radius = -0.1");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_and_families_are_rejected() {
        let text = SAMPLE.replace("name = \"tiny\"", "name = \"tiny\"\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = SAMPLE.replace("family = \"gaussian\"", "family = \"cauchy\"");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn tolerance_couplings_are_checked_at_load() {
        let text = SAMPLE.replace("delta = 0.01", "delta = 0.01\neta_b = 0.5");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = SAMPLE.replace("mean = [0.3]", "mean = [0.3, 0.0]");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }
}
