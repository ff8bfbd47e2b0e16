//! Declarative TOML pipeline configuration.

use std::path::{Path, PathBuf};

use dprecourse_core::publish::ClusterParams;
use dprecourse_core::{FeatureSchema, GraphConfig, LogisticSettings, PrivacyBudget, PublishMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub data: DataConfig,
    pub schema: FeatureSchema,
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub publish: PublishConfig,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub recourse: RecourseConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Raw training CSV (the private dataset).
    pub train: PathBuf,
    /// Raw test CSV. Without one, the training file is split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Number of training records the publisher sees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_sample: Option<usize>,
    /// Alternative to `graph_sample`: keep this fraction of each class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_sample_fraction: Option<f64>,
    /// Test records drawn as recourse queries (before filtering to
    /// unfavorable predictions).
    #[serde(default = "default_query_sample")]
    pub query_sample: usize,
}

fn default_test_fraction() -> f64 {
    0.25
}

fn default_query_sample() -> usize {
    300
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    pub epsilon_cap: f64,
    #[serde(default)]
    pub delta_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Budget of the DP logistic regression.
    pub epsilon: f64,
    pub l2_strength: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = LogisticSettings::default();
        ModelConfig {
            epsilon: 1.0,
            l2_strength: s.l2_strength,
            max_iters: s.max_iters,
            tol: s.tol,
        }
    }
}

impl ModelConfig {
    pub fn settings(&self) -> LogisticSettings {
        LogisticSettings {
            l2_strength: self.l2_strength,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishConfig {
    pub method: PublishMethod,
    pub epsilon: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_internal_k")]
    pub internal_k: usize,
    #[serde(default = "default_exp_fraction")]
    pub exp_fraction: f64,
    #[serde(default = "default_laplace_fraction")]
    pub laplace_fraction: f64,
    #[serde(default = "default_max_release_error")]
    pub max_release_error: f64,
}

fn default_k() -> usize {
    500
}
fn default_iterations() -> usize {
    ClusterParams::new(1, 1.0).iterations
}
fn default_internal_k() -> usize {
    ClusterParams::new(1, 1.0).internal_k
}
fn default_exp_fraction() -> f64 {
    ClusterParams::new(1, 1.0).exp_fraction
}
fn default_laplace_fraction() -> f64 {
    ClusterParams::new(1, 1.0).laplace_fraction
}
fn default_max_release_error() -> f64 {
    ClusterParams::new(1, 1.0).max_release_error
}

impl PublishConfig {
    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            k: self.k,
            iterations: self.iterations,
            internal_k: self.internal_k,
            epsilon_k: self.epsilon,
            exp_fraction: self.exp_fraction,
            laplace_fraction: self.laplace_fraction,
            max_release_error: self.max_release_error,
        }
    }

    /// Budget the publisher will charge.
    pub fn planned_spend(&self) -> f64 {
        match self.method {
            PublishMethod::None => 0.0,
            _ => self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySource {
    /// KDE over the published points themselves.
    #[default]
    Published,
    /// KDE over a separately supplied public CSV.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub distance_threshold: f64,
    pub density_floor: f64,
    pub weight_scale: f64,
    #[serde(default)]
    pub density_source: DensitySource,
    /// Public CSV (same schema) used when `density_source = "external"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_density: Option<PathBuf>,
    /// KDE bandwidth; Scott's rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl Default for GraphSection {
    fn default() -> Self {
        let g = GraphConfig::default();
        GraphSection {
            distance_threshold: g.distance_threshold,
            density_floor: g.density_floor,
            weight_scale: g.weight_scale,
            density_source: DensitySource::Published,
            external_density: None,
            bandwidth: None,
        }
    }
}

impl GraphSection {
    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            distance_threshold: self.distance_threshold,
            density_floor: self.density_floor,
            weight_scale: self.weight_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecourseConfig {
    /// Paths returned per query.
    pub k: usize,
}

impl Default for RecourseConfig {
    fn default() -> Self {
        RecourseConfig { k: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub ynn_k: usize,
    /// Bandwidth of the evaluation KDE; Scott's rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            ynn_k: 5,
            bandwidth: None,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        if let Some(t) = self.data.test.as_mut() {
            fix(t);
        }
        if let Some(e) = self.graph.external_density.as_mut() {
            fix(e);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn cap(&self) -> Result<PrivacyBudget> {
        Ok(PrivacyBudget::new(
            self.privacy.epsilon_cap,
            self.privacy.delta_cap,
        )?)
    }

    /// Checks everything that can be checked without reading data,
    /// including that the planned spends fit under the cap.
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let cap = self.cap()?;
        if !(self.model.epsilon > 0.0 && self.model.epsilon.is_finite()) {
            return Err(CliError::Config(format!(
                "model.epsilon must be positive, got {}",
                self.model.epsilon
            )));
        }
        if self.publish.method != PublishMethod::None
            && !(self.publish.epsilon > 0.0 && self.publish.epsilon.is_finite())
        {
            return Err(CliError::Config(format!(
                "publish.epsilon must be positive, got {}",
                self.publish.epsilon
            )));
        }
        if self.publish.method == PublishMethod::DpCluster {
            self.publish.cluster_params().validate()?;
        }
        self.graph.graph_config().validate()?;
        if self.graph.density_source == DensitySource::External
            && self.graph.external_density.is_none()
        {
            return Err(CliError::Config(
                "density_source = \"external\" needs graph.external_density".into(),
            ));
        }
        match (self.data.graph_sample, self.data.graph_sample_fraction) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(CliError::Config(
                    "set exactly one of data.graph_sample and data.graph_sample_fraction".into(),
                ))
            }
        }
        if self.recourse.k == 0 || self.metrics.ynn_k == 0 {
            return Err(CliError::Config("recourse.k and metrics.ynn_k must be >= 1".into()));
        }
        let mut acc = dprecourse_core::BudgetAccountant::new(cap);
        let mut planned = vec![("model", self.model.epsilon)];
        if self.publish.planned_spend() > 0.0 {
            planned.push(("publish", self.publish.planned_spend()));
        }
        for (label, eps) in planned {
            acc.spend(label, PrivacyBudget::pure(eps)?)
                .map_err(|e| CliError::budget(e, &acc))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[data]
train = "train.csv"
graph_sample = 10
[schema]
label = "y"
favorable = "1"
[[schema.features]]
name = "x"
kind = "continuous"
min = 0.0
max = 1.0
[privacy]
epsilon_cap = 2.0
[publish]
method = "dp_cluster"
epsilon = 1.0
k = 3
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.model.epsilon, 1.0);
        assert_eq!(cfg.publish.iterations, 10);
        assert_eq!(cfg.metrics.ynn_k, 5);
        assert_eq!(cfg.recourse.k, 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn resolved_toml_round_trips() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        let again = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn over_cap_is_rejected_up_front() {
        let text = MINIMAL.replace("epsilon_cap = 2.0", "epsilon_cap = 1.5");
        let cfg = PipelineConfig::from_toml(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.kind(), "BudgetExceeded");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        assert!(PipelineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/etc/exp"));
        assert_eq!(cfg.data.train, PathBuf::from("/etc/exp/train.csv"));
    }
}
