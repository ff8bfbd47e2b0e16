//! Differentially private graph-based algorithmic recourse.
//!
//! A private tabular dataset is published once, either as DP cluster centers
//! or as noise-perturbed records, alongside a DP logistic regression model.
//! A density-weighted, constraint-aware graph is built over the published
//! points, and recourse queries are answered from that graph alone, so any
//! number of queries costs no further privacy budget.

pub mod data;
pub mod density;
pub mod distance;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod publish;
pub mod recourse;

pub use data::{Constraint, Dataset, FeatureKind, FeatureSchema, FeatureSpec, Outcome, RawValue};
pub use density::{fit_kde, DensityModel};
pub use distance::Norm;
pub use error::{Error, Result};
pub use graph::{build_graph, GraphConfig, RecourseGraph};
pub use metrics::{evaluate_batch, EvalContext, MetricsReport};
pub use model::{Classifier, LogisticModel, LogisticSettings};
pub use privacy::{BudgetAccountant, PrivacyBudget, PrivacyReport};
pub use publish::{ClusterParams, PublishMethod, PublishedPoints};
pub use recourse::{diverse_recourse, shortest_recourse, RecoursePath};
