//! Path quality metrics and batch evaluation.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::density::DensityModel;
use crate::distance::{l1, squared_l2, Norm, CHANGE_TOLERANCE};
use crate::error::{Error, Result};
use crate::graph::RecourseGraph;
use crate::model::Classifier;
use crate::recourse::{shortest_recourse, RecoursePath};

/// Mean KDE log-likelihood of the path steps (the query is excluded).
pub fn pdensity(path: &RecoursePath, rho: &DensityModel) -> Result<f64> {
    if path.steps.is_empty() {
        return Err(Error::InvalidParameter("empty path".into()));
    }
    let mut total = 0.0;
    for s in &path.steps {
        total += rho.log_density(s)?;
    }
    Ok(total / path.steps.len() as f64)
}

/// Mean L1 distance from each path step to its nearest training record.
pub fn pdistance_manifold(path: &RecoursePath, train: &Dataset) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if path.steps.is_empty() {
        return Err(Error::InvalidParameter("empty path".into()));
    }
    let total: f64 = path
        .steps
        .iter()
        .map(|s| {
            train
                .rows
                .iter()
                .map(|r| l1(r, s))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / path.steps.len() as f64)
}

/// `(d(Z, Z_1) + Σ d(Z_i, Z_{i+1})) / p` under `norm`.
pub fn pdistance(path: &RecoursePath, norm: Norm) -> f64 {
    let Some(first) = path.steps.first() else {
        return 0.0;
    };
    let hops: f64 = path
        .steps
        .windows(2)
        .map(|w| norm.distance(&w[0], &w[1]))
        .sum();
    (norm.distance(&path.query, first) + hops) / path.steps.len() as f64
}

/// Fraction of the `k` L2-nearest reference records the model labels
/// favorable. Distance ties go to the lower index.
pub fn ynn(cfe: &[f64], reference: &Dataset, model: &dyn Classifier, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("yNN needs k >= 1".into()));
    }
    if reference.len() < k {
        return Err(Error::InsufficientData(format!(
            "yNN with k = {k} needs at least {k} reference records, got {}",
            reference.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = reference
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (squared_l2(r, cfe), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    order.select_nth_unstable_by(k - 1, by_key);
    let mut favorable = 0usize;
    for &(_, i) in &order[..k] {
        if model.is_favorable(&reference.rows[i])? {
            favorable += 1;
        }
    }
    Ok(favorable as f64 / k as f64)
}

/// Number of changed features (logical, so a one-hot block counts once) that
/// can each be reverted to the query's value while keeping the favorable label.
pub fn redundancy(
    query: &[f64],
    cfe: &[f64],
    model: &dyn Classifier,
    schema: &FeatureSchema,
) -> Result<usize> {
    if !model.is_favorable(cfe)? {
        return Err(Error::NotACounterfactual);
    }
    crate::error::check_dim(schema.width(), query.len())?;
    crate::error::check_dim(schema.width(), cfe.len())?;
    let mut count = 0;
    for block in schema.blocks() {
        let changed = block
            .clone()
            .any(|j| (query[j] - cfe[j]).abs() > CHANGE_TOLERANCE);
        if !changed {
            continue;
        }
        let mut reverted = cfe.to_vec();
        reverted[block.clone()].copy_from_slice(&query[block]);
        if model.is_favorable(&reverted)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Metrics for one query. Metric fields are empty when no path was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: usize,
    pub success: bool,
    pub error: Option<String>,
    pub pdensity: Option<f64>,
    pub pdistance_manifold: Option<f64>,
    pub pl0: Option<f64>,
    pub pl1: Option<f64>,
    pub pl2: Option<f64>,
    pub ynn: Option<f64>,
    pub redundancy: Option<f64>,
    pub path_length: Option<usize>,
    pub time_seconds: f64,
}

/// Means over successful queries; `None` when nothing succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub queries: usize,
    pub cfe_count: usize,
    pub success_rate: f64,
    pub pdensity: Option<f64>,
    pub pdistance_manifold: Option<f64>,
    pub pl0: Option<f64>,
    pub pl1: Option<f64>,
    pub pl2: Option<f64>,
    pub ynn: Option<f64>,
    pub redundancy: Option<f64>,
    pub path_length: Option<f64>,
    pub mean_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<QueryRow>,
    pub summary: MetricsSummary,
}

impl MetricsReport {
    pub fn from_rows(rows: Vec<QueryRow>) -> Self {
        let ok: Vec<&QueryRow> = rows.iter().filter(|r| r.success).collect();
        let mean = |f: &dyn Fn(&QueryRow) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let queries = rows.len();
        let summary = MetricsSummary {
            queries,
            cfe_count: ok.len(),
            success_rate: if queries == 0 {
                0.0
            } else {
                ok.len() as f64 / queries as f64
            },
            pdensity: mean(&|r| r.pdensity),
            pdistance_manifold: mean(&|r| r.pdistance_manifold),
            pl0: mean(&|r| r.pl0),
            pl1: mean(&|r| r.pl1),
            pl2: mean(&|r| r.pl2),
            ynn: mean(&|r| r.ynn),
            redundancy: mean(&|r| r.redundancy),
            path_length: mean(&|r| r.path_length.map(|p| p as f64)),
            mean_time_seconds: if queries == 0 {
                0.0
            } else {
                rows.iter().map(|r| r.time_seconds).sum::<f64>() / queries as f64
            },
        };
        MetricsReport { rows, summary }
    }

    /// Per-query rows as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("<metrics csv>", e))
    }

    /// Writes `metrics.csv` (per query) and `metrics.json` (summary) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv_path = dir.join("metrics.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(file)?;
        let json_path = dir.join("metrics.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&self.summary)?)
            .map_err(|e| Error::io(&json_path, e))
    }
}

/// Inputs shared by every query of a batch evaluation.
pub struct EvalContext<'a> {
    pub graph: &'a RecourseGraph,
    pub model: &'a dyn Classifier,
    pub schema: &'a FeatureSchema,
    /// Density fitted on the private training data.
    pub density: &'a DensityModel,
    /// Training data for the manifold distance and yNN neighborhoods.
    pub train: &'a Dataset,
    pub ynn_k: usize,
}

/// Report plus the paths found (aligned with `report.rows`).
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub paths: Vec<Option<RecoursePath>>,
}

fn score(ctx: &EvalContext, query_id: usize, path: &RecoursePath, seconds: f64) -> Result<QueryRow> {
    Ok(QueryRow {
        query_id,
        success: true,
        error: None,
        pdensity: Some(pdensity(path, ctx.density)?),
        pdistance_manifold: Some(pdistance_manifold(path, ctx.train)?),
        pl0: Some(pdistance(path, Norm::L0)),
        pl1: Some(pdistance(path, Norm::L1)),
        pl2: Some(pdistance(path, Norm::L2)),
        ynn: Some(ynn(path.endpoint(), ctx.train, ctx.model, ctx.ynn_k)?),
        redundancy: Some(redundancy(&path.query, path.endpoint(), ctx.model, ctx.schema)? as f64),
        path_length: Some(path.step_count),
        time_seconds: seconds,
    })
}

fn failure(query_id: usize, err: &Error, seconds: f64) -> QueryRow {
    QueryRow {
        query_id,
        success: false,
        error: Some(err.kind().to_string()),
        pdensity: None,
        pdistance_manifold: None,
        pl0: None,
        pl1: None,
        pl2: None,
        ynn: None,
        redundancy: None,
        path_length: None,
        time_seconds: seconds,
    }
}

/// Runs a shortest-recourse query per record and scores it. Per-query failures
/// are recorded, not propagated; the wall-clock time covers the path search.
pub fn evaluate_batch(queries: &[Vec<f64>], ctx: &EvalContext) -> Evaluation {
    let results: Vec<(QueryRow, Option<RecoursePath>)> = queries
        .par_iter()
        .enumerate()
        .map(|(id, q)| {
            let t = Instant::now();
            let found = shortest_recourse(ctx.graph, q);
            let seconds = t.elapsed().as_secs_f64();
            match found {
                Ok(path) => match score(ctx, id, &path, seconds) {
                    Ok(row) => (row, Some(path)),
                    Err(e) => (failure(id, &e, seconds), None),
                },
                Err(e) => (failure(id, &e, seconds), None),
            }
        })
        .collect();
    let (rows, paths) = results.into_iter().unzip();
    Evaluation {
        report: MetricsReport::from_rows(rows),
        paths,
    }
}
