//! Pipeline stages. Each stage reads its upstream artifacts from the output
//! directory, writes its own artifacts plus a `manifest.json`, and never
//! touches data before the configuration (including the privacy cap) has
//! been validated.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dprecourse_core::data::{
    load_csv, preprocess, preprocess_record, sample_without_replacement,
    stratified_split_and_sample, stratified_subsample,
};
use dprecourse_core::graph::connected_components;
use dprecourse_core::metrics::{MetricsSummary, QueryRow};
use dprecourse_core::model::{accuracy, train_dp_logistic};
use dprecourse_core::privacy::LedgerEntry;
use dprecourse_core::publish::{convergent_dp_cluster, publish_records, record_perturbation};
use dprecourse_core::recourse::{path_report, path_violations, PathReport};
use dprecourse_core::{
    build_graph, diverse_recourse, evaluate_batch, fit_kde, BudgetAccountant, Classifier,
    Dataset, DensityModel, EvalContext, Error, LogisticModel, PrivacyBudget,
    PrivacyReport, PublishMethod, PublishedPoints, RawValue, RecourseGraph,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{DensitySource, PipelineConfig};
use crate::error::{CliError, Result};

/// Where each stage's artifacts live. Shared stages (prepare, model) sit at
/// the root; publisher-dependent stages may sit under a variant directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
    variant: Option<String>,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout {
            root: root.into(),
            variant: None,
        }
    }

    pub fn variant(&self, name: &str) -> Layout {
        Layout {
            root: self.root.clone(),
            variant: Some(name.to_string()),
        }
    }

    fn variant_root(&self) -> PathBuf {
        match &self.variant {
            Some(v) => self.root.join(v),
            None => self.root.clone(),
        }
    }

    pub fn prepared(&self) -> PathBuf {
        self.root.join("prepared")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn published(&self) -> PathBuf {
        self.variant_root().join("published")
    }

    pub fn graph(&self) -> PathBuf {
        self.variant_root().join("graph")
    }

    pub fn query(&self) -> PathBuf {
        self.variant_root().join("query")
    }

    pub fn eval(&self) -> PathBuf {
        self.variant_root().join("eval")
    }

    pub fn report(&self) -> PathBuf {
        self.variant_root().join("report.json")
    }
}

/// Written by every stage next to its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    /// This stage's own spends against the configured cap.
    pub privacy: PrivacyReport,
    pub details: serde_json::Value,
}

impl StageManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_manifest(
    dir: &Path,
    stage: &str,
    cfg: &PipelineConfig,
    acc: &BudgetAccountant,
    details: serde_json::Value,
) -> Result<()> {
    let manifest = StageManifest {
        stage: stage.to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        privacy: acc.report(),
        details,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn require(stage: &'static str, needs: &'static str, path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::StageDependency { stage, needs, path })
    }
}

/// Independent, reproducible stream per stage.
pub fn stage_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}:{label}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes))
}

/// Validates the config (cap included) and records the resolved config.
pub fn begin(cfg: &PipelineConfig, layout: &Layout) -> Result<()> {
    cfg.validate()?;
    create_dir(&layout.root)?;
    let path = layout.root.join("config.resolved.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub train: usize,
    pub test: usize,
    pub graph_sample: usize,
    pub queries: usize,
}

/// Reads the raw CSVs, scales/encodes them, splits, and samples the records
/// the publisher will see and the query records.
pub fn prepare(cfg: &PipelineConfig, layout: &Layout) -> Result<PrepareSummary> {
    let train_all = preprocess(&load_csv(&cfg.data.train, &cfg.schema)?)?;
    let (train, test) = match &cfg.data.test {
        Some(path) => (train_all, preprocess(&load_csv(path, &cfg.schema)?)?),
        None => {
            let split = stratified_split_and_sample(&train_all, cfg.data.test_fraction, 0, cfg.seed)?;
            (split.train, split.test)
        }
    };
    let graph_sample = match (cfg.data.graph_sample, cfg.data.graph_sample_fraction) {
        (Some(n), _) => sample_without_replacement(&train, n, &mut stage_rng(cfg.seed, "graph_sample"))?,
        (None, Some(f)) => stratified_subsample(&train, f, cfg.seed)?,
        (None, None) => unreachable!("validated config"),
    };
    let n_queries = cfg.data.query_sample.min(test.len());
    let queries = sample_without_replacement(&test, n_queries, &mut stage_rng(cfg.seed, "queries"))?;

    let dir = layout.prepared();
    create_dir(&dir)?;
    train.write_csv(&dir.join("train.csv"))?;
    test.write_csv(&dir.join("test.csv"))?;
    graph_sample.write_csv(&dir.join("graph_sample.csv"))?;
    queries.write_csv(&dir.join("queries.csv"))?;
    let summary = PrepareSummary {
        train: train.len(),
        test: test.len(),
        graph_sample: graph_sample.len(),
        queries: queries.len(),
    };
    write_manifest(
        &dir,
        "prepare",
        cfg,
        &BudgetAccountant::new(cfg.cap()?),
        json!({
            "counts": summary,
            "train_class_counts": train.class_counts(),
            "graph_sample_class_counts": graph_sample.class_counts(),
        }),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub test_accuracy: f64,
    pub epsilon: f64,
}

/// Trains the DP logistic regression on the full prepared training set.
pub fn train_model(cfg: &PipelineConfig, layout: &Layout) -> Result<ModelSummary> {
    let prepared = layout.prepared();
    let train_path = require("train-model", "prepare", prepared.join("train.csv"))?;
    let test_path = require("train-model", "prepare", prepared.join("test.csv"))?;
    let mut acc = BudgetAccountant::new(cfg.cap()?);
    acc.check("model", PrivacyBudget::pure(cfg.model.epsilon)?)
        .map_err(|e| CliError::budget(e, &acc))?;

    let train = Dataset::read_csv(&train_path, &cfg.schema)?;
    let mut rng = stage_rng(cfg.seed, "model");
    let model = train_dp_logistic(&train, &cfg.model.settings(), cfg.model.epsilon, &mut rng, &mut acc)
        .map_err(|e| CliError::budget(e, &acc))?;
    let test = Dataset::read_csv(&test_path, &cfg.schema)?;
    let summary = ModelSummary {
        test_accuracy: accuracy(&model, &test)?,
        epsilon: cfg.model.epsilon,
    };

    let dir = layout.model();
    create_dir(&dir)?;
    model.save(&dir.join("model.json"))?;
    write_manifest(&dir, "train-model", cfg, &acc, json!(summary))?;
    Ok(summary)
}

fn load_model(cfg: &PipelineConfig, layout: &Layout, stage: &'static str) -> Result<LogisticModel> {
    let path = require(stage, "train-model", layout.model().join("model.json"))?;
    let model = LogisticModel::load(&path)?;
    if model.schema_fingerprint != cfg.schema.fingerprint() {
        return Err(Error::SchemaMismatch(format!(
            "{} was trained under a different schema",
            path.display()
        ))
        .into());
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishSummary {
    pub method: PublishMethod,
    pub points: usize,
    pub budget_spent: PrivacyBudget,
}

/// Runs the configured publisher on the prepared graph sample.
pub fn publish_points(cfg: &PipelineConfig, layout: &Layout) -> Result<PublishSummary> {
    let sample_path = require("publish-points", "prepare", layout.prepared().join("graph_sample.csv"))?;
    let mut acc = BudgetAccountant::new(cfg.cap()?);
    if cfg.publish.planned_spend() > 0.0 {
        acc.check("publish", PrivacyBudget::pure(cfg.publish.planned_spend())?)
            .map_err(|e| CliError::budget(e, &acc))?;
    }
    let ds = Dataset::read_csv(&sample_path, &cfg.schema)?;
    let mut rng = stage_rng(cfg.seed, "publish");
    let published = match cfg.publish.method {
        PublishMethod::DpCluster => {
            convergent_dp_cluster(&ds, &cfg.publish.cluster_params(), &mut rng, &mut acc)
        }
        PublishMethod::RecordPerturbation => {
            record_perturbation(&ds, cfg.publish.epsilon, &mut rng, &mut acc)
        }
        PublishMethod::None => Ok(publish_records(&ds)),
    }
    .map_err(|e| CliError::budget(e, &acc))?;

    let dir = layout.published();
    create_dir(&dir)?;
    published.write(&dir, &cfg.schema, cfg.seed)?;
    let summary = PublishSummary {
        method: published.method,
        points: published.len(),
        budget_spent: published.budget_spent,
    };
    write_manifest(&dir, "publish-points", cfg, &acc, json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub candidates: usize,
    pub components: usize,
    pub bandwidth: f64,
}

fn graph_density(cfg: &PipelineConfig, published: &PublishedPoints) -> Result<DensityModel> {
    let support = match cfg.graph.density_source {
        DensitySource::Published => published.points.clone(),
        DensitySource::External => {
            let path = cfg.graph.external_density.as_ref().expect("validated config");
            preprocess(&load_csv(path, &cfg.schema)?)?.rows
        }
    };
    Ok(fit_kde(&support, cfg.graph.bandwidth)?)
}

/// Builds the recourse graph over the published points. Pure post-processing.
pub fn build_graph_stage(cfg: &PipelineConfig, layout: &Layout) -> Result<GraphSummary> {
    require("build-graph", "publish-points", layout.published().join("points.json"))?;
    let model = load_model(cfg, layout, "build-graph")?;
    let (published, _) = PublishedPoints::read(&layout.published())?;
    let density = graph_density(cfg, &published)?;
    let graph = build_graph(&published, &cfg.graph.graph_config(), &density, &cfg.schema, &model)?;

    let dir = layout.graph();
    create_dir(&dir)?;
    graph.write(&dir, &cfg.schema)?;
    let summary = GraphSummary {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        candidates: graph.candidates().len(),
        components: connected_components(&graph).len(),
        bandwidth: density.bandwidth(),
    };
    write_manifest(
        &dir,
        "build-graph",
        cfg,
        &BudgetAccountant::new(cfg.cap()?),
        json!(summary),
    )?;
    Ok(summary)
}

fn load_graph(layout: &Layout, stage: &'static str) -> Result<RecourseGraph> {
    let dir = layout.graph();
    require(stage, "build-graph", dir.join("graph.json"))?;
    Ok(RecourseGraph::read(&dir)?)
}

/// A query record, either typed in raw feature space or picked from the
/// prepared query set.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryInput {
    /// `name=value` pairs separated by commas, covering every feature.
    Instance(String),
    /// Index into `prepared/queries.csv`.
    Row(usize),
}

/// Parses `age=41,education-num=10,...` into a preprocessed record.
pub fn parse_instance(text: &str, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let mut values: Vec<Option<RawValue>> = vec![None; cfg.schema.features.len()];
    for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected name=value, got `{pair}`")))?;
        let idx = cfg
            .schema
            .feature_index(name.trim())
            .ok_or_else(|| CliError::Config(format!("unknown feature `{}`", name.trim())))?;
        values[idx] = Some(cfg.schema.features[idx].parse_value(value, 0)?);
    }
    let raw = values
        .into_iter()
        .zip(&cfg.schema.features)
        .map(|(v, f)| v.ok_or_else(|| CliError::Config(format!("missing feature `{}`", f.name))))
        .collect::<Result<Vec<_>>>()?;
    Ok(preprocess_record(&raw, &cfg.schema)?)
}

/// Answers one recourse query (up to `recourse.k` paths) from the published
/// graph and model only.
pub fn query(cfg: &PipelineConfig, layout: &Layout, input: &QueryInput) -> Result<Vec<PathReport>> {
    let graph = load_graph(layout, "query")?;
    let model = load_model(cfg, layout, "query")?;
    let z = match input {
        QueryInput::Instance(text) => parse_instance(text, cfg)?,
        QueryInput::Row(i) => {
            let path = require("query", "prepare", layout.prepared().join("queries.csv"))?;
            let queries = Dataset::read_csv(&path, &cfg.schema)?;
            queries.rows.get(*i).cloned().ok_or_else(|| {
                CliError::Config(format!("query row {i} out of range ({} rows)", queries.len()))
            })?
        }
    };
    let t = Instant::now();
    let paths = diverse_recourse(&graph, &z, cfg.recourse.k)?;
    let seconds = t.elapsed().as_secs_f64();
    let reports = paths
        .iter()
        .map(|p| path_report(p, &cfg.schema, &model, seconds))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = layout.query();
    create_dir(&dir)?;
    write_json(&dir.join("paths.json"), &reports)?;
    Ok(reports)
}

/// Renders a path as a table in raw feature space.
pub fn render_path(report: &PathReport) -> String {
    let mut header = vec!["row".to_string(), "node".to_string()];
    header.extend(report.columns.iter().cloned());
    header.push("prediction".to_string());
    let mut rows = vec![header];
    for r in &report.rows {
        let mut line = vec![
            r.role.clone(),
            r.node.map_or("-".to_string(), |n| n.to_string()),
        ];
        line.extend(r.raw.iter().cloned());
        line.push(format!("{:?}", r.prediction).to_lowercase());
        rows.push(line);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str(&format!(
        "total weight {:.6}, {} steps, {:.3} ms\n",
        report.total_weight,
        report.step_count,
        report.seconds * 1e3
    ));
    out
}

/// A path that broke the recourse contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub query_id: usize,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub summary: MetricsSummary,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PathRecord {
    query_id: usize,
    nodes: Vec<usize>,
    total_weight: f64,
    steps: Vec<Vec<f64>>,
}

/// Runs every query predicted unfavorable, scores the paths, and checks each
/// path against the recourse contract.
pub fn evaluate(cfg: &PipelineConfig, layout: &Layout) -> Result<EvalSummary> {
    let graph = load_graph(layout, "evaluate")?;
    let model = load_model(cfg, layout, "evaluate")?;
    let queries_path = require("evaluate", "prepare", layout.prepared().join("queries.csv"))?;
    let sample_path = require("evaluate", "prepare", layout.prepared().join("graph_sample.csv"))?;
    let queries = Dataset::read_csv(&queries_path, &cfg.schema)?;
    let reference = Dataset::read_csv(&sample_path, &cfg.schema)?;

    let mut unfavorable = Vec::new();
    for q in &queries.rows {
        if !model.is_favorable(q)? {
            unfavorable.push(q.clone());
        }
    }
    let density = fit_kde(&reference.rows, cfg.metrics.bandwidth)?;
    let ctx = EvalContext {
        graph: &graph,
        model: &model,
        schema: &cfg.schema,
        density: &density,
        train: &reference,
        ynn_k: cfg.metrics.ynn_k,
    };
    let evaluation = evaluate_batch(&unfavorable, &ctx);

    let mut violations = Vec::new();
    let mut records = Vec::new();
    for (id, path) in evaluation.paths.iter().enumerate() {
        let Some(path) = path else { continue };
        let problems = path_violations(path, &graph, &model, &cfg.schema)?;
        if !problems.is_empty() {
            violations.push(Violation { query_id: id, problems });
        }
        records.push(PathRecord {
            query_id: id,
            nodes: path.nodes.clone(),
            total_weight: path.total_weight,
            steps: path.steps.clone(),
        });
    }

    let dir = layout.eval();
    create_dir(&dir)?;
    evaluation.report.write(&dir)?;
    write_json(&dir.join("paths.json"), &records)?;
    let out = EvalSummary {
        summary: evaluation.report.summary.clone(),
        violations,
    };
    write_manifest(
        &dir,
        "evaluate",
        cfg,
        &BudgetAccountant::new(cfg.cap()?),
        json!({
            "queries_sampled": queries.len(),
            "queries_unfavorable": unfavorable.len(),
            "violations": out.violations.len(),
        }),
    )?;
    Ok(out)
}

/// Reads back a written metrics report.
pub fn read_metrics(dir: &Path) -> Result<Vec<QueryRow>> {
    let path = dir.join("metrics.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::Core(e.into()))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Core(e.into())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Every spend of the run composed sequentially.
    pub privacy: PrivacyReport,
    pub model: ModelSummary,
    pub publish: PublishSummary,
    pub graph: Option<GraphSummary>,
    pub metrics: Option<MetricsSummary>,
    pub violations: Option<usize>,
}

fn details<T: for<'de> Deserialize<'de>>(m: &StageManifest) -> Result<T> {
    serde_json::from_value(m.details.clone()).map_err(|e| CliError::Core(e.into()))
}

/// Composes the stage ledgers and collects the stage summaries.
pub fn report(cfg: &PipelineConfig, layout: &Layout) -> Result<RunReport> {
    require("report", "train-model", layout.model().join("manifest.json"))?;
    require("report", "publish-points", layout.published().join("manifest.json"))?;
    let model_m = StageManifest::read(&layout.model())?;
    let publish_m = StageManifest::read(&layout.published())?;

    let mut acc = BudgetAccountant::new(cfg.cap()?);
    let steps: Vec<LedgerEntry> = model_m
        .privacy
        .steps
        .iter()
        .chain(&publish_m.privacy.steps)
        .cloned()
        .collect();
    for step in steps {
        acc.spend(&step.label, step.spent)
            .map_err(|e| CliError::budget(e, &acc))?;
    }

    let graph = if layout.graph().join("manifest.json").exists() {
        Some(details(&StageManifest::read(&layout.graph())?)?)
    } else {
        None
    };
    let (metrics, violations) = if layout.eval().join("manifest.json").exists() {
        let m = StageManifest::read(&layout.eval())?;
        let text = std::fs::read_to_string(layout.eval().join("metrics.json"))
            .map_err(|e| CliError::io(layout.eval().join("metrics.json"), e))?;
        let summary: MetricsSummary =
            serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))?;
        (Some(summary), m.details["violations"].as_u64().map(|v| v as usize))
    } else {
        (None, None)
    };
    let out = RunReport {
        privacy: acc.report(),
        model: details(&model_m)?,
        publish: details(&publish_m)?,
        graph,
        metrics,
        violations,
    };
    write_json(&layout.report(), &out)?;
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4}"))
}

pub fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("privacy ledger:\n");
    for s in &r.privacy.steps {
        out.push_str(&format!(
            "  {:<10} epsilon {}  delta {}\n",
            s.label, s.spent.epsilon, s.spent.delta
        ));
    }
    out.push_str(&format!(
        "  {:<10} epsilon {}  delta {}  (cap {} / {})\n",
        "total", r.privacy.total.epsilon, r.privacy.total.delta, r.privacy.cap.epsilon, r.privacy.cap.delta
    ));
    out.push_str(&format!("model test accuracy: {:.4}\n", r.model.test_accuracy));
    out.push_str(&format!(
        "published: {} points via {:?}\n",
        r.publish.points, r.publish.method
    ));
    if let Some(g) = &r.graph {
        out.push_str(&format!(
            "graph: {} nodes, {} edges, {} candidates, {} components\n",
            g.nodes, g.edges, g.candidates, g.components
        ));
    }
    if let Some(m) = &r.metrics {
        out.push_str(&render_metrics_header());
        out.push_str(&render_metrics_row("run", m));
    }
    if let Some(v) = r.violations {
        out.push_str(&format!("path violations: {v}\n"));
    }
    out
}

fn render_metrics_header() -> String {
    format!(
        "{:<22}{:>6}{:>9}{:>10}{:>10}{:>8}{:>8}{:>8}{:>7}{:>7}{:>10}\n",
        "method", "#CFE", "success", "PDensity", "PDistMan", "PL0", "PL1", "PL2", "yNN", "Red.", "T(s)"
    )
}

fn render_metrics_row(name: &str, m: &MetricsSummary) -> String {
    format!(
        "{:<22}{:>6}{:>9.3}{:>10}{:>10}{:>8}{:>8}{:>8}{:>7}{:>7}{:>10.5}\n",
        name,
        m.cfe_count,
        m.success_rate,
        fmt_opt(m.pdensity),
        fmt_opt(m.pdistance_manifold),
        fmt_opt(m.pl0),
        fmt_opt(m.pl1),
        fmt_opt(m.pl2),
        fmt_opt(m.ynn),
        fmt_opt(m.redundancy),
        m.mean_time_seconds,
    )
}

/// Runs every stage in order.
pub fn run_all(cfg: &PipelineConfig, layout: &Layout) -> Result<RunReport> {
    prepare(cfg, layout)?;
    train_model(cfg, layout)?;
    publish_points(cfg, layout)?;
    build_graph_stage(cfg, layout)?;
    evaluate(cfg, layout)?;
    report(cfg, layout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<(PublishMethod, RunReport)>,
}

pub fn method_name(m: PublishMethod) -> &'static str {
    match m {
        PublishMethod::DpCluster => "dp_cluster",
        PublishMethod::RecordPerturbation => "record_perturbation",
        PublishMethod::None => "none",
    }
}

/// Shares one prepared split and one model across publishers and evaluates
/// each publisher under `<out>/<method>/`.
pub fn compare(cfg: &PipelineConfig, layout: &Layout, methods: &[PublishMethod]) -> Result<Comparison> {
    for &m in methods {
        let mut c = cfg.clone();
        c.publish.method = m;
        c.validate()?;
    }
    prepare(cfg, layout)?;
    train_model(cfg, layout)?;
    let mut rows = Vec::new();
    for &m in methods {
        let mut c = cfg.clone();
        c.publish.method = m;
        let l = layout.variant(method_name(m));
        publish_points(&c, &l)?;
        build_graph_stage(&c, &l)?;
        evaluate(&c, &l)?;
        rows.push((m, report(&c, &l)?));
    }
    let out = Comparison { rows };
    write_json(&layout.root.join("compare.json"), &out)?;
    Ok(out)
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut out = render_metrics_header();
    for (m, r) in &c.rows {
        if let Some(s) = &r.metrics {
            out.push_str(&render_metrics_row(method_name(*m), s));
        }
    }
    out
}
