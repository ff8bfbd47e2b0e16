//! Constraint-aware, density-weighted recourse graph over published points.

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Constraint, FeatureSchema};
use crate::density::DensityModel;
use crate::distance::{l2, midpoint};
use crate::error::{check_dim, Error, Result};
use crate::model::Classifier;
use crate::privacy::PrivacyBudget;
use crate::publish::{PublishMethod, PublishedPoints};

/// Tolerance for monotone and immutability checks.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Nodes closer than this (L2, preprocessed space) may be joined.
    pub distance_threshold: f64,
    /// Lower bound on the midpoint density in the weight denominator.
    pub density_floor: f64,
    /// Proportionality constant of the weight.
    pub weight_scale: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            distance_threshold: 0.4,
            density_floor: 1e-12,
            weight_scale: 1.0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.distance_threshold)
            || !positive(self.density_floor)
            || !positive(self.weight_scale)
        {
            return Err(Error::InvalidParameter(format!(
                "graph parameters must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Something that can score a point's density for edge weights.
pub trait Density: Sync {
    fn density(&self, x: &[f64]) -> Result<f64>;
}

impl Density for DensityModel {
    fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }
}

/// Constant density; edge weights reduce to scaled distances.
#[derive(Debug, Clone, Copy)]
pub struct UniformDensity(pub f64);

impl Density for UniformDensity {
    fn density(&self, _x: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Which traversal directions between two records respect every constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Both,
    ForwardOnly,
    BackwardOnly,
    None,
}

impl Direction {
    fn from_flags(forward: bool, backward: bool) -> Self {
        match (forward, backward) {
            (true, true) => Direction::Both,
            (true, false) => Direction::ForwardOnly,
            (false, true) => Direction::BackwardOnly,
            (false, false) => Direction::None,
        }
    }

    pub fn allows_forward(self) -> bool {
        matches!(self, Direction::Both | Direction::ForwardOnly)
    }

    pub fn allows_backward(self) -> bool {
        matches!(self, Direction::Both | Direction::BackwardOnly)
    }
}

/// Evaluates the schema's actionability constraints for moving `from → to`
/// (forward) and `to → from` (backward).
pub fn constraint_check(from: &[f64], to: &[f64], schema: &FeatureSchema) -> Direction {
    let mut forward = true;
    let mut backward = true;
    for (f, block) in schema.features.iter().zip(schema.blocks()) {
        match f.constraint {
            Constraint::None => {}
            Constraint::NonDecreasing => {
                let (a, b) = (from[block.start], to[block.start]);
                forward &= b >= a - CONSTRAINT_TOLERANCE;
                backward &= a >= b - CONSTRAINT_TOLERANCE;
            }
            Constraint::NonIncreasing => {
                let (a, b) = (from[block.start], to[block.start]);
                forward &= b <= a + CONSTRAINT_TOLERANCE;
                backward &= a <= b + CONSTRAINT_TOLERANCE;
            }
            Constraint::Immutable => {
                let same = block
                    .clone()
                    .all(|j| (from[j] - to[j]).abs() <= CONSTRAINT_TOLERANCE);
                forward &= same;
                backward &= same;
            }
        }
        if !forward && !backward {
            break;
        }
    }
    Direction::from_flags(forward, backward)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    pub weight: f64,
}

/// Where the graph's nodes came from and what they cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: PublishMethod,
    pub budget_spent: PrivacyBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecourseGraph {
    nodes: Vec<Vec<f64>>,
    /// Outgoing edges per node, sorted by target id.
    adjacency: Vec<Vec<Edge>>,
    favorable: Vec<bool>,
    pub favorable_label: String,
    pub config: GraphConfig,
    pub provenance: Provenance,
}

impl RecourseGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn node(&self, id: usize) -> &[f64] {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn edges(&self, id: usize) -> &[Edge] {
        &self.adjacency[id]
    }

    pub fn edge_weight(&self, from: usize, to: usize) -> Option<f64> {
        let edges = &self.adjacency[from];
        edges
            .binary_search_by(|e| e.to.cmp(&to))
            .ok()
            .map(|i| edges[i].weight)
    }

    /// Whether the node is in the candidate counterfactual set.
    pub fn is_candidate(&self, id: usize) -> bool {
        self.favorable[id]
    }

    pub fn candidates(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.favorable[i]).collect()
    }

    /// Nodes outside the candidate set (possible start nodes).
    pub fn non_candidates(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.favorable[i]).collect()
    }

    /// Assembles a graph from parts. Edges are sorted and validated.
    pub fn from_parts(
        nodes: Vec<Vec<f64>>,
        mut adjacency: Vec<Vec<Edge>>,
        favorable: Vec<bool>,
        favorable_label: String,
        config: GraphConfig,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = nodes.len();
        if adjacency.len() != n || favorable.len() != n {
            return Err(Error::InvalidParameter(format!(
                "graph parts disagree: {n} nodes, {} adjacency lists, {} labels",
                adjacency.len(),
                favorable.len()
            )));
        }
        for list in &mut adjacency {
            list.sort_by_key(|e| e.to);
            if let Some(bad) = list
                .iter()
                .find(|e| e.to >= n || !e.weight.is_finite() || e.weight < 0.0)
            {
                return Err(Error::InvalidParameter(format!("invalid edge {bad:?}")));
            }
        }
        Ok(RecourseGraph {
            nodes,
            adjacency,
            favorable,
            favorable_label,
            config,
            provenance,
        })
    }

    /// Writes `nodes.csv`, `edges.csv` and `graph.json` into `dir`.
    pub fn write(&self, dir: &Path, schema: &FeatureSchema) -> Result<()> {
        let nodes_path = dir.join("nodes.csv");
        let file = File::create(&nodes_path).map_err(|e| Error::io(&nodes_path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["id".to_string()];
        header.extend(schema.encoded_columns());
        w.write_record(&header)?;
        for (i, node) in self.nodes.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(node.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&nodes_path, e))?;

        let edges_path = dir.join("edges.csv");
        let file = File::create(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["from_id", "to_id", "weight"])?;
        for (i, list) in self.adjacency.iter().enumerate() {
            for e in list {
                w.write_record([i.to_string(), e.to.to_string(), e.weight.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&edges_path, e))?;

        let manifest = GraphManifest {
            distance_threshold: self.config.distance_threshold,
            density_floor: self.config.density_floor,
            weight_scale: self.config.weight_scale,
            favorable_label: self.favorable_label.clone(),
            candidate_ids: self.candidates(),
            node_count: self.node_count(),
            edge_count: self.edge_count(),
            provenance: self.provenance,
        };
        let json_path = dir.join("graph.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&json_path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let json_path = dir.join("graph.json");
        let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let manifest: GraphManifest = serde_json::from_str(&text)?;

        let nodes_path = dir.join("nodes.csv");
        let file = File::open(&nodes_path).map_err(|e| Error::io(&nodes_path, e))?;
        let mut nodes = Vec::with_capacity(manifest.node_count);
        for (i, rec) in csv::Reader::from_reader(file).records().enumerate() {
            let rec = rec?;
            let node = rec
                .iter()
                .skip(1)
                .map(|c| parse_cell(c, i, "node"))
                .collect::<Result<Vec<_>>>()?;
            nodes.push(node);
        }
        let n = nodes.len();
        if n != manifest.node_count {
            return Err(Error::SchemaMismatch(format!(
                "manifest lists {} nodes, nodes.csv holds {n}",
                manifest.node_count
            )));
        }

        let edges_path = dir.join("edges.csv");
        let file = File::open(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
        let mut adjacency = vec![Vec::new(); n];
        for (i, rec) in csv::Reader::from_reader(file).records().enumerate() {
            let rec = rec?;
            let from = parse_cell(rec.get(0).unwrap_or(""), i, "from_id")? as usize;
            let to = parse_cell(rec.get(1).unwrap_or(""), i, "to_id")? as usize;
            let weight = parse_cell(rec.get(2).unwrap_or(""), i, "weight")?;
            if from >= n {
                return Err(Error::InvalidParameter(format!("edge from unknown node {from}")));
            }
            adjacency[from].push(Edge { to, weight });
        }
        let mut favorable = vec![false; n];
        for &c in &manifest.candidate_ids {
            if c >= n {
                return Err(Error::InvalidParameter(format!("unknown candidate id {c}")));
            }
            favorable[c] = true;
        }
        RecourseGraph::from_parts(
            nodes,
            adjacency,
            favorable,
            manifest.favorable_label,
            GraphConfig {
                distance_threshold: manifest.distance_threshold,
                density_floor: manifest.density_floor,
                weight_scale: manifest.weight_scale,
            },
            manifest.provenance,
        )
    }
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: e.to_string(),
    })
}

/// JSON manifest stored with a serialized graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub distance_threshold: f64,
    pub density_floor: f64,
    pub weight_scale: f64,
    pub favorable_label: String,
    pub candidate_ids: Vec<usize>,
    pub node_count: usize,
    pub edge_count: usize,
    pub provenance: Provenance,
}

/// Builds the recourse graph.
///
/// Every pair closer than the threshold gets an edge in each direction its
/// constraints allow, weighted `scale * d(i,j) / max(ρ((i+j)/2), floor)`.
/// Pairs whose constraints fail both ways get no edge. Candidates are the
/// nodes the model labels favorable.
pub fn build_graph(
    pts: &PublishedPoints,
    cfg: &GraphConfig,
    density: &dyn Density,
    schema: &FeatureSchema,
    model: &dyn Classifier,
) -> Result<RecourseGraph> {
    cfg.validate()?;
    if pts.is_empty() {
        return Err(Error::InsufficientData("no published points".into()));
    }
    let width = schema.width();
    for p in &pts.points {
        check_dim(width, p.len())?;
    }
    check_dim(width, model.input_width())?;
    let nodes = &pts.points;
    let n = nodes.len();

    let pair_edges: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<(usize, usize, f64)>> {
            let mut out = Vec::new();
            for j in i + 1..n {
                let d = l2(&nodes[i], &nodes[j]);
                if d >= cfg.distance_threshold {
                    continue;
                }
                let dir = constraint_check(&nodes[i], &nodes[j], schema);
                if dir == Direction::None {
                    continue;
                }
                let rho = density
                    .density(&midpoint(&nodes[i], &nodes[j]))?
                    .max(cfg.density_floor);
                let w = cfg.weight_scale * d / rho;
                if dir.allows_forward() {
                    out.push((i, j, w));
                }
                if dir.allows_backward() {
                    out.push((j, i, w));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut adjacency = vec![Vec::new(); n];
    for (from, to, weight) in pair_edges.into_iter().flatten() {
        adjacency[from].push(Edge { to, weight });
    }
    let favorable = nodes
        .iter()
        .map(|p| model.is_favorable(p))
        .collect::<Result<Vec<_>>>()?;

    RecourseGraph::from_parts(
        nodes.clone(),
        adjacency,
        favorable,
        schema.favorable.clone(),
        *cfg,
        Provenance {
            method: pts.method,
            budget_spent: pts.budget_spent,
        },
    )
}

/// Weakly connected components, each sorted, ordered by smallest member.
pub fn connected_components(g: &RecourseGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for e in g.edges(i) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, e.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        by_root.entry(r).or_default().push(i);
    }
    by_root.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, Outcome};
    use crate::density::fit_kde;
    use crate::model::LogisticModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schema(constraints: &[Constraint]) -> FeatureSchema {
        FeatureSchema::new(
            constraints
                .iter()
                .enumerate()
                .map(|(i, c)| FeatureSpec::continuous(&format!("x{i}"), 0.0, 1.0).with_constraint(*c))
                .collect(),
            "y",
            "1",
        )
        .unwrap()
    }

    fn threshold_model(width: usize, feature: usize, cut: f64) -> LogisticModel {
        let mut weights = vec![0.0; width];
        weights[feature] = 1.0;
        LogisticModel {
            weights,
            bias: -cut,
            favorable_label: "1".into(),
            schema_fingerprint: String::new(),
        }
    }

    fn points(p: Vec<Vec<f64>>) -> PublishedPoints {
        PublishedPoints {
            points: p,
            method: PublishMethod::None,
            budget_spent: PrivacyBudget::zero(),
            k: None,
        }
    }

    #[test]
    fn threshold_keeps_adjacent_pairs_only() {
        let s = schema(&[Constraint::None]);
        let pts = points(vec![vec![0.0], vec![0.3], vec![0.6]]);
        let g = build_graph(
            &pts,
            &GraphConfig::default(),
            &UniformDensity(1.0),
            &s,
            &threshold_model(1, 0, 0.5),
        )
        .unwrap();
        assert!(g.edge_weight(0, 1).is_some() && g.edge_weight(1, 0).is_some());
        assert!(g.edge_weight(1, 2).is_some() && g.edge_weight(2, 1).is_some());
        assert!(g.edge_weight(0, 2).is_none() && g.edge_weight(2, 0).is_none());
        assert_eq!(g.candidates(), vec![2]);
        assert_eq!(g.non_candidates(), vec![0, 1]);
    }

    #[test]
    fn non_decreasing_feature_gives_one_way_edge() {
        let s = schema(&[Constraint::NonDecreasing, Constraint::None]);
        let pts = points(vec![vec![0.2, 0.5], vec![0.4, 0.5]]);
        let g = build_graph(
            &pts,
            &GraphConfig::default(),
            &UniformDensity(1.0),
            &s,
            &threshold_model(2, 0, 0.9),
        )
        .unwrap();
        assert!(g.edge_weight(0, 1).is_some());
        assert!(g.edge_weight(1, 0).is_none());
    }

    #[test]
    fn weight_formula_hand_value() {
        let s = schema(&[Constraint::None, Constraint::None]);
        let pts = points(vec![vec![0.1, 0.1], vec![0.1, 0.3]]);
        let g = build_graph(
            &pts,
            &GraphConfig::default(),
            &UniformDensity(0.5),
            &s,
            &threshold_model(2, 0, 0.9),
        )
        .unwrap();
        assert!((g.edge_weight(0, 1).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn kde_weight_uses_midpoint_density() {
        let s = schema(&[Constraint::None, Constraint::None]);
        let pts = points(vec![vec![0.1, 0.1], vec![0.1, 0.3]]);
        let kde = fit_kde(&[vec![0.5, 0.5], vec![0.1, 0.2]], Some(0.1)).unwrap();
        let g = build_graph(
            &pts,
            &GraphConfig::default(),
            &kde,
            &s,
            &threshold_model(2, 0, 0.9),
        )
        .unwrap();
        let rho = kde.log_density(&[0.1, 0.2]).unwrap().exp();
        assert!((g.edge_weight(0, 1).unwrap() - 0.2 / rho).abs() < 1e-12);
    }

    #[test]
    fn constraint_check_cases() {
        let free = schema(&[Constraint::None, Constraint::None]);
        assert_eq!(constraint_check(&[0.1, 0.2], &[0.9, 0.0], &free), Direction::Both);

        let imm = schema(&[Constraint::Immutable, Constraint::None]);
        assert_eq!(constraint_check(&[0.1, 0.2], &[0.2, 0.2], &imm), Direction::None);
        assert_eq!(constraint_check(&[0.1, 0.2], &[0.1, 0.9], &imm), Direction::Both);

        let mono = schema(&[Constraint::NonDecreasing, Constraint::None]);
        assert_eq!(
            constraint_check(&[0.3, 0.0], &[0.5, 0.0], &mono),
            Direction::ForwardOnly
        );
        assert_eq!(
            constraint_check(&[0.5, 0.0], &[0.3, 0.0], &mono),
            Direction::BackwardOnly
        );
        let dec = schema(&[Constraint::NonIncreasing, Constraint::None]);
        assert_eq!(
            constraint_check(&[0.3, 0.0], &[0.5, 0.0], &dec),
            Direction::BackwardOnly
        );
        let mixed = schema(&[Constraint::NonDecreasing, Constraint::NonIncreasing]);
        assert_eq!(
            constraint_check(&[0.3, 0.3], &[0.5, 0.5], &mixed),
            Direction::None
        );
    }

    #[test]
    fn immutable_categorical_block() {
        let s = FeatureSchema::new(
            vec![
                FeatureSpec::continuous("x", 0.0, 1.0),
                FeatureSpec::categorical("c", &["a", "b"]).with_constraint(Constraint::Immutable),
            ],
            "y",
            "1",
        )
        .unwrap();
        assert_eq!(
            constraint_check(&[0.1, 1.0, 0.0], &[0.5, 0.0, 1.0], &s),
            Direction::None
        );
        assert_eq!(
            constraint_check(&[0.1, 1.0, 0.0], &[0.5, 1.0, 0.0], &s),
            Direction::Both
        );
    }

    fn graph_with_edges(n: usize, edges: &[(usize, usize)]) -> RecourseGraph {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            adjacency[a].push(Edge { to: b, weight: 1.0 });
        }
        RecourseGraph::from_parts(
            vec![vec![0.0]; n],
            adjacency,
            vec![false; n],
            "1".into(),
            GraphConfig::default(),
            Provenance {
                method: PublishMethod::None,
                budget_spent: PrivacyBudget::zero(),
            },
        )
        .unwrap()
    }

    #[test]
    fn components() {
        let mut full = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    full.push((i, j));
                }
            }
        }
        assert_eq!(connected_components(&graph_with_edges(4, &full)).len(), 1);
        assert_eq!(connected_components(&graph_with_edges(5, &[])).len(), 5);
        let cliques = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)];
        let comps = connected_components(&graph_with_edges(6, &cliques));
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        // a single directed edge still joins its endpoints
        assert_eq!(connected_components(&graph_with_edges(3, &[(2, 0)])).len(), 2);
    }

    fn random_points(n: usize, width: usize, seed: u64) -> PublishedPoints {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        points(
            (0..n)
                .map(|_| (0..width).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
    }

    #[test]
    fn symmetric_weights_without_directional_constraints() {
        let s = schema(&[Constraint::None; 3]);
        let pts = random_points(60, 3, 1);
        let kde = fit_kde(&pts.points, None).unwrap();
        let g = build_graph(
            &pts,
            &GraphConfig::default(),
            &kde,
            &s,
            &threshold_model(3, 0, 0.5),
        )
        .unwrap();
        for i in 0..g.node_count() {
            for e in g.edges(i) {
                assert_eq!(g.edge_weight(e.to, i), Some(e.weight));
                assert!(l2(g.node(i), g.node(e.to)) < 0.4);
            }
        }
    }

    #[test]
    fn uniform_density_weights_are_proportional_to_distance() {
        let s = schema(&[Constraint::None; 4]);
        let pts = random_points(40, 4, 2);
        let cfg = GraphConfig {
            distance_threshold: 0.7,
            weight_scale: 3.0,
            ..Default::default()
        };
        let g = build_graph(&pts, &cfg, &UniformDensity(0.25), &s, &threshold_model(4, 0, 0.5))
            .unwrap();
        assert!(g.edge_count() > 0);
        for i in 0..g.node_count() {
            for e in g.edges(i) {
                let ratio = e.weight / l2(g.node(i), g.node(e.to));
                assert!((ratio - 12.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invariants_on_constrained_random_graph() {
        let s = schema(&[Constraint::NonDecreasing, Constraint::Immutable, Constraint::None]);
        let mut pts = random_points(80, 3, 3);
        for p in pts.points.iter_mut() {
            p[1] = if p[1] < 0.5 { 0.0 } else { 1.0 };
        }
        let model = threshold_model(3, 2, 0.6);
        let g = build_graph(&pts, &GraphConfig::default(), &UniformDensity(1.0), &s, &model)
            .unwrap();
        for i in 0..g.node_count() {
            assert_eq!(
                g.is_candidate(i),
                model.predict(g.node(i)).unwrap() == Outcome::Favorable
            );
            for e in g.edges(i) {
                assert!(constraint_check(g.node(i), g.node(e.to), &s).allows_forward());
                assert!(e.weight.is_finite() && e.weight >= 0.0);
            }
        }
        let mut all: Vec<usize> = g.candidates();
        all.extend(g.non_candidates());
        all.sort_unstable();
        assert_eq!(all, (0..g.node_count()).collect::<Vec<_>>());
        // deterministic
        let again = build_graph(&pts, &GraphConfig::default(), &UniformDensity(1.0), &s, &model)
            .unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn disk_round_trip() {
        let s = schema(&[Constraint::None; 2]);
        let pts = random_points(30, 2, 4);
        let kde = fit_kde(&pts.points, None).unwrap();
        let g = build_graph(&pts, &GraphConfig::default(), &kde, &s, &threshold_model(2, 0, 0.5))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        g.write(dir.path(), &s).unwrap();
        assert_eq!(RecourseGraph::read(dir.path()).unwrap(), g);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = schema(&[Constraint::None; 2]);
        let pts = points(vec![vec![0.1, 0.2, 0.3]]);
        let err = build_graph(
            &pts,
            &GraphConfig::default(),
            &UniformDensity(1.0),
            &s,
            &threshold_model(2, 0, 0.5),
        );
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }
}
