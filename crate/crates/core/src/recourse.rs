//! Recourse queries over a published graph: start-node lookup, shortest and
//! k-shortest (loopless) paths to the candidate counterfactuals.
//!
//! Everything here takes the graph (and, for checks and reports, the model);
//! nothing can reach the private dataset.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{decode_record, FeatureSchema, Outcome};
use crate::distance::{l2, squared_l2};
use crate::error::{check_dim, Error, Result};
use crate::graph::{constraint_check, RecourseGraph};
use crate::model::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoursePath {
    /// The query record `Z`; not itself a graph node.
    pub query: Vec<f64>,
    /// Node ids `Z_1..Z_p`.
    pub nodes: Vec<usize>,
    /// Node records `Z_1..Z_p`.
    pub steps: Vec<Vec<f64>>,
    pub total_weight: f64,
    pub step_count: usize,
}

impl RecoursePath {
    fn from_nodes(g: &RecourseGraph, query: &[f64], nodes: Vec<usize>) -> Self {
        RecoursePath {
            query: query.to_vec(),
            steps: nodes.iter().map(|&i| g.node(i).to_vec()).collect(),
            total_weight: path_weight(g, &nodes),
            step_count: nodes.len(),
            nodes,
        }
    }

    /// The counterfactual `Z* = Z_p`.
    pub fn endpoint(&self) -> &[f64] {
        self.steps.last().expect("paths are never empty")
    }

    pub fn endpoint_id(&self) -> usize {
        *self.nodes.last().expect("paths are never empty")
    }
}

/// Sum of edge weights along `nodes`, accumulated front to back.
pub fn path_weight(g: &RecourseGraph, nodes: &[usize]) -> f64 {
    nodes
        .windows(2)
        .map(|w| g.edge_weight(w[0], w[1]).unwrap_or(f64::INFINITY))
        .fold(0.0, |acc, w| acc + w)
}

/// The non-candidate node nearest to `z` in L2; ties go to the lower id.
pub fn nearest_start_node(g: &RecourseGraph, z: &[f64]) -> Result<usize> {
    if let Some(first) = g.nodes().first() {
        check_dim(first.len(), z.len())?;
    }
    let mut best: Option<(f64, usize)> = None;
    for i in 0..g.node_count() {
        if g.is_candidate(i) {
            continue;
        }
        let d = squared_l2(g.node(i), z);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i).ok_or(Error::NoStartNode)
}

#[derive(Debug, Clone, Copy)]
struct Label {
    weight: f64,
    hops: usize,
    pred: Option<usize>,
}

impl Label {
    fn key(&self) -> (f64, usize) {
        (self.weight, self.hops)
    }
}

fn cmp_key(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[derive(Debug, PartialEq)]
struct Entry {
    weight: f64,
    hops: usize,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then(other.hops.cmp(&self.hops))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source search from `source` to the cheapest candidate node.
///
/// Labels are compared by (weight, hops). Candidates end paths and are never
/// expanded. Among equally good labels a node keeps the lowest-id predecessor,
/// and the final endpoint is the minimum by (weight, hops, id).
fn search(
    g: &RecourseGraph,
    source: usize,
    blocked_nodes: &[bool],
    blocked_edges: &HashSet<(usize, usize)>,
) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    labels[source] = Some(Label {
        weight: 0.0,
        hops: 0,
        pred: None,
    });
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        weight: 0.0,
        hops: 0,
        node: source,
    });

    while let Some(Entry { weight, hops, node }) = heap.pop() {
        if settled[node] {
            continue;
        }
        let label = labels[node].expect("queued nodes are labelled");
        if label.key() != (weight, hops) {
            continue;
        }
        settled[node] = true;
        if node != source && g.is_candidate(node) {
            continue;
        }
        for e in g.edges(node) {
            let v = e.to;
            if v == source || blocked_nodes[v] || blocked_edges.contains(&(node, v)) {
                continue;
            }
            let cand = Label {
                weight: weight + e.weight,
                hops: hops + 1,
                pred: Some(node),
            };
            match labels[v] {
                None => {
                    labels[v] = Some(cand);
                    heap.push(Entry {
                        weight: cand.weight,
                        hops: cand.hops,
                        node: v,
                    });
                }
                Some(old) => match cmp_key(cand.key(), old.key()) {
                    Ordering::Less => {
                        labels[v] = Some(cand);
                        heap.push(Entry {
                            weight: cand.weight,
                            hops: cand.hops,
                            node: v,
                        });
                    }
                    Ordering::Equal if old.pred.is_some_and(|p| node < p) => {
                        labels[v] = Some(cand);
                    }
                    _ => {}
                },
            }
        }
    }

    let end = (0..n)
        .filter(|&i| i != source && g.is_candidate(i))
        .filter_map(|i| labels[i].map(|l| (l.key(), i)))
        .min_by(|a, b| cmp_key(a.0, b.0).then(a.1.cmp(&b.1)))?
        .1;
    let mut path = vec![end];
    let mut cur = end;
    while let Some(p) = labels[cur].and_then(|l| l.pred) {
        path.push(p);
        cur = p;
    }
    path.reverse();
    Some(path)
}

fn start_for(g: &RecourseGraph, z: &[f64]) -> Result<usize> {
    if g.candidates().is_empty() {
        return Err(Error::NoCandidates);
    }
    nearest_start_node(g, z)
}

/// Cheapest path from the node nearest `z` to any candidate counterfactual.
///
/// Ties are broken by hop count, then endpoint id, then lowest predecessor ids
/// walking back from the endpoint.
pub fn shortest_recourse(g: &RecourseGraph, z: &[f64]) -> Result<RecoursePath> {
    let start = start_for(g, z)?;
    let blocked = vec![false; g.node_count()];
    let nodes = search(g, start, &blocked, &HashSet::new()).ok_or(Error::NoRecourse { start })?;
    Ok(RecoursePath::from_nodes(g, z, nodes))
}

/// Up to `k` loopless paths to candidates in nondecreasing weight (Yen's
/// deviation search). The first path is exactly [`shortest_recourse`].
pub fn diverse_recourse(g: &RecourseGraph, z: &[f64], k: usize) -> Result<Vec<RecoursePath>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let start = start_for(g, z)?;
    let n = g.node_count();
    let first = search(g, start, &vec![false; n], &HashSet::new())
        .ok_or(Error::NoRecourse { start })?;

    let mut accepted: Vec<Vec<usize>> = vec![first];
    let mut pending: Vec<(f64, Vec<usize>)> = Vec::new();
    while accepted.len() < k {
        let last = accepted.last().expect("non-empty").clone();
        for i in 0..last.len() - 1 {
            let root = &last[..=i];
            let blocked_edges: HashSet<(usize, usize)> = accepted
                .iter()
                .filter(|p| p.len() > i + 1 && &p[..=i] == root)
                .map(|p| (p[i], p[i + 1]))
                .collect();
            let mut blocked_nodes = vec![false; n];
            for &r in &root[..i] {
                blocked_nodes[r] = true;
            }
            if let Some(spur) = search(g, last[i], &blocked_nodes, &blocked_edges) {
                let mut candidate = root[..i].to_vec();
                candidate.extend(spur);
                if !accepted.contains(&candidate) && !pending.iter().any(|(_, p)| *p == candidate)
                {
                    pending.push((path_weight(g, &candidate), candidate));
                }
            }
        }
        let Some(best) = pending
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.0.total_cmp(&b.0)
                    .then(a.1.len().cmp(&b.1.len()))
                    .then(a.1.cmp(&b.1))
            })
            .map(|(i, _)| i)
        else {
            break;
        };
        accepted.push(pending.swap_remove(best).1);
    }
    Ok(accepted
        .into_iter()
        .map(|nodes| RecoursePath::from_nodes(g, z, nodes))
        .collect())
}

/// Lists every way `path` breaks the recourse contract: interior nodes must be
/// predicted unfavorable, the endpoint favorable, and each hop must be a graph
/// edge shorter than the distance threshold that respects the constraints.
pub fn path_violations(
    path: &RecoursePath,
    g: &RecourseGraph,
    model: &dyn Classifier,
    schema: &FeatureSchema,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if path.nodes.is_empty() || path.nodes.len() != path.steps.len() {
        out.push("path has no steps or mismatched node/step lists".to_string());
        return Ok(out);
    }
    if path.step_count != path.nodes.len() {
        out.push(format!(
            "step_count {} but {} nodes",
            path.step_count,
            path.nodes.len()
        ));
    }
    let last = path.nodes.len() - 1;
    for (i, step) in path.steps.iter().enumerate() {
        let favorable = model.is_favorable(step)?;
        if i < last && favorable {
            out.push(format!("interior step {i} (node {}) is favorable", path.nodes[i]));
        }
        if i == last && !favorable {
            out.push(format!("endpoint node {} is not favorable", path.nodes[i]));
        }
        if g.node(path.nodes[i]) != step.as_slice() {
            out.push(format!("step {i} does not match node {}", path.nodes[i]));
        }
    }
    for (i, w) in path.nodes.windows(2).enumerate() {
        let (a, b) = (g.node(w[0]), g.node(w[1]));
        if g.edge_weight(w[0], w[1]).is_none() {
            out.push(format!("no edge {} -> {}", w[0], w[1]));
        }
        if l2(a, b) >= g.config.distance_threshold {
            out.push(format!("hop {i} is longer than the distance threshold"));
        }
        if !constraint_check(a, b, schema).allows_forward() {
            out.push(format!("hop {i} ({} -> {}) violates a constraint", w[0], w[1]));
        }
    }
    let expected = path_weight(g, &path.nodes);
    if (expected - path.total_weight).abs() > 1e-12 * expected.abs().max(1.0) {
        out.push(format!(
            "total weight {} but edges sum to {expected}",
            path.total_weight
        ));
    }
    Ok(out)
}

/// One row of a human-readable path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// `query`, `step` or `counterfactual`.
    pub role: String,
    pub node: Option<usize>,
    pub encoded: Vec<f64>,
    pub raw: Vec<String>,
    pub prediction: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub columns: Vec<String>,
    pub rows: Vec<StepReport>,
    pub total_weight: f64,
    pub step_count: usize,
    pub seconds: f64,
}

/// Renders a path in both preprocessed and raw feature space.
pub fn path_report(
    path: &RecoursePath,
    schema: &FeatureSchema,
    model: &dyn Classifier,
    seconds: f64,
) -> Result<PathReport> {
    let render = |x: &[f64]| -> Result<Vec<String>> {
        Ok(decode_record(x, schema)?
            .iter()
            .zip(&schema.features)
            .map(|(v, f)| f.render(v))
            .collect())
    };
    let mut rows = vec![StepReport {
        role: "query".into(),
        node: None,
        encoded: path.query.clone(),
        raw: render(&path.query)?,
        prediction: model.predict(&path.query)?,
    }];
    let last = path.nodes.len().saturating_sub(1);
    for (i, (&node, step)) in path.nodes.iter().zip(&path.steps).enumerate() {
        rows.push(StepReport {
            role: if i == last { "counterfactual" } else { "step" }.into(),
            node: Some(node),
            encoded: step.clone(),
            raw: render(step)?,
            prediction: model.predict(step)?,
        });
    }
    Ok(PathReport {
        columns: schema.features.iter().map(|f| f.name.clone()).collect(),
        rows,
        total_weight: path.total_weight,
        step_count: path.step_count,
        seconds,
    })
}
