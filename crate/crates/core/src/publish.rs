//! DP point-set publishers.
//!
//! [`convergent_dp_cluster`] releases K cluster centers from a clustering loop
//! whose center updates are chosen by the exponential mechanism inside a
//! shrinking "convergent zone". [`record_perturbation`] is the naive baseline
//! that adds Laplace noise to every coordinate of every record.

use std::fs::File;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSchema};
use crate::distance::{l2, mean, midpoint, squared_l2};
use crate::error::{Error, Result};
use crate::privacy::{exponential_mechanism, sample_categorical, sample_laplace, BudgetAccountant, PrivacyBudget};

/// Slack on the convergent-zone radius so the two defining centers stay inside.
const ZONE_SLACK: f64 = 1e-12;
/// Lloyd iterations used to split a zone into subzones.
const SUBZONE_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublishMethod {
    DpCluster,
    RecordPerturbation,
    /// The records themselves; non-private reference only.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedPoints {
    pub points: Vec<Vec<f64>>,
    pub method: PublishMethod,
    pub budget_spent: PrivacyBudget,
    pub k: Option<usize>,
}

/// Sidecar written next to the points CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsManifest {
    pub method: PublishMethod,
    pub budget_spent: PrivacyBudget,
    pub k: Option<usize>,
    pub seed: u64,
    pub count: usize,
    pub width: usize,
}

impl PublishedPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Writes `points.csv` (one point per row, encoded column names) and `points.json`.
    pub fn write(&self, dir: &Path, schema: &FeatureSchema, seed: u64) -> Result<()> {
        let csv_path = dir.join("points.csv");
        let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(schema.encoded_columns())?;
        for p in &self.points {
            w.write_record(p.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let manifest = PointsManifest {
            method: self.method,
            budget_spent: self.budget_spent,
            k: self.k,
            seed,
            count: self.points.len(),
            width: self.width(),
        };
        let json_path = dir.join("points.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&json_path, e))
    }

    pub fn read(dir: &Path) -> Result<(PublishedPoints, PointsManifest)> {
        let json_path = dir.join("points.json");
        let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let manifest: PointsManifest = serde_json::from_str(&text)?;
        let csv_path = dir.join("points.csv");
        let file = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let mut points = Vec::with_capacity(manifest.count);
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let p = rec
                .iter()
                .map(|c| {
                    c.parse::<f64>().map_err(|e| Error::Parse {
                        row: i,
                        column: "point".into(),
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
        if points.len() != manifest.count {
            return Err(Error::SchemaMismatch(format!(
                "{} lists {} points but CSV holds {}",
                json_path.display(),
                manifest.count,
                points.len()
            )));
        }
        Ok((
            PublishedPoints {
                points,
                method: manifest.method,
                budget_spent: manifest.budget_spent,
                k: manifest.k,
            },
            manifest,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    /// Budgeted update iterations T; each gets `epsilon_k / T`.
    pub iterations: usize,
    /// Subzones per convergent zone.
    pub internal_k: usize,
    pub epsilon_k: f64,
    /// Share of each iteration's budget spent by the exponential mechanism.
    pub exp_fraction: f64,
    /// Share pooled across iterations for the final noisy count/sum release.
    pub laplace_fraction: f64,
    /// A cluster releases its noisy mean only when the expected absolute
    /// per-coordinate error of that mean (sum noise scale / noisy count) is at
    /// most this; otherwise the last exponential-mechanism center is kept.
    pub max_release_error: f64,
}

impl ClusterParams {
    pub fn new(k: usize, epsilon_k: f64) -> Self {
        ClusterParams {
            k,
            iterations: 10,
            internal_k: 5,
            epsilon_k,
            exp_fraction: 0.75,
            laplace_fraction: 0.25,
            max_release_error: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.iterations == 0 || self.internal_k == 0 {
            return Err(Error::InvalidParameter(
                "K, T and internal_k must all be at least 1".into(),
            ));
        }
        if !(self.epsilon_k > 0.0 && self.epsilon_k.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "epsilon_k must be positive, got {}",
                self.epsilon_k
            )));
        }
        let fractions_ok = self.exp_fraction > 0.0
            && self.laplace_fraction >= 0.0
            && (self.exp_fraction + self.laplace_fraction - 1.0).abs() < 1e-9;
        if !fractions_ok {
            return Err(Error::InvalidParameter(format!(
                "budget split ({}, {}) must be positive and sum to 1",
                self.exp_fraction, self.laplace_fraction
            )));
        }
        if self.max_release_error.is_nan() || self.max_release_error < 0.0 {
            return Err(Error::InvalidParameter(
                "max_release_error must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Per-iteration budget `epsilon_k / T`.
    pub fn epsilon_per_iteration(&self) -> f64 {
        self.epsilon_k / self.iterations as f64
    }
}

/// Record indices chosen along the way; useful for checking the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterTrace {
    pub initial: Vec<usize>,
    /// Per iteration, the record index now serving as each cluster's center.
    pub centers: Vec<Vec<usize>>,
    /// Cluster index of each record under the final centers.
    pub final_assignment: Vec<usize>,
    /// Per cluster, whether the noisy mean was released (otherwise the last center).
    pub released_mean: Vec<bool>,
}

/// K distinct records chosen uniformly at random. This is the first draw
/// [`convergent_dp_cluster`] makes from its rng.
pub fn initial_centers<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    Ok(rand::seq::index::sample(rng, n, k).into_vec())
}

/// Nearest-center assignment under L2; ties go to the lower center index.
pub fn assign(rows: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    rows.par_iter()
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = squared_l2(x, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

pub fn convergent_dp_cluster<R: Rng + ?Sized>(
    ds: &Dataset,
    params: &ClusterParams,
    rng: &mut R,
    acc: &mut BudgetAccountant,
) -> Result<PublishedPoints> {
    convergent_dp_cluster_traced(ds, params, rng, acc).map(|(p, _)| p)
}

/// Convergent DP clustering.
///
/// Each of the T iterations assigns records to their nearest center, then per
/// cluster: builds the convergent zone (at the first iteration the cluster's
/// members; afterwards the members inside the ball whose diameter joins the
/// current center and the members' centroid), splits the zone into
/// `internal_k` subzones with plain k-means, picks a subzone with probability
/// proportional to its size, and selects the next center from it with the
/// exponential mechanism (utility = -distance to the centroid, sensitivity 1,
/// budget `exp_fraction * epsilon_k / T`). The pooled Laplace share then pays
/// for a noisy count and noisy coordinate sums per cluster.
pub fn convergent_dp_cluster_traced<R: Rng + ?Sized>(
    ds: &Dataset,
    params: &ClusterParams,
    rng: &mut R,
    acc: &mut BudgetAccountant,
) -> Result<(PublishedPoints, ClusterTrace)> {
    params.validate()?;
    let budget = PrivacyBudget::pure(params.epsilon_k)?;
    acc.check("publish", budget)?;
    let n = ds.len();
    let k = params.k;
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let rows = &ds.rows;
    let width = ds.width();
    let eps_exp = params.exp_fraction * params.epsilon_per_iteration();

    let mut trace = ClusterTrace::default();
    let mut center_idx = initial_centers(n, k, rng)?;
    trace.initial = center_idx.clone();

    for t in 0..params.iterations {
        let centers: Vec<Vec<f64>> = center_idx.iter().map(|&i| rows[i].clone()).collect();
        let assignment = assign(rows, &centers);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        for (c, cluster) in members.iter().enumerate() {
            if cluster.is_empty() {
                continue;
            }
            let centroid = mean(cluster.iter().map(|&i| rows[i].as_slice()), width)
                .expect("non-empty cluster");
            let zone = if t == 0 {
                cluster.clone()
            } else {
                let center = &centers[c];
                let mid = midpoint(center, &centroid);
                let radius = 0.5 * l2(center, &centroid) + ZONE_SLACK;
                let inside: Vec<usize> = cluster
                    .iter()
                    .copied()
                    .filter(|&i| l2(&rows[i], &mid) <= radius)
                    .collect();
                if inside.is_empty() {
                    cluster.clone()
                } else {
                    inside
                }
            };
            let subzone = sample_subzone(rows, &zone, params.internal_k, rng);
            let utilities: Vec<f64> = subzone.iter().map(|&i| -l2(&rows[i], &centroid)).collect();
            let pick = exponential_mechanism(&utilities, 1.0, eps_exp, rng)?;
            center_idx[c] = subzone[pick];
        }
        trace.centers.push(center_idx.clone());
    }

    let sampled: Vec<Vec<f64>> = center_idx.iter().map(|&i| rows[i].clone()).collect();
    let assignment = assign(rows, &sampled);
    let (points, released) = release_centers(ds, &assignment, &sampled, params, rng);
    trace.final_assignment = assignment;
    trace.released_mean = released;

    acc.spend("publish", budget)?;
    Ok((
        PublishedPoints {
            points,
            method: PublishMethod::DpCluster,
            budget_spent: budget,
            k: Some(k),
        },
        trace,
    ))
}

/// Splits the zone with k-means and returns the members of one subzone,
/// chosen with probability proportional to its size.
fn sample_subzone<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    zone: &[usize],
    internal_k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let k = internal_k.min(zone.len());
    if k <= 1 {
        return zone.to_vec();
    }
    let points: Vec<Vec<f64>> = zone.iter().map(|&i| rows[i].clone()).collect();
    let labels = kmeans(&points, k, SUBZONE_ITERS, rng);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &l) in labels.iter().enumerate() {
        groups[l].push(zone[pos]);
    }
    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let chosen = sample_categorical(&sizes, rng);
    std::mem::take(&mut groups[chosen])
}

/// Plain Lloyd's k-means from random distinct initial points; returns labels.
pub(crate) fn kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    rng: &mut R,
) -> Vec<usize> {
    let width = points[0].len();
    let init = rand::seq::index::sample(rng, points.len(), k).into_vec();
    let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut labels = assign(points, &centers);
    for _ in 0..max_iters {
        for (c, center) in centers.iter_mut().enumerate() {
            let members = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p.as_slice());
            if let Some(m) = mean(members, width) {
                *center = m;
            }
        }
        let next = assign(points, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn release_centers<R: Rng + ?Sized>(
    ds: &Dataset,
    assignment: &[usize],
    sampled: &[Vec<f64>],
    params: &ClusterParams,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let k = sampled.len();
    let width = ds.width();
    let eps_release = params.laplace_fraction * params.epsilon_k;
    if eps_release <= 0.0 {
        return (sampled.to_vec(), vec![false; k]);
    }
    let mut counts = vec![0.0; k];
    let mut sums = vec![vec![0.0; width]; k];
    for (row, &c) in ds.rows.iter().zip(assignment) {
        counts[c] += 1.0;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v.clamp(0.0, 1.0);
        }
    }
    // Half for counts (sensitivity 1), half for the sum vector whose L1
    // sensitivity is the record L1 bound.
    let count_scale = 2.0 / eps_release;
    let sum_scale = 2.0 * ds.schema.max_record_l1() / eps_release;

    let mut points = Vec::with_capacity(k);
    let mut released = Vec::with_capacity(k);
    for c in 0..k {
        let noisy_count = counts[c] + sample_laplace(count_scale, rng);
        let noisy_sum: Vec<f64> = sums[c]
            .iter()
            .map(|s| s + sample_laplace(sum_scale, rng))
            .collect();
        let informative =
            noisy_count >= 1.0 && sum_scale / noisy_count <= params.max_release_error;
        if informative {
            let denom = noisy_count.max(1.0);
            points.push(noisy_sum.iter().map(|s| (s / denom).clamp(0.0, 1.0)).collect());
        } else {
            points.push(sampled[c].iter().map(|v| v.clamp(0.0, 1.0)).collect());
        }
        released.push(informative);
    }
    (points, released)
}

/// Baseline publisher: Laplace noise on each continuous coordinate of each
/// record with per-feature budget `epsilon_k / n_c` and sensitivity 1, then
/// clipping to [0,1]. Categorical features are not supported.
pub fn record_perturbation<R: Rng + ?Sized>(
    ds: &Dataset,
    epsilon_k: f64,
    rng: &mut R,
    acc: &mut BudgetAccountant,
) -> Result<PublishedPoints> {
    let budget = PrivacyBudget::pure(epsilon_k)?;
    if epsilon_k.is_nan() || epsilon_k <= 0.0 {
        return Err(Error::InvalidBudget("epsilon_k must be positive".into()));
    }
    acc.check("publish", budget)?;
    if ds
        .schema
        .features
        .iter()
        .any(|f| f.kind == FeatureKind::Categorical)
    {
        return Err(Error::InvalidParameter(
            "record perturbation only supports continuous features".into(),
        ));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData("no records to publish".into()));
    }
    let scale = record_noise_scale(ds.schema.continuous_count(), epsilon_k);
    let points = ds
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| (v + sample_laplace(scale, rng)).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    acc.spend("publish", budget)?;
    Ok(PublishedPoints {
        points,
        method: PublishMethod::RecordPerturbation,
        budget_spent: budget,
        k: None,
    })
}

/// Laplace scale `1 / (epsilon_k / n_c)` used by [`record_perturbation`].
pub fn record_noise_scale(continuous_features: usize, epsilon_k: f64) -> f64 {
    continuous_features as f64 / epsilon_k
}

/// Publishes the records unchanged. Not private; used as the reference method.
pub fn publish_records(ds: &Dataset) -> PublishedPoints {
    PublishedPoints {
        points: ds.rows.clone(),
        method: PublishMethod::None,
        budget_spent: PrivacyBudget::zero(),
        k: None,
    }
}
