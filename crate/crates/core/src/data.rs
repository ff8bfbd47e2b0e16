//! Tabular data: schema, CSV ingestion, bounded preprocessing and sampling.
//!
//! Continuous features are min-max scaled with bounds taken from the schema,
//! never from the data, so a record's encoding depends only on the record
//! itself. Categorical features are one-hot encoded. Labels are binary: the
//! schema names the favorable label value and everything else is unfavorable.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance used when checking that a one-hot block sums to one.
const ONE_HOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// Actionability constraint on a single feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    None,
    NonDecreasing,
    NonIncreasing,
    Immutable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Rendered as an integer by [`inverse_transform`]; computation stays real-valued.
    #[serde(default)]
    pub integral: bool,
    #[serde(default)]
    pub constraint: Constraint,
}

impl FeatureSpec {
    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            min: Some(min),
            max: Some(max),
            categories: Vec::new(),
            integral: false,
            constraint: Constraint::None,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            min: None,
            max: None,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            integral: false,
            constraint: Constraint::None,
        }
    }

    pub fn integral(mut self) -> Self {
        self.integral = true;
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = constraint;
        self
    }

    /// Number of columns this feature occupies in preprocessed space.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Continuous => 1,
            FeatureKind::Categorical => self.categories.len(),
        }
    }

    fn bounds(&self) -> Result<(f64, f64)> {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) if lo < hi && lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
            (Some(_), Some(_)) => Err(Error::DegenerateBounds(self.name.clone())),
            _ => Err(Error::SchemaMismatch(format!(
                "continuous feature `{}` needs min and max bounds",
                self.name
            ))),
        }
    }

    /// Parses one raw cell for this feature. `row` is only used for error reporting.
    pub fn parse_value(&self, cell: &str, row: usize) -> Result<RawValue> {
        let cell = cell.trim();
        match self.kind {
            FeatureKind::Continuous => cell.parse::<f64>().map(RawValue::Number).map_err(|e| {
                Error::Parse {
                    row,
                    column: self.name.clone(),
                    message: format!("`{cell}`: {e}"),
                }
            }),
            FeatureKind::Categorical => self
                .categories
                .iter()
                .position(|c| c == cell)
                .map(RawValue::Category)
                .ok_or_else(|| Error::UnknownCategory {
                    feature: self.name.clone(),
                    value: cell.to_string(),
                    row,
                }),
        }
    }

    /// Human-readable form of a raw value; reals are shown to six decimals
    /// with trailing zeros dropped.
    pub fn render(&self, value: &RawValue) -> String {
        match (value, self.kind) {
            (RawValue::Category(i), FeatureKind::Categorical) => self
                .categories
                .get(*i)
                .cloned()
                .unwrap_or_else(|| format!("#{i}")),
            (RawValue::Number(v), _) if self.integral => format!("{}", v.round() as i64),
            (RawValue::Number(v), _) => {
                let s = format!("{v:.6}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            }
            (RawValue::Category(i), _) => format!("#{i}"),
        }
    }
}

/// Ordered feature list plus the label column and its favorable value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub label: String,
    pub favorable: String,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>, label: &str, favorable: &str) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            label: label.to_string(),
            favorable: favorable.to_string(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::SchemaMismatch("schema declares no features".into()));
        }
        let mut seen = HashMap::new();
        for f in &self.features {
            if seen.insert(f.name.as_str(), ()).is_some() {
                return Err(Error::SchemaMismatch(format!(
                    "feature `{}` declared twice",
                    f.name
                )));
            }
            match f.kind {
                FeatureKind::Continuous => {
                    f.bounds()?;
                }
                FeatureKind::Categorical => {
                    if f.categories.len() < 2 {
                        return Err(Error::SchemaMismatch(format!(
                            "categorical feature `{}` needs at least two categories",
                            f.name
                        )));
                    }
                    if matches!(
                        f.constraint,
                        Constraint::NonDecreasing | Constraint::NonIncreasing
                    ) {
                        return Err(Error::SchemaMismatch(format!(
                            "monotone constraint on categorical feature `{}`",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Width of the preprocessed (scaled + one-hot) representation.
    pub fn width(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    /// Column range of every feature in preprocessed space.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.features
            .iter()
            .map(|f| {
                let r = start..start + f.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn continuous_count(&self) -> usize {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::Continuous)
            .count()
    }

    pub fn categorical_count(&self) -> usize {
        self.features.len() - self.continuous_count()
    }

    /// Upper bound on the L1 norm of any preprocessed record.
    pub fn max_record_l1(&self) -> f64 {
        self.features.len() as f64
    }

    /// Upper bound on the Euclidean norm of any preprocessed record.
    pub fn max_record_l2(&self) -> f64 {
        (self.features.len() as f64).sqrt()
    }

    /// Names of the preprocessed columns (`feature=category` for one-hot columns).
    pub fn encoded_columns(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| match f.kind {
                FeatureKind::Continuous => vec![f.name.clone()],
                FeatureKind::Categorical => f
                    .categories
                    .iter()
                    .map(|c| format!("{}={}", f.name, c))
                    .collect(),
            })
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Stable content hash, used to tie artifacts to the schema they were built with.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Binary outcome of the classification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Unfavorable,
    Favorable,
}

impl Outcome {
    pub fn from_label(label: &str, favorable: &str) -> Self {
        if label.trim() == favorable {
            Outcome::Favorable
        } else {
            Outcome::Unfavorable
        }
    }

    pub fn as_index(self) -> usize {
        match self {
            Outcome::Unfavorable => 0,
            Outcome::Favorable => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Number(f64),
    Category(usize),
}

/// Records in raw (unscaled) form, as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<Outcome>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Records in preprocessed space: continuous coordinates in [0,1], one-hot blocks summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Outcome>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<Outcome>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let width = schema.width();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width,
                got: bad.len(),
            });
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for l in &self.labels {
            counts[l.as_index()] += 1;
        }
        counts
    }

    /// Writes the preprocessed rows with encoded column names and a 0/1 label column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.schema.encoded_columns();
        header.push(self.schema.label.clone());
        w.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.as_index().to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a file produced by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut expected = schema.encoded_columns();
        expected.push(schema.label.clone());
        if header != expected {
            return Err(Error::SchemaMismatch(format!(
                "{}: header {:?} does not match schema columns {:?}",
                path.display(),
                header,
                expected
            )));
        }
        let width = schema.width();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut row = Vec::with_capacity(width);
            for (j, cell) in rec.iter().take(width).enumerate() {
                row.push(cell.parse::<f64>().map_err(|e| Error::Parse {
                    row: i,
                    column: header[j].clone(),
                    message: e.to_string(),
                })?);
            }
            let label = match rec.get(width) {
                Some("1") => Outcome::Favorable,
                Some("0") => Outcome::Unfavorable,
                other => {
                    return Err(Error::Parse {
                        row: i,
                        column: schema.label.clone(),
                        message: format!("expected 0 or 1, got {other:?}"),
                    })
                }
            };
            rows.push(row);
            labels.push(label);
        }
        Dataset::new(schema.clone(), rows, labels)
    }
}

/// Loads a raw CSV file whose header covers every schema feature and the label column.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawDataset> {
    schema.validate()?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))
    };
    let columns = schema
        .features
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(&schema.label)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = schema
            .features
            .iter()
            .zip(&columns)
            .map(|(f, &c)| f.parse_value(rec.get(c).unwrap_or(""), i))
            .collect::<Result<Vec<_>>>()?;
        let label = rec.get(label_col).ok_or_else(|| Error::Parse {
            row: i,
            column: schema.label.clone(),
            message: "missing label".into(),
        })?;
        rows.push(row);
        labels.push(Outcome::from_label(label, &schema.favorable));
    }
    Ok(RawDataset {
        schema: schema.clone(),
        rows,
        labels,
    })
}

/// Encodes one raw record: scale-and-clip continuous values, one-hot categoricals.
pub fn preprocess_record(raw: &[RawValue], schema: &FeatureSchema) -> Result<Vec<f64>> {
    if raw.len() != schema.features.len() {
        return Err(Error::Dimension {
            expected: schema.features.len(),
            got: raw.len(),
        });
    }
    let mut out = Vec::with_capacity(schema.width());
    for (f, v) in schema.features.iter().zip(raw) {
        match (f.kind, v) {
            (FeatureKind::Continuous, RawValue::Number(x)) => {
                let (lo, hi) = f.bounds()?;
                out.push(((x - lo) / (hi - lo)).clamp(0.0, 1.0));
            }
            (FeatureKind::Categorical, RawValue::Category(c)) => {
                if *c >= f.categories.len() {
                    return Err(Error::UnknownCategory {
                        feature: f.name.clone(),
                        value: format!("#{c}"),
                        row: 0,
                    });
                }
                out.extend((0..f.categories.len()).map(|j| if j == *c { 1.0 } else { 0.0 }));
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "value kind does not match feature `{}`",
                    f.name
                )))
            }
        }
    }
    Ok(out)
}

pub fn preprocess(raw: &RawDataset) -> Result<Dataset> {
    let rows = raw
        .rows
        .iter()
        .map(|r| preprocess_record(r, &raw.schema))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(raw.schema.clone(), rows, raw.labels.clone())
}

/// Maps a preprocessed record back to raw space. Integral features are rounded.
pub fn inverse_transform(x: &[f64], schema: &FeatureSchema) -> Result<Vec<RawValue>> {
    if x.len() != schema.width() {
        return Err(Error::Dimension {
            expected: schema.width(),
            got: x.len(),
        });
    }
    schema
        .features
        .iter()
        .zip(schema.blocks())
        .map(|(f, block)| match f.kind {
            FeatureKind::Continuous => {
                let (lo, hi) = f.bounds()?;
                let v = lo + x[block.start].clamp(0.0, 1.0) * (hi - lo);
                Ok(RawValue::Number(if f.integral { v.round() } else { v }))
            }
            FeatureKind::Categorical => {
                let values = &x[block];
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > ONE_HOT_TOLERANCE {
                    return Err(Error::InvalidEncoding {
                        feature: f.name.clone(),
                        sum,
                    });
                }
                Ok(RawValue::Category(argmax(values)))
            }
        })
        .collect()
}

/// Like [`inverse_transform`] but decodes every categorical block by argmax,
/// for rendering published points that need not lie on one-hot vertices.
pub fn decode_record(x: &[f64], schema: &FeatureSchema) -> Result<Vec<RawValue>> {
    let mut snapped = x.to_vec();
    for (f, block) in schema.features.iter().zip(schema.blocks()) {
        if f.kind == FeatureKind::Categorical && block.end <= snapped.len() {
            let hot = argmax(&snapped[block.clone()]);
            for (j, v) in snapped[block].iter_mut().enumerate() {
                *v = if j == hot { 1.0 } else { 0.0 };
            }
        }
    }
    inverse_transform(&snapped, schema)
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Result of [`stratified_split_and_sample`].
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub graph_sample: Dataset,
}

/// Per-class shuffled split into train/test, then a uniform sample of
/// `sample_n` training records without replacement. Deterministic under `seed`.
pub fn stratified_split_and_sample(
    ds: &Dataset,
    test_fraction: f64,
    sample_n: usize,
    seed: u64,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (test_idx, train_idx) = stratified_pick(ds, test_fraction, &mut rng);
    let train = ds.subset(&train_idx);
    let test = ds.subset(&test_idx);
    let graph_sample = sample_without_replacement(&train, sample_n, &mut rng)?;
    Ok(Split {
        train,
        test,
        graph_sample,
    })
}

/// Uniform sample of `n` records without replacement, kept in original order.
pub fn sample_without_replacement<R: rand::Rng>(
    ds: &Dataset,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n > ds.len() {
        return Err(Error::InsufficientData(format!(
            "requested {n} records from a set of {}",
            ds.len()
        )));
    }
    let mut idx = rand::seq::index::sample(rng, ds.len(), n).into_vec();
    idx.sort_unstable();
    Ok(ds.subset(&idx))
}

/// Keeps `fraction` of each class (rounded), e.g. the 25%-per-class HELOC recipe.
pub fn stratified_subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction must be in (0,1], got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = stratified_pick(ds, fraction, &mut rng);
    Ok(ds.subset(&picked))
}

/// Returns (picked, rest) index lists, each sorted.
fn stratified_pick(ds: &Dataset, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut picked = Vec::new();
    let mut rest = Vec::new();
    for class in [Outcome::Unfavorable, Outcome::Favorable] {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        idx.shuffle(rng);
        let n = (idx.len() as f64 * fraction).round() as usize;
        picked.extend_from_slice(&idx[..n]);
        rest.extend_from_slice(&idx[n..]);
    }
    picked.sort_unstable();
    rest.sort_unstable();
    (picked, rest)
}
