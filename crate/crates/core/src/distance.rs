//! Distances over records in preprocessed space.

use serde::{Deserialize, Serialize};

/// Coordinates differing by no more than this count as unchanged.
pub const CHANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Norm {
    L0,
    L1,
    L2,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::L0 => l0(a, b),
            Norm::L1 => l1(a, b),
            Norm::L2 => l2(a, b),
        }
    }
}

#[inline]
pub fn squared_l2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    squared_l2(a, b).sqrt()
}

#[inline]
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Number of coordinates that differ by more than [`CHANGE_TOLERANCE`].
#[inline]
pub fn l0(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .filter(|(x, y)| (*x - *y).abs() > CHANGE_TOLERANCE)
        .count() as f64
}

pub fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Coordinate-wise mean of a non-empty set of rows.
pub fn mean<'a, I>(rows: I, width: usize) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![0.0; width];
    let mut n = 0usize;
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Some(acc)
}

/// Index of the row closest to `x` under squared L2; ties go to the lowest index.
pub fn nearest_index(rows: &[Vec<f64>], x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        let d = squared_l2(r, x);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}
