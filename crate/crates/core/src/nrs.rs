//! Neighborhood rough sets: δ-neighborhoods under Euclidean distance, lower
//! and upper approximations, and the dependency degree γ (size of the positive
//! region over the instance count).

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type IndexSet = BTreeSet<usize>;

/// Instances restricted to a feature subset, with a neighborhood radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSpace {
    rows: Vec<Vec<f64>>,
    radius: f64,
}

impl NeighborhoodSpace {
    /// Distances are taken on `rows` as given.
    pub fn new(rows: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::validation(format!(
                "neighborhood radius must be finite and >= 0, got {radius}"
            )));
        }
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::validation("ragged neighborhood data"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("neighborhood data must be finite"));
        }
        Ok(NeighborhoodSpace { rows, radius })
    }

    /// Builds a space from feature columns, min-max scaling each to `[0, 1]`
    /// first. Constant columns scale to 0.
    pub fn from_columns_scaled(columns: &[&[f64]], radius: f64) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::validation("columns must have equal length"));
        }
        let scaled: Vec<Vec<f64>> = columns.iter().map(|c| min_max_scale(c)).collect();
        let rows = (0..n).map(|i| scaled.iter().map(|c| c[i]).collect()).collect();
        NeighborhoodSpace::new(rows, radius)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .zip(&self.rows[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn within(&self, i: usize, j: usize) -> bool {
        self.distance(i, j) <= self.radius
    }

    /// All instances (including `i`) within the radius of instance `i`.
    pub fn neighborhood(&self, i: usize) -> IndexSet {
        (0..self.len()).filter(|&j| self.within(i, j)).collect()
    }

    pub fn lower_approximation(&self, target: &IndexSet) -> IndexSet {
        (0..self.len())
            .filter(|&i| (0..self.len()).all(|j| !self.within(i, j) || target.contains(&j)))
            .collect()
    }

    pub fn upper_approximation(&self, target: &IndexSet) -> IndexSet {
        (0..self.len())
            .filter(|&i| target.iter().any(|&j| self.within(i, j)))
            .collect()
    }

    /// γ = |POS| / n where POS is the union of the lower approximations of the
    /// decision classes. An instance is in POS exactly when every neighbor
    /// shares its class.
    pub fn dependency_degree<L: PartialEq>(&self, labels: &[L]) -> Result<DependencyDegree> {
        if labels.len() != self.len() {
            return Err(Error::validation(format!(
                "{} labels for {} instances",
                labels.len(),
                self.len()
            )));
        }
        let n = self.len();
        if n == 0 || labels.iter().all(|l| *l == labels[0]) {
            return Ok(DependencyDegree {
                gamma: 1.0,
                degenerate: true,
            });
        }
        let positive = (0..n)
            .filter(|&i| (0..n).all(|j| labels[j] == labels[i] || !self.within(i, j)))
            .count();
        Ok(DependencyDegree {
            gamma: positive as f64 / n as f64,
            degenerate: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependencyDegree {
    pub gamma: f64,
    /// Only one class present; γ is 1 by convention.
    pub degenerate: bool,
}

pub(crate) fn min_max_scale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / span).collect()
}
