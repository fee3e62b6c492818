//! Datasets with missing cells: CSV ingestion, synthetic generation with a
//! known relevant set, uniform masking, stratified folds and column streaming.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Label = u32;

/// Instance-by-feature matrix with optional cells and integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<Option<f64>>>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<Label>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let t = feature_names.len();
        if let Some(i) = rows.iter().position(|r| r.len() != t) {
            return Err(Error::validation(format!(
                "row {i} has {} cells, expected {t}",
                rows[i].len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::validation(format!("duplicate feature name {name:?}")));
            }
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature values must be finite"));
        }
        Ok(Dataset {
            rows,
            labels,
            feature_names,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Instance count per class, ordered by label.
    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Fails unless at least two distinct labels are present.
    pub fn require_two_classes(&self) -> Result<()> {
        let n = self.class_counts().len();
        if n < 2 {
            return Err(Error::validation(format!(
                "need at least 2 label classes, found {n}"
            )));
        }
        Ok(())
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Parses the CSV interchange format: header row, feature columns, final
    /// `label` column. Empty cells and `NaN` (any case) are missing.
    pub fn load_csv<R: Read>(source: R) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.is_empty() || header.get(header.len() - 1).map(str::trim) != Some("label") {
            return Err(Error::Parse {
                row: None,
                message: "last header column must be \"label\"".into(),
            });
        }
        let t = header.len() - 1;
        let names: Vec<String> = header.iter().take(t).map(|s| s.trim().to_string()).collect();

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row_no = i + 1;
            if record.len() != t + 1 {
                return Err(Error::Parse {
                    row: Some(row_no),
                    message: format!("expected {} fields, found {}", t + 1, record.len()),
                });
            }
            let mut row = Vec::with_capacity(t);
            for (j, cell) in record.iter().take(t).enumerate() {
                row.push(parse_cell(cell).map_err(|message| Error::Parse {
                    row: Some(row_no),
                    message: format!("column {:?}: {message}", names[j]),
                })?);
            }
            let label = record[t].trim();
            let label: Label = label.parse().map_err(|_| Error::Parse {
                row: Some(row_no),
                message: format!("label {label:?} is not a non-negative integer"),
            })?;
            rows.push(row);
            labels.push(label);
        }
        let d = Dataset::new(rows, labels, names)?;
        d.require_two_classes()?;
        Ok(d)
    }

    /// Writes the CSV interchange format; missing cells are written empty.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().from_writer(sink);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features() + 1);
        for (row, label) in self.rows.iter().zip(&self.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            record.push(label.to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Columns in arrival order `0..T`, each with its missing markers.
    pub fn stream_columns(&self) -> impl Iterator<Item = (usize, Vec<Option<f64>>)> + '_ {
        (0..self.n_features()).map(move |j| (j, self.column(j)))
    }
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{cell:?} is not a number or missing marker")),
    }
}

/// Columns that drove label generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant_indices: Vec<usize>,
    pub generator_seed: u64,
}

/// Labels are `1[sum of relevant columns + noise * eps > 0]` over i.i.d.
/// standard normal features.
pub fn generate_synthetic(
    n_instances: usize,
    n_features: usize,
    n_relevant: usize,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    if n_relevant == 0 {
        return Err(Error::validation("n_relevant must be at least 1"));
    }
    if n_relevant > n_features {
        return Err(Error::validation(format!(
            "n_relevant ({n_relevant}) exceeds feature count ({n_features})"
        )));
    }
    if n_instances < 20 {
        return Err(Error::validation("synthetic datasets need at least 20 instances"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::validation("noise must be finite and non-negative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n_instances)
        .map(|_| {
            (0..n_features)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let mut relevant = index::sample(&mut rng, n_features, n_relevant).into_vec();
    relevant.sort_unstable();
    let labels: Vec<Label> = rows
        .iter()
        .map(|row| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let score: f64 = relevant.iter().map(|&j| row[j]).sum::<f64>() + noise * eps;
            Label::from(score > 0.0)
        })
        .collect();

    let names = (0..n_features).map(|j| format!("f{j}")).collect();
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().map(Some).collect())
        .collect();
    let dataset = Dataset::new(rows, labels, names)?;
    dataset.require_two_classes()?;
    Ok((
        dataset,
        GroundTruth {
            relevant_indices: relevant,
            generator_seed: seed,
        },
    ))
}

/// Missing-data rate and seed for [`sparsify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    rate: f64,
    seed: u64,
}

impl MaskSpec {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::validation(format!(
                "missing rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(MaskSpec { rate, seed })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Masks `round(rate * M * T)` currently observed cells, chosen uniformly
/// without replacement over the whole matrix. Labels are untouched.
pub fn sparsify(d: &Dataset, spec: MaskSpec) -> Dataset {
    let t = d.n_features();
    let target = (spec.rate * (d.n_instances() * t) as f64).round() as usize;
    let observed: Vec<usize> = d
        .rows
        .iter()
        .flatten()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    let mut out = d.clone();
    if target == 0 || t == 0 {
        return out;
    }
    let amount = target.min(observed.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for k in index::sample(&mut rng, observed.len(), amount) {
        let cell = observed[k];
        out.rows[cell / t][cell % t] = None;
    }
    out
}

/// Stratified assignment of instances to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Each class is shuffled and dealt round-robin, continuing the rotation
/// across classes, so fold sizes and per-class counts differ by at most one.
pub fn split_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    use rand::seq::SliceRandom;

    if k < 2 {
        return Err(Error::validation("fold count must be at least 2"));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in d.labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((label, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::validation(format!(
            "class {label} has {} members, fewer than {k} folds",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; d.n_instances()];
    let mut slot = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = slot % k;
            slot += 1;
        }
    }
    Ok(FoldPlan { k, assignment })
}
