//! Evaluation harness: KNN accuracy under stratified k-fold cross-validation
//! (sparse training split, complete test split) and the Wilcoxon
//! signed-ranks comparison of two algorithms across datasets.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{self, Dataset, Label, MaskSpec};
use crate::error::{Error, Result};
use crate::nrs::min_max_scale;
use crate::selector::{self, SelectorConfig};

/// Critical value of z at significance 0.1 (one-sided).
pub const WILCOXON_Z_CRITICAL: f64 = -1.64;

/// Majority vote among the `k` Euclidean-nearest rows. Distance ties go to
/// the lower row index, vote ties to the smaller class id.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[Label], query: &[f64], k: usize) -> Result<Label> {
    if query.is_empty() {
        return Err(Error::validation("KNN needs at least one feature"));
    }
    if train_x.len() != train_y.len() {
        return Err(Error::validation("training rows and labels differ in length"));
    }
    if k == 0 || k > train_x.len() {
        return Err(Error::validation(format!(
            "k = {k} must lie in [1, {}]",
            train_x.len()
        )));
    }
    if train_x.iter().any(|r| r.len() != query.len()) {
        return Err(Error::validation("query and training rows differ in width"));
    }
    let mut order: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let d2: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes: BTreeMap<Label, usize> = BTreeMap::new();
    for &(_, i) in order.iter().take(k) {
        *votes.entry(train_y[i]).or_insert(0) += 1;
    }
    let mut best = (0, 0);
    for (&label, &count) in &votes {
        if count > best.1 {
            best = (label, count);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    /// missing rate applied to each training split
    pub theta: f64,
    pub folds: usize,
    pub knn_k: usize,
    pub seed: u64,
    /// worker threads for independent folds; 1 runs sequentially
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            theta: 0.1,
            folds: 5,
            knn_k: 3,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub selected: Vec<usize>,
    /// nothing was selected and the majority training class was predicted
    pub majority_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub theta: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// sample standard deviation of the fold accuracies
    pub std: f64,
    pub selected_counts: Vec<usize>,
    pub folds: Vec<FoldResult>,
    pub eval: EvalConfig,
    pub selector: SelectorConfig,
}

fn majority_class(labels: &[Label]) -> Label {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let mut best = (0, 0);
    for (&l, &c) in &counts {
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

fn scale_with(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

fn evaluate_fold(d: &Dataset, plan: &data::FoldPlan, fold: usize, cfg: &SelectorConfig, eval: &EvalConfig) -> Result<FoldResult> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let train = d.subset_rows(&train_idx);
    let mask = MaskSpec::new(eval.theta, eval.seed.wrapping_add(fold as u64))?;
    let masked = data::sparsify(&train, mask);
    let outcome = selector::run(masked.stream_columns(), masked.labels(), cfg)?;
    let test_labels: Vec<Label> = test_idx.iter().map(|&i| d.labels()[i]).collect();

    if outcome.selected.is_empty() {
        let guess = majority_class(train.labels());
        let correct = test_labels.iter().filter(|&&l| l == guess).count();
        return Ok(FoldResult {
            fold,
            accuracy: correct as f64 / test_labels.len() as f64,
            selected: Vec::new(),
            majority_fallback: true,
        });
    }
    if eval.knn_k > train_idx.len() {
        return Err(Error::validation(format!(
            "knn k = {} exceeds training split size {}",
            eval.knn_k,
            train_idx.len()
        )));
    }

    let n_sel = outcome.selected.len();
    let mut train_x = vec![Vec::with_capacity(n_sel); train_idx.len()];
    let mut test_x = vec![Vec::with_capacity(n_sel); test_idx.len()];
    for feat in &outcome.selected {
        let values = &feat.values;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fill = values.iter().sum::<f64>() / values.len() as f64;
        for (row, v) in train_x.iter_mut().zip(min_max_scale(values)) {
            row.push(if hi > lo { v } else { 0.0 });
        }
        for (row, &i) in test_x.iter_mut().zip(&test_idx) {
            let raw = d.get(i, feat.column_index).unwrap_or(fill);
            row.push(scale_with(raw, lo, hi));
        }
    }
    let mut correct = 0;
    for (q, &truth) in test_x.iter().zip(&test_labels) {
        if knn_predict(&train_x, train.labels(), q, eval.knn_k)? == truth {
            correct += 1;
        }
    }
    Ok(FoldResult {
        fold,
        accuracy: correct as f64 / test_labels.len() as f64,
        selected: outcome.selected_indices(),
        majority_fallback: false,
    })
}

fn run_jobs<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs <= 1 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

/// Stratified k-fold cross-validation: each training split is masked at rate
/// θ (seed + fold index), run through the selector, and the test split is
/// classified by KNN on the selected columns. Scaling uses training
/// statistics only; missing test cells take the training column mean.
pub fn cross_validate(d: &Dataset, cfg: &SelectorConfig, eval: &EvalConfig) -> Result<EvalReport> {
    if !(0.0..=0.9).contains(&eval.theta) {
        return Err(Error::validation(format!(
            "missing rate must lie in [0, 0.9], got {}",
            eval.theta
        )));
    }
    if eval.knn_k == 0 {
        return Err(Error::validation("knn k must be at least 1"));
    }
    d.require_two_classes()?;
    cfg.validate()?;
    let plan = data::split_folds(d, eval.folds, eval.seed)?;

    let folds = run_jobs(eval.jobs, || {
        if eval.jobs > 1 {
            (0..plan.k())
                .into_par_iter()
                .map(|f| evaluate_fold(d, &plan, f, cfg, eval))
                .collect::<Result<Vec<_>>>()
        } else {
            (0..plan.k())
                .map(|f| evaluate_fold(d, &plan, f, cfg, eval))
                .collect::<Result<Vec<_>>>()
        }
    })??;

    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let k = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / k;
    let std = if accs.len() > 1 {
        (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        theta: eval.theta,
        fold_accuracies: accs,
        mean,
        std,
        selected_counts: folds.iter().map(|f| f.selected.len()).collect(),
        folds,
        eval: eval.clone(),
        selector: cfg.clone(),
    })
}

/// One cross-validation per missing rate, in the order given.
pub fn sweep(d: &Dataset, cfg: &SelectorConfig, thetas: &[f64], eval: &EvalConfig) -> Result<Vec<EvalReport>> {
    let point = |&theta: &f64| {
        let e = EvalConfig {
            theta,
            jobs: 1,
            ..eval.clone()
        };
        cross_validate(d, cfg, &e)
    };
    run_jobs(eval.jobs, || {
        if eval.jobs > 1 {
            thetas.par_iter().map(point).collect::<Result<Vec<_>>>()
        } else {
            thetas.iter().map(point).collect::<Result<Vec<_>>>()
        }
    })?
}

/// Plot-ready rows `theta,fold,accuracy,n_selected`.
pub fn sweep_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("theta,fold,accuracy,n_selected\n");
    for r in reports {
        for f in &r.folds {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.theta,
                f.fold,
                f.accuracy,
                f.selected.len()
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    pub r_plus: f64,
    pub r_minus: f64,
    pub r_min: f64,
    pub z: f64,
    pub n_effective: usize,
    pub reject: bool,
    /// every difference was zero; nothing to rank
    pub degenerate: bool,
}

/// Normal approximation `(R_m − n(n+1)/4) / sqrt(n(n+1)(2n+1)/24)`.
pub fn wilcoxon_z(r_min: f64, n: usize) -> f64 {
    let n = n as f64;
    (r_min - n * (n + 1.0) / 4.0) / (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0).sqrt()
}

/// Paired signed-ranks test of `a` against `b`. Zero differences are dropped;
/// tied magnitudes share their average rank. The null hypothesis is rejected
/// when `z < −1.64`.
pub fn wilcoxon_signed_ranks(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("need at least one pair"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("paired samples must be finite"));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            r_plus: 0.0,
            r_minus: 0.0,
            r_min: 0.0,
            z: 0.0,
            n_effective: 0,
            reject: false,
            degenerate: true,
        });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let (mut r_plus, mut r_minus) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let rank = (i + j + 2) as f64 / 2.0;
        for d in &diffs[i..=j] {
            if *d > 0.0 {
                r_plus += rank;
            } else {
                r_minus += rank;
            }
        }
        i = j + 1;
    }
    let r_min = r_plus.min(r_minus);
    let z = wilcoxon_z(r_min, n);
    Ok(WilcoxonResult {
        r_plus,
        r_minus,
        r_min,
        z,
        n_effective: n,
        reject: z < WILCOXON_Z_CRITICAL,
        degenerate: false,
    })
}
