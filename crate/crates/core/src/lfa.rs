//! Latent factor completion of buffered feature blocks.
//!
//! A block `B` (M rows, up to `B_S` columns) is factorized as `B ≈ P Qᵀ` by
//! SGD over its observed entries only, minimizing per entry
//! `½(f − p·q)² + (λ/2)(‖p‖² + ‖q‖²)`. The completed block is the full
//! reconstruction `P Qᵀ`, observed cells included.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOSS_GUARD: f64 = 1e-12;

/// Buffer of streamed columns sharing one instance set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    start_index: usize,
    n_rows: usize,
    capacity: usize,
    columns: Vec<Vec<Option<f64>>>,
}

impl FeatureBlock {
    pub fn new(start_index: usize, n_rows: usize, capacity: usize) -> Self {
        FeatureBlock {
            start_index,
            n_rows,
            capacity,
            columns: Vec::with_capacity(capacity),
        }
    }

    /// Builds a block directly from columns; capacity equals the column count.
    pub fn from_columns(start_index: usize, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut block = FeatureBlock::new(start_index, n_rows, columns.len().max(1));
        for c in columns {
            block.push_column(c)?;
        }
        Ok(block)
    }

    pub fn push_column(&mut self, column: Vec<Option<f64>>) -> Result<()> {
        if self.is_full() {
            return Err(Error::validation("feature block is already full"));
        }
        if column.len() != self.n_rows {
            return Err(Error::validation(format!(
                "column has {} values, block has {} rows",
                column.len(),
                self.n_rows
            )));
        }
        if column.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("column values must be finite"));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn is_full(&self) -> bool {
        self.columns.len() >= self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.columns[col][row]
    }

    /// Ω entry: whether cell `(row, col)` is observed.
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.columns[col][row].is_some()
    }

    pub fn observed_count(&self) -> usize {
        self.columns.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// Fraction of unobserved cells among the filled columns.
    pub fn missing_rate(&self) -> f64 {
        let total = self.n_rows * self.width();
        if total == 0 {
            return 0.0;
        }
        (total - self.observed_count()) as f64 / total as f64
    }

    fn observed_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |m| {
            (0..self.width()).filter_map(move |j| self.columns[j][m].map(|f| (m, j, f)))
        })
    }
}

/// Row factors `P` (M×d) and column factors `Q` (width×d), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactorPair {
    dim: usize,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl LatentFactorPair {
    pub fn new(dim: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if dim == 0 || !p.len().is_multiple_of(dim) || !q.len().is_multiple_of(dim) {
            return Err(Error::validation("factor matrices must have d >= 1 columns"));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::validation("factor entries must be finite"));
        }
        Ok(LatentFactorPair { dim, p, q })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.p.len() / self.dim
    }

    pub fn n_cols(&self) -> usize {
        self.q.len() / self.dim
    }

    pub fn p_row(&self, m: usize) -> &[f64] {
        &self.p[m * self.dim..(m + 1) * self.dim]
    }

    pub fn q_row(&self, j: usize) -> &[f64] {
        &self.q[j * self.dim..(j + 1) * self.dim]
    }

    fn predict(&self, m: usize, j: usize) -> f64 {
        dot(self.p_row(m), self.q_row(j))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfaConfig {
    /// latent dimension d
    pub dim: usize,
    pub lambda: f64,
    /// learning rate η
    pub eta: f64,
    pub max_epochs: usize,
    /// stop once the relative change in epoch loss falls below this
    pub tol: f64,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl Default for LfaConfig {
    fn default() -> Self {
        LfaConfig {
            dim: 5,
            lambda: 0.01,
            eta: 1e-5,
            max_epochs: 1000,
            tol: 1e-5,
            init_seed: 0,
            init_scale: 0.1,
        }
    }
}

impl LfaConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.eta, self.tol, self.init_scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("LFA parameters must be finite"));
        }
        if self.dim == 0 {
            return Err(Error::validation("latent dimension must be at least 1"));
        }
        if self.lambda < 0.0 {
            return Err(Error::validation("lambda must be non-negative"));
        }
        if self.eta <= 0.0 {
            return Err(Error::validation("eta must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("lmax must be at least 1"));
        }
        if self.tol <= 0.0 || self.init_scale <= 0.0 {
            return Err(Error::validation("tol and init_scale must be positive"));
        }
        Ok(())
    }
}

/// Per-entry objective `½(f − p·q)² + (λ/2)(‖p‖² + ‖q‖²)`.
pub fn entry_loss(f: f64, p_row: &[f64], q_row: &[f64], lambda: f64) -> f64 {
    let err = f - dot(p_row, q_row);
    let reg = dot(p_row, p_row) + dot(q_row, q_row);
    0.5 * err * err + 0.5 * lambda * reg
}

fn block_loss(block: &FeatureBlock, factors: &LatentFactorPair, lambda: f64) -> f64 {
    block
        .observed_entries()
        .map(|(m, j, f)| entry_loss(f, factors.p_row(m), factors.q_row(j), lambda))
        .sum()
}

fn check_dims(block: &FeatureBlock, factors: &LatentFactorPair) -> Result<()> {
    if factors.n_rows() != block.n_rows() || factors.n_cols() != block.width() {
        return Err(Error::validation(format!(
            "factors are {}x{} but block is {}x{}",
            factors.n_rows(),
            factors.n_cols(),
            block.n_rows(),
            block.width()
        )));
    }
    Ok(())
}

/// One pass over the observed entries in row-major order. Each visit updates
/// `p_m` and `q_j` simultaneously from their pre-update values. Returns the
/// summed entry loss after the pass.
pub fn sgd_epoch(
    block: &FeatureBlock,
    factors: &mut LatentFactorPair,
    cfg: &LfaConfig,
) -> Result<f64> {
    check_dims(block, factors)?;
    if block.observed_count() == 0 {
        return Err(Error::validation("block has no observed entries"));
    }
    let d = factors.dim;
    let (eta, lambda) = (cfg.eta, cfg.lambda);
    let mut p_old = vec![0.0; d];
    for (m, j, f) in block.observed_entries() {
        let err = f - factors.predict(m, j);
        p_old.copy_from_slice(factors.p_row(m));
        let q = &mut factors.q[j * d..(j + 1) * d];
        let p = &mut factors.p[m * d..(m + 1) * d];
        for v in 0..d {
            let (pv, qv) = (p_old[v], q[v]);
            p[v] = pv + eta * (err * qv - lambda * pv);
            q[v] = qv + eta * (err * pv - lambda * qv);
        }
    }
    let loss = block_loss(block, factors, lambda);
    if !loss.is_finite() {
        return Err(Error::Divergence { eta, epoch: 0 });
    }
    Ok(loss)
}

/// Result of [`train`]: the factors plus the per-epoch loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct LfaFit {
    pub factors: LatentFactorPair,
    pub epoch_losses: Vec<f64>,
    pub converged: bool,
}

impl LfaFit {
    pub fn epochs(&self) -> usize {
        self.epoch_losses.len()
    }
}

/// Seeded uniform `(0, init_scale]` initialization followed by SGD epochs until
/// `max_epochs` or a relative loss change below `tol`.
pub fn train(block: &FeatureBlock, cfg: &LfaConfig) -> Result<LfaFit> {
    cfg.validate()?;
    if block.observed_count() == 0 {
        return Err(Error::validation(format!(
            "block starting at column {} has no observed entries",
            block.start_index()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
    let mut init = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| cfg.init_scale * (1.0 - rng.random::<f64>()))
            .collect()
    };
    let p = init(block.n_rows() * cfg.dim);
    let q = init(block.width() * cfg.dim);
    let mut factors = LatentFactorPair {
        dim: cfg.dim,
        p,
        q,
    };

    let mut losses = Vec::new();
    let mut converged = false;
    let mut prev: Option<f64> = None;
    for epoch in 1..=cfg.max_epochs {
        let loss = sgd_epoch(block, &mut factors, cfg).map_err(|e| match e {
            Error::Divergence { eta, .. } => Error::Divergence { eta, epoch },
            other => other,
        })?;
        losses.push(loss);
        if let Some(prev) = prev {
            if (prev - loss).abs() / prev.max(LOSS_GUARD) < cfg.tol {
                converged = true;
                break;
            }
        }
        prev = Some(loss);
    }
    Ok(LfaFit {
        factors,
        epoch_losses: losses,
        converged,
    })
}

/// Dense reconstruction `B̂ = P Qᵀ`, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedBlock {
    start_index: usize,
    columns: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
}

impl CompletedBlock {
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn into_columns(self) -> Vec<Vec<f64>> {
        self.columns
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    /// Observation mask of the source block.
    pub fn source_observed(&self, row: usize, col: usize) -> bool {
        self.mask[col][row]
    }
}

pub fn complete(block: &FeatureBlock, factors: &LatentFactorPair) -> Result<CompletedBlock> {
    check_dims(block, factors)?;
    let columns = (0..block.width())
        .map(|j| (0..block.n_rows()).map(|m| factors.predict(m, j)).collect())
        .collect();
    let mask = (0..block.width())
        .map(|j| (0..block.n_rows()).map(|m| block.is_observed(m, j)).collect())
        .collect();
    Ok(CompletedBlock {
        start_index: block.start_index(),
        columns,
        mask,
    })
}

/// Like [`complete`], but only unobserved cells take the reconstruction;
/// observed cells keep their values.
pub fn impute(block: &FeatureBlock, factors: &LatentFactorPair) -> Result<CompletedBlock> {
    let mut done = complete(block, factors)?;
    for (j, column) in done.columns.iter_mut().enumerate() {
        for (m, cell) in column.iter_mut().enumerate() {
            if let Some(v) = block.value(m, j) {
                *cell = v;
            }
        }
    }
    Ok(done)
}
