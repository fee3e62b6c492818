//! Online selection over a stream of sparse feature columns.
//!
//! Columns are buffered into blocks of `block_size`. Each full block (and the
//! final partial one) has its missing cells filled by latent factor analysis
//! (or is replaced wholesale by the reconstruction, see
//! [`SelectorConfig::reconstruct_observed`]), then every
//! completed column goes through relevance analysis against the label,
//! redundancy analysis against the selected set, and fuzzy correlation
//! analysis when its p-value falls in the band `(μ, 0.1]`. After each block
//! the best fuzzy candidates by dependency degree are merged into the
//! selected set.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::ci::{fisher_z_test, g2_test};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzy_alpha, AlphaBand, TrapezoidParams};
use crate::lfa::{self, FeatureBlock, LfaConfig};
use crate::nrs::NeighborhoodSpace;

/// p-values above this accept independence outright.
pub const INDEPENDENCE_P: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiTestKind {
    /// Fisher's z on partial correlations (continuous data).
    FisherZ,
    /// G² on values rounded to integer codes (discrete data).
    GSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub block_size: usize,
    pub lfa: LfaConfig,
    pub band: AlphaBand,
    pub trapezoid: TrapezoidParams,
    /// largest conditioning set tried in redundancy analysis
    pub max_cond: usize,
    /// neighborhood radius on min-max scaled values
    pub radius: f64,
    pub seed: u64,
    pub ci_test: CiTestKind,
    /// Replace observed cells by their reconstruction too (`B̂ = P Qᵀ`
    /// everywhere) instead of filling only the missing cells.
    pub reconstruct_observed: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            block_size: 15,
            lfa: LfaConfig::default(),
            band: AlphaBand::default(),
            trapezoid: TrapezoidParams::default(),
            max_cond: 3,
            radius: 0.15,
            seed: 0,
            ci_test: CiTestKind::FisherZ,
            reconstruct_observed: false,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::validation("block size must be at least 1"));
        }
        if self.max_cond == 0 {
            return Err(Error::validation("max conditioning set size must be at least 1"));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::validation("neighborhood radius must be finite and >= 0"));
        }
        self.lfa.validate()
    }

    fn ci_p(&self, x: &[f64], y: &[f64], given: &[&[f64]]) -> Result<f64> {
        match self.ci_test {
            CiTestKind::FisherZ => Ok(fisher_z_test(x, y, given)?.p_value),
            CiTestKind::GSquared => {
                let codes = |v: &[f64]| v.iter().map(|x| x.round() as i64).collect::<Vec<_>>();
                let given: Vec<Vec<i64>> = given.iter().map(|s| codes(s)).collect();
                let given: Vec<&[i64]> = given.iter().map(Vec::as_slice).collect();
                Ok(g2_test(&codes(x), &codes(y), &given)?.p_value)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceVerdict {
    Relevant,
    FuzzyRelevant,
    Irrelevant,
}

/// `p ≤ μ` relevant, `μ < p ≤ 0.1` fuzzy relevant, otherwise irrelevant.
pub fn classify_relevance(p: f64, mu: f64) -> RelevanceVerdict {
    if p <= mu {
        RelevanceVerdict::Relevant
    } else if p <= INDEPENDENCE_P {
        RelevanceVerdict::FuzzyRelevant
    } else {
        RelevanceVerdict::Irrelevant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    Relevance,
    #[serde(rename = "fuzzy")]
    FuzzyMerge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFeature {
    pub column_index: usize,
    /// completed (imputed) values
    pub values: Vec<f64>,
    pub admitted_at_block: usize,
    pub via: Admission,
    pub p_value: f64,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyCandidate {
    pub column_index: usize,
    pub values: Vec<f64>,
    pub p_value: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Selected,
    Redundant,
    FuzzyMerged,
    FuzzyDropped,
    Irrelevant,
}

/// Per-column decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub column: usize,
    pub block: usize,
    pub p: f64,
    pub mu: f64,
    pub verdict: RelevanceVerdict,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// conditioning set (column indices) that made this column redundant
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
    /// selected columns pruned after this column was admitted
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pruned: Vec<PrunedFeature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedFeature {
    pub column: usize,
    pub witness: Vec<usize>,
}

/// Diagnostics of one block's completion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub block: usize,
    pub start_index: usize,
    pub width: usize,
    pub missing_rate: f64,
    pub mu: f64,
    pub epochs: usize,
    pub converged: bool,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionState {
    pub selected: Vec<SelectedFeature>,
    pub fuzzy: Vec<FuzzyCandidate>,
    pub blocks_processed: usize,
    pub trace: Vec<TraceRecord>,
    pub blocks: Vec<BlockReport>,
}

impl SelectionState {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected.iter().map(|f| f.column_index).collect()
    }
}

/// Relevance of a completed column to the label, conditioning on nothing.
pub fn relevance_p(column: &[f64], labels: &[f64], cfg: &SelectorConfig) -> Result<f64> {
    cfg.ci_p(column, labels, &[])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Redundancy {
    Keep,
    Discard { witness: Vec<usize> },
}

/// First conditioning set (by size, then lexicographic position) that makes
/// `target` independent of the label, drawn from `pool`.
fn find_witness(
    target: &[f64],
    pool: &[&SelectedFeature],
    labels: &[f64],
    cfg: &SelectorConfig,
) -> Result<Option<Vec<usize>>> {
    for size in 1..=cfg.max_cond.min(pool.len()) {
        for subset in (0..pool.len()).combinations(size) {
            let given: Vec<&[f64]> = subset.iter().map(|&i| pool[i].values.as_slice()).collect();
            if cfg.ci_p(target, labels, &given)? > INDEPENDENCE_P {
                return Ok(Some(subset.iter().map(|&i| pool[i].column_index).collect()));
            }
        }
    }
    Ok(None)
}

/// Redundancy analysis of a newly relevant column against the selected set.
pub fn redundancy_check_new(
    candidate: &[f64],
    selected: &[SelectedFeature],
    labels: &[f64],
    cfg: &SelectorConfig,
) -> Result<Redundancy> {
    let pool: Vec<&SelectedFeature> = selected.iter().collect();
    Ok(match find_witness(candidate, &pool, labels, cfg)? {
        Some(witness) => Redundancy::Discard { witness },
        None => Redundancy::Keep,
    })
}

/// Single pass over the selected set in admission order, removing every
/// member made redundant by the others. Removals apply immediately. The
/// member with column index `protected` (the feature just added) is never
/// removed.
pub fn redundancy_prune_existing(
    selected: &mut Vec<SelectedFeature>,
    labels: &[f64],
    cfg: &SelectorConfig,
    protected: Option<usize>,
) -> Result<Vec<PrunedFeature>> {
    let mut pruned = Vec::new();
    let mut i = 0;
    while i < selected.len() {
        if Some(selected[i].column_index) == protected {
            i += 1;
            continue;
        }
        let pool: Vec<&SelectedFeature> = selected
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, f)| f)
            .collect();
        match find_witness(&selected[i].values, &pool, labels, cfg)? {
            Some(witness) => {
                let removed = selected.remove(i);
                pruned.push(PrunedFeature {
                    column: removed.column_index,
                    witness,
                });
            }
            None => i += 1,
        }
    }
    Ok(pruned)
}

/// Dependency degree of the label on a single min-max scaled column.
pub fn score_fuzzy(candidate: &[f64], labels: &[Label], radius: f64) -> Result<f64> {
    let space = NeighborhoodSpace::from_columns_scaled(&[candidate], radius)?;
    Ok(space.dependency_degree(labels)?.gamma)
}

/// Moves the top `max(1, |SF| / 2)` fuzzy candidates (γ descending, then p
/// ascending, then column index) into the selected set and clears the rest.
/// A candidate whose values duplicate a selected feature is passed over.
pub fn merge_fuzzy(state: &mut SelectionState) {
    if state.fuzzy.is_empty() {
        return;
    }
    let n_add = (state.selected.len() / 2).max(1);
    let mut candidates = std::mem::take(&mut state.fuzzy);
    candidates.sort_by(|a, b| {
        b.gamma
            .total_cmp(&a.gamma)
            .then(a.p_value.total_cmp(&b.p_value))
            .then(a.column_index.cmp(&b.column_index))
    });
    let block = state.blocks_processed;
    let mut added = 0;
    for c in candidates {
        let twin = state.selected.iter().any(|f| f.values == c.values);
        let merged = added < n_add && !twin;
        if let Some(rec) = state
            .trace
            .iter_mut()
            .rev()
            .find(|r| r.column == c.column_index)
        {
            rec.decision = if merged {
                Decision::FuzzyMerged
            } else {
                Decision::FuzzyDropped
            };
        }
        if merged {
            added += 1;
            state.selected.push(SelectedFeature {
                column_index: c.column_index,
                values: c.values,
                admitted_at_block: block,
                via: Admission::FuzzyMerge,
                p_value: c.p_value,
                gamma: Some(c.gamma),
            });
        }
    }
}

fn labels_as_f64(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|&l| f64::from(l)).collect()
}

/// Completes one block and runs relevance, redundancy and fuzzy analysis over
/// its columns, then merges fuzzy candidates.
pub fn process_block(
    block: &FeatureBlock,
    state: &mut SelectionState,
    labels: &[Label],
    cfg: &SelectorConfig,
) -> Result<()> {
    let block_no = state.blocks_processed;
    let wrap = |e: Error| Error::Block {
        block: block_no,
        source: Box::new(e),
    };
    if block.is_empty() {
        return Err(wrap(Error::validation("empty block")));
    }
    if block.n_rows() != labels.len() {
        return Err(wrap(Error::validation(format!(
            "block has {} rows but there are {} labels",
            block.n_rows(),
            labels.len()
        ))));
    }
    let numeric_labels = labels_as_f64(labels);
    let uncertainty = block.missing_rate();
    let mu = fuzzy_alpha(uncertainty, &cfg.band, &cfg.trapezoid).map_err(wrap)?;

    let lfa_cfg = LfaConfig {
        init_seed: cfg.seed.wrapping_add(block_no as u64),
        ..cfg.lfa.clone()
    };
    let fit = lfa::train(block, &lfa_cfg).map_err(wrap)?;
    let completed = if cfg.reconstruct_observed {
        lfa::complete(block, &fit.factors)
    } else {
        lfa::impute(block, &fit.factors)
    }
    .map_err(wrap)?;
    state.blocks.push(BlockReport {
        block: block_no,
        start_index: block.start_index(),
        width: block.width(),
        missing_rate: uncertainty,
        mu,
        epochs: fit.epochs(),
        converged: fit.converged,
        epoch_losses: fit.epoch_losses,
    });

    for (offset, values) in completed.into_columns().into_iter().enumerate() {
        let column = block.start_index() + offset;
        let p = relevance_p(&values, &numeric_labels, cfg).map_err(wrap)?;
        let verdict = classify_relevance(p, mu);
        let mut record = TraceRecord {
            column,
            block: block_no,
            p,
            mu,
            verdict,
            decision: Decision::Irrelevant,
            gamma: None,
            witness: None,
            pruned: Vec::new(),
        };
        match verdict {
            RelevanceVerdict::Relevant => {
                match redundancy_check_new(&values, &state.selected, &numeric_labels, cfg)
                    .map_err(wrap)?
                {
                    Redundancy::Discard { witness } => {
                        record.decision = Decision::Redundant;
                        record.witness = Some(witness);
                    }
                    Redundancy::Keep => {
                        state.selected.push(SelectedFeature {
                            column_index: column,
                            values,
                            admitted_at_block: block_no,
                            via: Admission::Relevance,
                            p_value: p,
                            gamma: None,
                        });
                        record.decision = Decision::Selected;
                        record.pruned = redundancy_prune_existing(
                            &mut state.selected,
                            &numeric_labels,
                            cfg,
                            Some(column),
                        )
                        .map_err(wrap)?;
                    }
                }
            }
            RelevanceVerdict::FuzzyRelevant => {
                let gamma = score_fuzzy(&values, labels, cfg.radius).map_err(wrap)?;
                record.gamma = Some(gamma);
                record.decision = Decision::FuzzyDropped;
                state.fuzzy.push(FuzzyCandidate {
                    column_index: column,
                    values,
                    p_value: p,
                    gamma,
                });
            }
            RelevanceVerdict::Irrelevant => {}
        }
        state.trace.push(record);
    }
    merge_fuzzy(state);
    state.blocks_processed += 1;
    Ok(())
}

/// Final state of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub selected: Vec<SelectedFeature>,
    pub blocks: usize,
    pub trace: Vec<TraceRecord>,
    pub block_reports: Vec<BlockReport>,
}

impl SelectionOutcome {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected.iter().map(|f| f.column_index).collect()
    }

    /// Selection result document: selected features, block count, config.
    pub fn to_json(&self, cfg: &SelectorConfig) -> serde_json::Value {
        let selected: Vec<serde_json::Value> = self
            .selected
            .iter()
            .map(|f| {
                serde_json::json!({
                    "index": f.column_index,
                    "via": f.via,
                    "p": f.p_value,
                    "gamma": f.gamma,
                })
            })
            .collect();
        serde_json::json!({
            "selected": selected,
            "blocks": self.blocks,
            "config": cfg,
        })
    }
}

/// Runs the selector over `(index, column)` pairs in arrival order.
pub fn run<I>(stream: I, labels: &[Label], cfg: &SelectorConfig) -> Result<SelectionOutcome>
where
    I: IntoIterator<Item = (usize, Vec<Option<f64>>)>,
{
    cfg.validate()?;
    let distinct = labels.iter().unique().count();
    if distinct < 2 {
        return Err(Error::validation(format!(
            "need at least 2 label classes, found {distinct}"
        )));
    }
    let n = labels.len();
    let mut state = SelectionState::default();
    let mut block: Option<FeatureBlock> = None;
    let mut seen_any = false;
    for (index, column) in stream {
        seen_any = true;
        let buf = block.get_or_insert_with(|| FeatureBlock::new(index, n, cfg.block_size));
        buf.push_column(column)?;
        if buf.is_full() {
            let full = block.take().expect("block present");
            process_block(&full, &mut state, labels, cfg)?;
        }
    }
    if !seen_any {
        return Err(Error::validation("stream yielded no columns"));
    }
    if let Some(partial) = block.take() {
        process_block(&partial, &mut state, labels, cfg)?;
    }
    Ok(SelectionOutcome {
        selected: state.selected,
        blocks: state.blocks_processed,
        trace: state.trace,
        block_reports: state.blocks,
    })
}
