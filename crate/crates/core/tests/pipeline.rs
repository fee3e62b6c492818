//! Selector and evaluation behaviour on constructed streams.

mod common;

use common::*;
use osfsu::data::{generate_synthetic, sparsify, Dataset, MaskSpec};
use osfsu::eval::{cross_validate, EvalConfig};
use osfsu::lfa::FeatureBlock;
use osfsu::selector::{
    process_block, redundancy_check_new, redundancy_prune_existing, relevance_p, run, Admission, Decision,
    Redundancy, RelevanceVerdict, SelectedFeature, SelectionState, SelectorConfig,
};
use std::collections::BTreeSet;

fn selected(column_index: usize, values: Vec<f64>) -> SelectedFeature {
    SelectedFeature { column_index, values, admitted_at_block: 0, via: Admission::Relevance, p_value: 0.0, gamma: None }
}

/// Two independent signals and the label they jointly decide.
fn two_signals(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let a = normals(&mut g, n);
    let b = normals(&mut g, n);
    let y = a.iter().zip(&b).map(|(u, v)| f64::from(u + v > 0.0)).collect();
    (a, b, y)
}

fn fast_cfg() -> SelectorConfig {
    let mut cfg = SelectorConfig::default();
    cfg.lfa.eta = 0.01;
    cfg.lfa.max_epochs = 200;
    cfg
}

fn dataset_from_columns(cols: &[Vec<f64>], labels: Vec<u32>) -> Dataset {
    let n = labels.len();
    let rows = (0..n).map(|i| cols.iter().map(|c| Some(c[i])).collect()).collect();
    let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
    Dataset::new(rows, labels, names).unwrap()
}

#[test]
fn duplicate_candidate_is_discarded_with_its_twin_as_witness() {
    let (a, _, y) = two_signals(1, 200);
    let sf = vec![selected(4, a.clone())];
    let cfg = SelectorConfig::default();
    assert_eq!(
        redundancy_check_new(&a, &sf, &y, &cfg).unwrap(),
        Redundancy::Discard { witness: vec![4] }
    );
    assert_eq!(redundancy_check_new(&a, &[], &y, &cfg).unwrap(), Redundancy::Keep);
}

#[test]
fn independent_signal_is_kept() {
    let (a, b, y) = two_signals(2, 200);
    let sf = vec![selected(0, a.clone())];
    let cfg = SelectorConfig::default();
    assert!(fisher_z_oracle(&b, &y, &[&a]) <= 0.1);
    assert_eq!(redundancy_check_new(&b, &sf, &y, &cfg).unwrap(), Redundancy::Keep);
}

#[test]
fn pruning_removes_one_of_two_twins() {
    let (a, b, y) = two_signals(3, 200);
    let cfg = SelectorConfig::default();
    let mut sf = vec![selected(0, a.clone()), selected(1, b.clone()), selected(2, a.clone())];
    let pruned = redundancy_prune_existing(&mut sf, &y, &cfg, Some(2)).unwrap();
    assert_eq!(pruned.len(), 1);
    assert_eq!(pruned[0].column, 0);
    assert_eq!(sf.iter().map(|f| f.column_index).collect::<Vec<_>>(), vec![1, 2]);
    // fixed point
    assert!(redundancy_prune_existing(&mut sf, &y, &cfg, None).unwrap().is_empty());
    assert_eq!(sf.len(), 2);
}

#[test]
fn pruning_keeps_independent_informative_features() {
    let (a, b, y) = two_signals(4, 300);
    assert!(fisher_z_oracle(&a, &y, &[&b]) <= 0.1);
    assert!(fisher_z_oracle(&b, &y, &[&a]) <= 0.1);
    let cfg = SelectorConfig::default();
    let mut sf = vec![selected(0, a), selected(1, b)];
    assert!(redundancy_prune_existing(&mut sf, &y, &cfg, None).unwrap().is_empty());
    assert_eq!(sf.len(), 2);
    let mut single = vec![sf.remove(0)];
    assert!(redundancy_prune_existing(&mut single, &y, &cfg, None).unwrap().is_empty());
}

#[test]
fn constant_block_selects_nothing() {
    let labels: Vec<u32> = (0..40).map(|i| i % 2).collect();
    let cols = (0..4).map(|j| vec![Some(j as f64); 40]).collect();
    let block = FeatureBlock::from_columns(0, cols).unwrap();
    let mut state = SelectionState::default();
    process_block(&block, &mut state, &labels, &SelectorConfig::default()).unwrap();
    assert!(state.selected.is_empty());
    assert!(state.fuzzy.is_empty());
    assert_eq!(state.blocks_processed, 1);
    assert!(state.trace.iter().all(|r| r.p == 1.0 && r.verdict == RelevanceVerdict::Irrelevant));
}

#[test]
fn weak_column_in_observed_block_goes_through_fuzzy_set() {
    let n = 100;
    let labels: Vec<u32> = (0..n as u32).map(|i| i % 2).collect();
    // unit vectors: centred labels and an orthogonal noise direction
    let l: Vec<f64> = labels.iter().map(|&v| f64::from(v) - 0.5).collect();
    let mut e = normals(&mut rng(6), n);
    let proj = e.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>() / l.iter().map(|v| v * v).sum::<f64>();
    e.iter_mut().zip(&l).for_each(|(a, b)| *a -= proj * b);
    let e_mean = e.iter().sum::<f64>() / n as f64;
    e.iter_mut().for_each(|v| *v -= e_mean);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (nl, ne) = (norm(&l), norm(&e));
    // sqrt(n - 3) * atanh(r) at the two-sided 5% normal quantile gives p = 0.05
    let r = (1.959_963_984_540_054 / ((n - 3) as f64).sqrt()).tanh();
    let x: Vec<f64> = (0..n).map(|i| r * l[i] / nl + (1.0 - r * r).sqrt() * e[i] / ne).collect();
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let p = fisher_z_oracle(&x, &y, &[]);
    assert!((p - 0.05).abs() < 1e-6, "p = {p}");

    let block = FeatureBlock::from_columns(0, vec![x.iter().map(|&v| Some(v)).collect()]).unwrap();
    let mut state = SelectionState::default();
    process_block(&block, &mut state, &labels, &SelectorConfig::default()).unwrap();
    let rec = &state.trace[0];
    assert_eq!(rec.mu, 0.01);
    assert_eq!(rec.verdict, RelevanceVerdict::FuzzyRelevant);
    assert!(rec.gamma.is_some());
    // the empty selected set still admits one fuzzy candidate
    assert_eq!(rec.decision, Decision::FuzzyMerged);
    assert_eq!(state.selected.len(), 1);
    assert_eq!(state.selected[0].via, Admission::FuzzyMerge);
    assert!(state.fuzzy.is_empty());
}

#[test]
fn short_stream_is_one_partial_block() {
    let (d, _) = generate_synthetic(60, 7, 2, 0.1, 3).unwrap();
    let out = run(d.stream_columns(), d.labels(), &fast_cfg()).unwrap();
    assert_eq!(out.blocks, 1);
    assert_eq!(out.block_reports[0].width, 7);
    assert_eq!(out.trace.len(), 7);
}

#[test]
fn duplicated_stream_never_keeps_both_twins() {
    for seed in 0..5 {
        let (d, _) = generate_synthetic(200, 20, 3, 0.1, seed).unwrap();
        let cols: Vec<Vec<f64>> = (0..20)
            .flat_map(|j| {
                let c: Vec<f64> = d.column(j).into_iter().map(|v| v.unwrap()).collect();
                [c.clone(), c]
            })
            .collect();
        let dup = dataset_from_columns(&cols, d.labels().to_vec());
        let out = run(dup.stream_columns(), dup.labels(), &fast_cfg()).unwrap();
        let originals: Vec<usize> = out.selected_indices().iter().map(|i| i / 2).collect();
        let distinct: BTreeSet<usize> = originals.iter().copied().collect();
        assert_eq!(distinct.len(), originals.len(), "seed {seed}: {:?}", out.selected_indices());
    }
}

#[test]
fn selection_invariants_hold_on_masked_streams() {
    for seed in 0..4 {
        let (d, _) = generate_synthetic(150, 40, 3, 0.1, seed).unwrap();
        let masked = sparsify(&d, MaskSpec::new(0.3, seed).unwrap());
        let out = run(masked.stream_columns(), masked.labels(), &fast_cfg()).unwrap();
        let idx = out.selected_indices();
        assert_eq!(idx.iter().collect::<BTreeSet<_>>().len(), idx.len());
        assert_eq!(out.trace.len(), 40);
        assert_eq!(out.blocks, 3);
        for r in &out.trace {
            assert!((0.0..=1.0).contains(&r.p));
            assert!((0.01..=0.1).contains(&r.mu));
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    let (d, _) = generate_synthetic(120, 30, 3, 0.1, 9).unwrap();
    let masked = sparsify(&d, MaskSpec::new(0.2, 9).unwrap());
    let cfg = fast_cfg();
    let a = run(masked.stream_columns(), masked.labels(), &cfg).unwrap();
    let b = run(masked.stream_columns(), masked.labels(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(&cfg).to_string(), b.to_json(&cfg).to_string());
}

#[test]
fn identity_and_constant_relevance() {
    let labels: Vec<f64> = (0..50).map(|i| f64::from(i % 3 == 0)).collect();
    let cfg = SelectorConfig::default();
    assert!(relevance_p(&labels, &labels, &cfg).unwrap() < 1e-12);
    assert_eq!(relevance_p(&[2.5; 50], &labels, &cfg).unwrap(), 1.0);
}

#[test]
fn synthetic_irrelevant_columns_mostly_pass_as_independent() {
    let (d, truth) = generate_synthetic(200, 50, 3, 0.1, 7).unwrap();
    let y: Vec<f64> = d.labels().iter().map(|&v| f64::from(v)).collect();
    let cfg = SelectorConfig::default();
    let mut independent = 0;
    let mut total = 0;
    for j in (0..50).filter(|j| !truth.relevant_indices.contains(j)) {
        let col: Vec<f64> = d.column(j).into_iter().map(|v| v.unwrap()).collect();
        let p = relevance_p(&col, &y, &cfg).unwrap();
        assert!((p - fisher_z_oracle(&col, &y, &[])).abs() < 1e-9);
        total += 1;
        independent += usize::from(p > 0.1);
    }
    assert!(independent * 10 >= total * 9, "{independent}/{total}");
}

#[test]
fn noise_columns_against_balanced_labels() {
    let y: Vec<f64> = (0..200).map(|i| f64::from(i % 2)).collect();
    let cfg = SelectorConfig::default();
    let mut count = 0;
    for seed in 0..100 {
        let x = normals(&mut rng(seed), 200);
        let p = relevance_p(&x, &y, &cfg).unwrap();
        let oracle = fisher_z_oracle(&x, &y, &[]);
        assert!((p - oracle).abs() < 1e-9);
        count += usize::from(p > 0.1);
    }
    // under independence each column passes with probability 0.9; 83 is the
    // lower 1% quantile of Binomial(100, 0.9)
    assert_eq!(count, 89);
    assert!(count >= 83);
}

#[test]
fn separable_data_is_classified_well() {
    let (d, _) = generate_synthetic(200, 20, 1, 0.0, 5).unwrap();
    let eval = EvalConfig { theta: 0.0, ..EvalConfig::default() };
    let report = cross_validate(&d, &fast_cfg(), &eval).unwrap();
    assert!(report.mean >= 0.95, "mean = {}", report.mean);
    let mean = report.fold_accuracies.iter().sum::<f64>() / report.fold_accuracies.len() as f64;
    assert!((report.mean - mean).abs() < 1e-12);
    assert_eq!(report, cross_validate(&d, &fast_cfg(), &eval).unwrap());
    let par = EvalConfig { jobs: 3, ..eval };
    assert_eq!(report.fold_accuracies, cross_validate(&d, &fast_cfg(), &par).unwrap().fold_accuracies);
}

#[test]
fn test_split_never_influences_selection() {
    let (d, _) = generate_synthetic(150, 30, 3, 0.1, 12).unwrap();
    let eval = EvalConfig { theta: 0.2, ..EvalConfig::default() };
    let plan = osfsu::data::split_folds(&d, eval.folds, eval.seed).unwrap();
    let test: BTreeSet<usize> = plan.test_indices(0).into_iter().collect();
    let rows = d
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if test.contains(&i) {
                r.iter().map(|v| v.map(|x| 0.5 - x)).collect()
            } else {
                r.clone()
            }
        })
        .collect();
    let canary = Dataset::new(rows, d.labels().to_vec(), d.feature_names().to_vec()).unwrap();
    let cfg = fast_cfg();
    let a = cross_validate(&d, &cfg, &eval).unwrap();
    let b = cross_validate(&canary, &cfg, &eval).unwrap();
    assert_eq!(a.folds[0].selected, b.folds[0].selected);
}

#[test]
fn empty_selection_falls_back_to_majority() {
    // 3:2 class ratio, features carry no signal at all
    let labels: Vec<u32> = (0..100).map(|i| u32::from(i % 5 >= 3)).collect();
    let cols: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64; 100]).collect();
    let d = dataset_from_columns(&cols, labels);
    let report = cross_validate(&d, &fast_cfg(), &EvalConfig { theta: 0.0, ..EvalConfig::default() }).unwrap();
    for f in &report.folds {
        assert!(f.majority_fallback);
        assert!(f.selected.is_empty());
        assert_eq!(f.accuracy, 0.6);
    }
}
