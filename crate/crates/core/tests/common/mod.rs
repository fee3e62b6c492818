//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Residuals of least-squares regression of `v` on an intercept plus `given`.
fn residuals(v: &[f64], given: &[&[f64]]) -> Vec<f64> {
    let n = v.len();
    let design = DMatrix::from_fn(n, given.len() + 1, |i, j| if j == 0 { 1.0 } else { given[j - 1][i] });
    let target = DVector::from_column_slice(v);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&target, 1e-14)
        .expect("least squares");
    (target - design * beta).iter().copied().collect()
}

/// Partial correlation by correlating regression residuals.
pub fn residual_partial_correlation(x: &[f64], y: &[f64], given: &[&[f64]]) -> f64 {
    let r = if given.is_empty() {
        pearson(x, y)
    } else {
        pearson(&residuals(x, given), &residuals(y, given))
    };
    r.clamp(-1.0 + 1e-12, 1.0 - 1e-12)
}

/// Fisher's z p-value using the residual route and statrs' normal tail.
pub fn fisher_z_oracle(x: &[f64], y: &[f64], given: &[&[f64]]) -> f64 {
    let r = residual_partial_correlation(x, y, given);
    let n = x.len() as f64;
    let stat = (n - given.len() as f64 - 3.0).sqrt() * (0.5 * ((1.0 + r) / (1.0 - r)).ln()).abs();
    2.0 * Normal::standard().sf(stat)
}

/// G² over dense per-stratum contingency tables, chi-square tail from statrs.
/// Returns `(statistic, dof, p)`.
pub fn g2_oracle(x: &[i64], y: &[i64], given: &[&[i64]]) -> (f64, f64, f64) {
    let xs: Vec<i64> = x.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let ys: Vec<i64> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let keys: BTreeSet<Vec<i64>> = (0..x.len())
        .map(|i| given.iter().map(|s| s[i]).collect())
        .collect();
    let mut g2 = 0.0;
    let mut dof = 0.0;
    for key in keys {
        let mut table = vec![vec![0.0; ys.len()]; xs.len()];
        for i in 0..x.len() {
            let k: Vec<i64> = given.iter().map(|s| s[i]).collect();
            if k == key {
                let a = xs.binary_search(&x[i]).unwrap();
                let b = ys.binary_search(&y[i]).unwrap();
                table[a][b] += 1.0;
            }
        }
        let row: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<f64> = (0..ys.len()).map(|b| table.iter().map(|r| r[b]).sum()).collect();
        let total: f64 = row.iter().sum();
        let rows_present = row.iter().filter(|&&v| v > 0.0).count() as f64;
        let cols_present = col.iter().filter(|&&v| v > 0.0).count() as f64;
        dof += (rows_present - 1.0) * (cols_present - 1.0);
        for a in 0..xs.len() {
            for b in 0..ys.len() {
                let o = table[a][b];
                if o > 0.0 {
                    g2 += o * (o / (row[a] * col[b] / total)).ln();
                }
            }
        }
    }
    let stat = 2.0 * g2;
    let p = if dof > 0.0 {
        ChiSquared::new(dof).unwrap().sf(stat)
    } else {
        1.0
    };
    (stat, dof, p)
}

/// Lower approximations by explicit neighborhood enumeration; γ = |POS| / n.
pub fn brute_force_gamma<L: Ord + Copy>(rows: &[Vec<f64>], labels: &[L], radius: f64) -> f64 {
    let n = rows.len();
    let dist = |i: usize, j: usize| {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let hoods: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(i, j) <= radius).collect())
        .collect();
    let classes: BTreeSet<L> = labels.iter().copied().collect();
    let mut positive = BTreeSet::new();
    for c in classes {
        let members: BTreeSet<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        for (i, hood) in hoods.iter().enumerate() {
            if hood.is_subset(&members) {
                positive.insert(i);
            }
        }
    }
    positive.len() as f64 / n as f64
}

/// KNN by repeated minimum extraction over (distance², index).
pub fn brute_force_knn(train: &[Vec<f64>], labels: &[u32], q: &[f64], k: usize) -> u32 {
    let mut remaining: Vec<usize> = (0..train.len()).collect();
    let d2 = |i: usize| -> f64 { train[i].iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut votes = std::collections::BTreeMap::new();
    for _ in 0..k {
        let mut best = 0;
        for pos in 1..remaining.len() {
            let (a, b) = (remaining[pos], remaining[best]);
            if d2(a) < d2(b) || (d2(a) == d2(b) && a < b) {
                best = pos;
            }
        }
        let i = remaining.remove(best);
        *votes.entry(labels[i]).or_insert(0usize) += 1;
    }
    let max = *votes.values().max().unwrap();
    *votes.iter().find(|(_, &c)| c == max).unwrap().0
}

/// Rank-`rank` matrix `P* Q*ᵀ` (rows × cols) from standard normal factors.
pub fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng(seed);
    let p: Vec<Vec<f64>> = (0..rows).map(|_| normals(&mut g, rank)).collect();
    let q: Vec<Vec<f64>> = (0..cols).map(|_| normals(&mut g, rank)).collect();
    (0..rows)
        .map(|i| (0..cols).map(|j| p[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum()).collect())
        .collect()
}
