//! Conditional-independence tests: Fisher's z on partial correlations for
//! continuous data, G² likelihood ratio for discrete data.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{chi_square_sf, normal_two_sided_p};

const R_CLAMP: f64 = 1.0 - 1e-12;
const RIDGE: f64 = 1e-8;
const PIVOT_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiResult {
    pub p_value: f64,
    pub statistic: f64,
    /// `n − |S| − 3` for Fisher's z, degrees of freedom for G².
    pub dof: f64,
    /// Set when the test could not be carried out (constant input, zero dof)
    /// and independence was assumed.
    pub degenerate: bool,
}

impl CiResult {
    fn independent(dof: f64) -> Self {
        CiResult {
            p_value: 1.0,
            statistic: 0.0,
            dof,
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialCorrelation {
    pub r: f64,
    /// x or y had zero variance; `r` is reported as 0.
    pub degenerate: bool,
}

fn centered(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum::<f64>();
    (c, ss)
}

fn clamp_r(r: f64) -> f64 {
    r.clamp(-R_CLAMP, R_CLAMP)
}

/// Pearson correlation (no clamping). `None` if either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (cx, sx) = centered(x);
    let (cy, sy) = centered(y);
    if sx <= 0.0 || sy <= 0.0 {
        return None;
    }
    let sxy: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Some(sxy / (sx * sy).sqrt())
}

/// Gauss-Jordan inverse with partial pivoting; `None` when a pivot vanishes.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < PIVOT_EPS {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = 1.0 / a[col][col];
        for j in 0..n {
            a[col][j] *= scale;
            inv[col][j] *= scale;
        }
        for i in 0..n {
            if i != col {
                let factor = a[i][col];
                if factor != 0.0 {
                    for j in 0..n {
                        a[i][j] -= factor * a[col][j];
                        inv[i][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn partial_from_precision(prec: &[Vec<f64>]) -> Option<f64> {
    let denom = (prec[0][0] * prec[1][1]).sqrt();
    let r = -prec[0][1] / denom;
    r.is_finite().then_some(r)
}

/// Correlation of `x` and `y` given the conditioning vectors, read off the
/// inverse of the joint correlation matrix. Constant conditioning vectors
/// carry no information and are dropped. A singular matrix is retried once
/// with a small ridge on the diagonal.
pub fn partial_correlation(x: &[f64], y: &[f64], given: &[&[f64]]) -> Result<PartialCorrelation> {
    let n = x.len();
    if y.len() != n || given.iter().any(|s| s.len() != n) {
        return Err(Error::validation("vectors must have equal length"));
    }
    if n < given.len() + 4 {
        return Err(Error::validation(format!(
            "need at least |S| + 4 = {} samples, got {n}",
            given.len() + 4
        )));
    }
    // canonical argument order keeps the result bitwise symmetric in x and y
    let (x, y) = if is_lex_less(y, x) { (y, x) } else { (x, y) };

    let (cx, sx) = centered(x);
    let (cy, sy) = centered(y);
    if sx <= 0.0 || sy <= 0.0 {
        return Ok(PartialCorrelation {
            r: 0.0,
            degenerate: true,
        });
    }
    let mut vars = vec![(cx, sx), (cy, sy)];
    vars.extend(given.iter().map(|s| centered(s)).filter(|(_, ss)| *ss > 0.0));

    if vars.len() == 2 {
        let sxy: f64 = vars[0].0.iter().zip(&vars[1].0).map(|(a, b)| a * b).sum();
        return Ok(PartialCorrelation {
            r: clamp_r(sxy / (sx * sy).sqrt()),
            degenerate: false,
        });
    }

    let k = vars.len();
    let mut corr = vec![vec![0.0; k]; k];
    for i in 0..k {
        corr[i][i] = 1.0;
        for j in (i + 1)..k {
            let s: f64 = vars[i].0.iter().zip(&vars[j].0).map(|(a, b)| a * b).sum();
            let c = s / (vars[i].1 * vars[j].1).sqrt();
            corr[i][j] = c;
            corr[j][i] = c;
        }
    }
    let r = match invert(corr.clone()).and_then(|p| partial_from_precision(&p)) {
        Some(r) => r,
        None => {
            for (i, row) in corr.iter_mut().enumerate() {
                row[i] += RIDGE;
            }
            invert(corr)
                .and_then(|p| partial_from_precision(&p))
                .ok_or(Error::Singular(given.len()))?
        }
    };
    Ok(PartialCorrelation {
        r: clamp_r(r),
        degenerate: false,
    })
}

fn is_lex_less(a: &[f64], b: &[f64]) -> bool {
    for (u, v) in a.iter().zip(b) {
        match u.total_cmp(v) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Fisher's z test of `x ⟂ y | S` with `n = x.len()` samples.
pub fn fisher_z_test(x: &[f64], y: &[f64], given: &[&[f64]]) -> Result<CiResult> {
    let n = x.len();
    let dof = n as f64 - given.len() as f64 - 3.0;
    if dof <= 0.0 {
        return Err(Error::validation(format!(
            "Fisher's z needs n > |S| + 3 (n = {n}, |S| = {})",
            given.len()
        )));
    }
    let pc = partial_correlation(x, y, given)?;
    if pc.degenerate {
        return Ok(CiResult::independent(dof));
    }
    let z = 0.5 * ((1.0 + pc.r) / (1.0 - pc.r)).ln();
    let statistic = dof.sqrt() * z.abs();
    Ok(CiResult {
        p_value: normal_two_sided_p(statistic).clamp(0.0, 1.0),
        statistic,
        dof,
        degenerate: false,
    })
}

/// G² test of `x ⟂ y | S` on discrete codes. Each configuration of `S` forms
/// a stratum; degrees of freedom sum `(levels_x − 1)(levels_y − 1)` over
/// non-empty strata, counting the levels observed within each stratum.
pub fn g2_test(x: &[i64], y: &[i64], given: &[&[i64]]) -> Result<CiResult> {
    let n = x.len();
    if y.len() != n || given.iter().any(|s| s.len() != n) {
        return Err(Error::validation("vectors must have equal length"));
    }
    let mut strata: BTreeMap<Vec<i64>, BTreeMap<(i64, i64), f64>> = BTreeMap::new();
    for i in 0..n {
        let key: Vec<i64> = given.iter().map(|s| s[i]).collect();
        *strata.entry(key).or_default().entry((x[i], y[i])).or_insert(0.0) += 1.0;
    }

    let mut g2 = 0.0;
    let mut dof = 0.0;
    for table in strata.values() {
        let mut rows: BTreeMap<i64, f64> = BTreeMap::new();
        let mut cols: BTreeMap<i64, f64> = BTreeMap::new();
        let mut total = 0.0;
        for (&(a, b), &count) in table {
            *rows.entry(a).or_insert(0.0) += count;
            *cols.entry(b).or_insert(0.0) += count;
            total += count;
        }
        if total == 0.0 {
            continue;
        }
        dof += ((rows.len() - 1) * (cols.len() - 1)) as f64;
        for (&(a, b), &observed) in table {
            let expected = rows[&a] * cols[&b] / total;
            g2 += observed * (observed / expected).ln();
        }
    }
    if dof == 0.0 {
        return Ok(CiResult::independent(0.0));
    }
    let statistic = (2.0 * g2).max(0.0);
    Ok(CiResult {
        p_value: chi_square_sf(statistic, dof),
        statistic,
        dof,
        degenerate: false,
    })
}
