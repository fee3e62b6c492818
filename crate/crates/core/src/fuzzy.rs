//! Membership functions and the fuzzy significance threshold.
//!
//! The threshold μ slides between `alpha_min` and `alpha_max` following a
//! trapezoidal membership of block uncertainty (the block's missing rate by
//! default). At piecewise joints membership is 0 at `a` and `d` and 1 at `b`
//! and `c`; a zero-width ramp becomes a step that is 1 exactly at its peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn triangular_mf(x: f64, a: f64, b: f64, c: f64) -> f64 {
    if x == b {
        1.0
    } else if x <= a || x >= c {
        0.0
    } else if x < b {
        (x - a) / (b - a)
    } else {
        (x - c) / (b - c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TrapezoidParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::validation("trapezoid parameters must be finite"));
        }
        if !(a <= b && b <= c && c <= d) {
            return Err(Error::validation(format!(
                "trapezoid parameters must satisfy a <= b <= c <= d, got ({a}, {b}, {c}, {d})"
            )));
        }
        Ok(TrapezoidParams { a, b, c, d })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

impl Default for TrapezoidParams {
    fn default() -> Self {
        TrapezoidParams {
            a: 0.0,
            b: 0.5,
            c: 0.9,
            d: 1.0,
        }
    }
}

pub fn trapezoidal_mf(x: f64, t: &TrapezoidParams) -> f64 {
    if x < t.a {
        0.0
    } else if x >= t.b && x <= t.c {
        1.0
    } else if x < t.b {
        (x - t.a) / (t.b - t.a)
    } else if x >= t.d {
        0.0
    } else {
        (t.d - x) / (t.d - t.c)
    }
}

pub fn gaussian_mf(x: f64, center: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::validation(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let dx = x - center;
    Ok((-(dx * dx) / (2.0 * sigma * sigma)).exp())
}

/// Range of the fuzzy significance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBand {
    min: f64,
    max: f64,
}

impl AlphaBand {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(0.0 < min && min < max && max < 1.0) {
            return Err(Error::validation(format!(
                "alpha band needs 0 < alpha_min < alpha_max < 1, got [{min}, {max}]"
            )));
        }
        Ok(AlphaBand { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

impl Default for AlphaBand {
    fn default() -> Self {
        AlphaBand {
            min: 0.01,
            max: 0.1,
        }
    }
}

/// `μ = α_min + (α_max − α_min) · trapezoid(u)` for uncertainty `u ∈ [0, 1]`.
pub fn fuzzy_alpha(u: f64, band: &AlphaBand, params: &TrapezoidParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::validation(format!(
            "uncertainty must lie in [0, 1], got {u}"
        )));
    }
    Ok(band.min + (band.max - band.min) * trapezoidal_mf(u, params))
}
