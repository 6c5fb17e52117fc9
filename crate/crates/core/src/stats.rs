//! Mean-difference testing between two emission series.
//!
//! For a difference series `d_t` the statistic is
//!
//! ```text
//! DM = (d̄ − μ) / sqrt( (1/n) Σ_{i=−m}^{m} w(i) γ_i )
//! ```
//!
//! with `γ_i` the lag-`i` autocovariance (normalized by `n`) and `w` either
//! Bartlett weights `1 − |i|/(m+1)` or the unweighted truncation `w ≡ 1`.
//! Inverting `|DM| ≤ z_{α/2}` gives the non-rejection interval for `μ`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::MethodId;
use crate::series::DifferenceSeries;

/// Two-sided 5% critical value of the standard normal.
pub const Z_CRIT_5PCT: f64 = 1.959964;

/// Relative size below which a long-run variance counts as zero.
const DEGENERATE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Bartlett,
    /// Unweighted sum over lags `−m..=m`.
    Truncated,
}

impl Kernel {
    fn weight(self, lag: usize, m: usize) -> f64 {
        match self {
            Kernel::Bartlett => 1.0 - lag as f64 / (m as f64 + 1.0),
            Kernel::Truncated => 1.0,
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bartlett" => Ok(Kernel::Bartlett),
            "truncated" | "none" | "uniform" => Ok(Kernel::Truncated),
            other => Err(Error::config(format!("unknown kernel '{other}'"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Bartlett => "bartlett",
            Kernel::Truncated => "truncated",
        })
    }
}

/// `⌊n^{1/3}⌋`, capped at `n − 1`.
pub fn default_lag(n: usize) -> usize {
    let mut m = (n as f64).cbrt().floor() as usize;
    while m > 0 && m * m * m > n {
        m -= 1;
    }
    while (m + 1) * (m + 1) * (m + 1) <= n {
        m += 1;
    }
    m.min(n.saturating_sub(1))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Lag-`lag` autocovariance with `1/n` normalization; symmetric in the lag sign.
pub fn autocovariance(series: &[f64], lag: isize) -> Result<f64> {
    let n = series.len();
    let k = lag.unsigned_abs();
    if k >= n {
        return Err(Error::domain(format!(
            "lag {lag} out of range for series of length {n}"
        )));
    }
    let d_bar = mean(series);
    let s: f64 = series
        .iter()
        .zip(&series[k..])
        .map(|(a, b)| (a - d_bar) * (b - d_bar))
        .sum();
    Ok(s / n as f64)
}

/// Kernel-weighted sum of autocovariances over lags `−m..=m`.
pub fn long_run_variance(series: &[f64], m: usize, kernel: Kernel) -> Result<f64> {
    let n = series.len();
    if m >= n {
        return Err(Error::domain(format!("lag {m} must be below series length {n}")));
    }
    let mut lrv = autocovariance(series, 0)?;
    for i in 1..=m {
        lrv += 2.0 * kernel.weight(i, m) * autocovariance(series, i as isize)?;
    }
    let scale = series.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(lrv > DEGENERATE_REL * scale) {
        return Err(Error::DegenerateVariance(lrv));
    }
    Ok(lrv)
}

/// `(d̄ − μ) / sqrt(LRV / n)`.
pub fn dm_statistic(series: &[f64], mu: f64, m: usize, kernel: Kernel) -> Result<f64> {
    let lrv = long_run_variance(series, m, kernel)?;
    Ok((mean(series) - mu) / (lrv / series.len() as f64).sqrt())
}

/// `z_{α/2}` of the standard normal; exactly [`Z_CRIT_5PCT`] at α = 0.05.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("significance level {alpha} outside (0, 1)")));
    }
    if alpha == 0.05 {
        return Ok(Z_CRIT_5PCT);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - alpha / 2.0))
}

/// Closed-form set of `μ` not rejected at level `alpha`.
pub fn non_rejection_interval(series: &[f64], alpha: f64, m: usize, kernel: Kernel) -> Result<(f64, f64)> {
    let z = critical_value(alpha)?;
    let lrv = long_run_variance(series, m, kernel)?;
    let se = (lrv / series.len() as f64).sqrt();
    let d_bar = mean(series);
    Ok((d_bar - z * se, d_bar + z * se))
}

/// Non-rejection set found by scanning `μ` on the grid `k × step`.
///
/// Returns the smallest and largest grid points with `|DM| ≤ z`. Agrees with
/// [`non_rejection_interval`] to within one `step`.
pub fn non_rejection_interval_grid(
    series: &[f64],
    alpha: f64,
    m: usize,
    kernel: Kernel,
    step: f64,
) -> Result<(f64, f64)> {
    if !(step > 0.0) {
        return Err(Error::domain(format!("grid step must be positive, got {step}")));
    }
    let z = critical_value(alpha)?;
    let accepted = |mu: f64| -> Result<bool> { Ok(dm_statistic(series, mu, m, kernel)?.abs() <= z) };
    let centre = (mean(series) / step).round() as i64;
    if !accepted(centre as f64 * step)? {
        return Err(Error::domain("grid centre rejected; step too coarse"));
    }
    let mut lo = centre;
    while accepted((lo - 1) as f64 * step)? {
        lo -= 1;
    }
    let mut hi = centre;
    while accepted((hi + 1) as f64 * step)? {
        hi += 1;
    }
    Ok((lo as f64 * step, hi as f64 * step))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanDifferenceReport {
    pub method_i: MethodId,
    pub method_j: MethodId,
    pub n: usize,
    /// Mean of `E_i − E_j`, tCO₂.
    pub d_bar: f64,
    pub lag_m: usize,
    pub kernel: Kernel,
    pub long_run_variance: f64,
    pub std_error: f64,
    pub alpha: f64,
    pub interval: (f64, f64),
}

impl MeanDifferenceReport {
    /// Interval endpoints rounded to whole tCO₂.
    pub fn rounded_interval(&self) -> (i64, i64) {
        (self.interval.0.round() as i64, self.interval.1.round() as i64)
    }
}

/// Full report for one difference series. `lag` defaults to [`default_lag`].
pub fn mean_difference_report(
    diff: &DifferenceSeries,
    alpha: f64,
    lag: Option<usize>,
    kernel: Kernel,
) -> Result<MeanDifferenceReport> {
    report_from_values(diff.method_i, diff.method_j, &diff.values(), alpha, lag, kernel)
}

pub fn report_from_values(
    method_i: MethodId,
    method_j: MethodId,
    values: &[f64],
    alpha: f64,
    lag: Option<usize>,
    kernel: Kernel,
) -> Result<MeanDifferenceReport> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Alignment(format!(
            "{method_i} vs {method_j}: empty difference series"
        )));
    }
    let m = lag.unwrap_or_else(|| default_lag(n));
    let lrv = long_run_variance(values, m, kernel)?;
    let se = (lrv / n as f64).sqrt();
    let z = critical_value(alpha)?;
    let d_bar = mean(values);
    Ok(MeanDifferenceReport {
        method_i,
        method_j,
        n,
        d_bar,
        lag_m: m,
        kernel,
        long_run_variance: lrv,
        std_error: se,
        alpha,
        interval: (d_bar - z * se, d_bar + z * se),
    })
}

/// Outcome for one cell of the pairwise matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum PairCell {
    Interval(MeanDifferenceReport),
    Degenerate(String),
}

/// Lower-triangular layout: the cell in row `r`, column `c` (with `c`
/// listed before `r`) holds the interval for `E_c − E_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    pub methods: Vec<MethodId>,
    /// Keyed by `(row, column)`.
    pub cells: BTreeMap<(MethodId, MethodId), PairCell>,
}

impl IntervalMatrix {
    /// Number of cells below the diagonal.
    pub fn pair_count(&self) -> usize {
        let k = self.methods.len();
        k * k.saturating_sub(1) / 2
    }

    /// `(row, column)` pairs in display order.
    pub fn lower_pairs(&self) -> Vec<(MethodId, MethodId)> {
        let mut out = Vec::new();
        for (r, &row) in self.methods.iter().enumerate() {
            for &col in &self.methods[..r] {
                out.push((row, col));
            }
        }
        out
    }

    fn cell_text(&self, row: MethodId, col: MethodId) -> String {
        match self.cells.get(&(row, col)) {
            Some(PairCell::Interval(r)) => {
                let (lo, hi) = r.rounded_interval();
                format!("[{lo}, {hi}]")
            }
            Some(PairCell::Degenerate(_)) => "degenerate".to_string(),
            None => String::new(),
        }
    }

    /// Matrix CSV with a `-` diagonal and empty upper triangle.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.methods.iter().map(|m| m.to_string()));
        w.write_record(&header)?;
        for (r, &row) in self.methods.iter().enumerate() {
            let mut rec = vec![row.to_string()];
            for (c, &col) in self.methods.iter().enumerate() {
                rec.push(match c.cmp(&r) {
                    std::cmp::Ordering::Less => self.cell_text(row, col),
                    std::cmp::Ordering::Equal => "-".to_string(),
                    std::cmp::Ordering::Greater => String::new(),
                });
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv writer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .lower_pairs()
            .into_iter()
            .map(|(row, col)| match self.cells.get(&(row, col)) {
                Some(PairCell::Interval(r)) => {
                    let (lo, hi) = r.rounded_interval();
                    serde_json::json!({
                        "row": row, "column": col, "status": "ok",
                        "interval": [lo, hi],
                        "interval_unrounded": [r.interval.0, r.interval.1],
                        "d_bar": r.d_bar, "std_error": r.std_error,
                        "long_run_variance": r.long_run_variance,
                        "lag_m": r.lag_m, "n": r.n, "kernel": r.kernel,
                    })
                }
                Some(PairCell::Degenerate(msg)) => {
                    serde_json::json!({ "row": row, "column": col, "status": "degenerate", "message": msg })
                }
                None => serde_json::json!({ "row": row, "column": col, "status": "missing" }),
            })
            .collect();
        serde_json::json!({ "methods": self.methods, "cells": cells })
    }
}
