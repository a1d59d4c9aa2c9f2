//! Goodness-of-fit checks against the expected periodogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WaveParams;
use crate::nonparam::{FrequencySelection, SpectralEstimate};
use crate::sampling::{QuadratureConfig, SampledModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    /// Sorted ratio `I / fbar`.
    pub empirical: f64,
    /// `-log(1 - p)` at plotting position `p = (i - 0.5) / n`.
    pub exponential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqTable {
    pub rows: Vec<QqRow>,
    /// Kolmogorov-Smirnov distance between the ratios and Exp(1).
    pub ks_statistic: f64,
}

impl QqTable {
    pub fn mean_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.empirical).sum::<f64>() / self.rows.len() as f64
    }
}

/// Ratios `I(w) / fbar(w | theta)` over the selected positive frequencies
/// (negative frequencies repeat them), sorted and paired with Exp(1)
/// quantiles.
pub fn qq_ratios(
    periodogram: &SpectralEstimate,
    theta: &WaveParams,
    selection: &FrequencySelection,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<QqTable> {
    let ratios = ratios(periodogram, theta, selection, quad, differenced)?;
    Ok(qq_table(ratios))
}

fn ratios(
    periodogram: &SpectralEstimate,
    theta: &WaveParams,
    selection: &FrequencySelection,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<Vec<f64>> {
    if periodogram.scheme != selection.scheme() {
        return Err(Error::config("selection grid does not match the periodogram"));
    }
    let model = SampledModel::new(*theta, periodogram.scheme, *quad, differenced)?;
    let ebar = model.expected_periodogram();
    let scheme = periodogram.scheme;
    let out: Vec<f64> = selection
        .positive()
        .map(|j| {
            let f = ebar[scheme.position(j)];
            if f > 0.0 {
                Ok(periodogram.at(j) / f)
            } else {
                Err(Error::numerical(format!(
                    "expected periodogram is zero at w = {}; exclude it from the selection",
                    scheme.omega(j)
                )))
            }
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::config("selection has no positive frequencies"));
    }
    Ok(out)
}

pub(crate) fn qq_table(mut ratios: Vec<f64>) -> QqTable {
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len() as f64;
    let rows = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| QqRow {
            empirical: r,
            exponential: -(1.0 - (i as f64 + 0.5) / n).ln(),
        })
        .collect();
    QqTable {
        rows,
        ks_statistic: ks_exponential(&ratios),
    }
}

/// `sup |F_n(x) - (1 - e^{-x})|` for sorted data.
fn ks_exponential(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x.max(0.0)).exp();
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Periodogram next to the expected periodogram, linear and in decibels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub omega: f64,
    pub periodogram: f64,
    pub expected: f64,
    pub periodogram_db: f64,
    pub expected_db: f64,
}

/// Rows for every non-negative Fourier frequency.
pub fn overlay(
    periodogram: &SpectralEstimate,
    theta: &WaveParams,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<Vec<OverlayRow>> {
    let scheme = periodogram.scheme;
    let ebar = SampledModel::new(*theta, scheme, *quad, differenced)?.expected_periodogram();
    let (_, hi) = scheme.index_range();
    let db = |v: f64| 10.0 * v.log10();
    Ok((0..=hi)
        .map(|j| {
            let p = scheme.position(j);
            OverlayRow {
                omega: scheme.omega(j),
                periodogram: periodogram.values[p],
                expected: ebar[p],
                periodogram_db: db(periodogram.values[p]),
                expected_db: db(ebar[p]),
            }
        })
        .collect())
}
