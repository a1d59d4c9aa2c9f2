//! Starting values from the periodogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Jonswap, WaveParams};
use crate::nonparam::{periodogram, FrequencySelection, SpectralEstimate};
use crate::sampling::TimeSeries;

/// Tail exponent used when the tail has fewer than two usable points.
pub const FALLBACK_TAIL_EXPONENT: f64 = 4.5;
/// Starting peak enhancement.
pub const INITIAL_GAMMA: f64 = 3.0;

const R_FLOOR: f64 = 1.5;
const R_CEIL: f64 = 20.0;

/// Starting parameters and whether the tail regression fell back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Initialization {
    pub theta: WaveParams,
    pub tail_fallback: bool,
}

/// Heuristic starting point from the record's periodogram.
pub fn initialize(x: &TimeSeries, selection: &FrequencySelection) -> Result<Initialization> {
    let selection = selection.rebase(x.scheme())?;
    initialize_from_estimate(&periodogram(x)?, &selection)
}

/// Starting point from a given spectral estimate:
///
/// * `omega_p`: the selected positive frequency with the largest estimate
///   (the lowest one on ties);
/// * `r`: minus the least-squares slope of `log I` on `log w` over selected
///   frequencies above the midpoint between the peak and Nyquist;
/// * `gamma = 3`;
/// * `alpha`: matches the rectangle-rule areas of the estimate and the
///   `alpha = 1` density over the selection.
pub fn initialize_from_estimate(est: &SpectralEstimate, selection: &FrequencySelection) -> Result<Initialization> {
    if est.scheme != selection.scheme() {
        return Err(Error::config("selection grid does not match the spectral estimate"));
    }
    let scheme = est.scheme;
    let positive: Vec<i64> = selection.positive().collect();
    if positive.is_empty() {
        return Err(Error::config("selection has no positive frequencies"));
    }

    let mut peak = positive[0];
    for &j in &positive[1..] {
        if est.at(j) > est.at(peak) {
            peak = j;
        }
    }
    let omega_p = scheme.omega(peak);

    let cut = 0.5 * (omega_p + scheme.nyquist());
    let tail: Vec<(f64, f64)> = positive
        .iter()
        .filter(|&&j| scheme.omega(j) > cut && est.at(j) > 0.0)
        .map(|&j| (scheme.omega(j).ln(), est.at(j).ln()))
        .collect();
    let (r, tail_fallback) = match slope(&tail) {
        Some(b) if b.is_finite() => ((-b).clamp(R_FLOOR, R_CEIL), false),
        _ => (FALLBACK_TAIL_EXPONENT, true),
    };

    let shape = WaveParams::new_unchecked(1.0, omega_p, INITIAL_GAMMA, r);
    let kernel = Jonswap::new(&shape);
    let (mut area_est, mut area_model) = (0.0, 0.0);
    for &j in &positive {
        area_est += est.at(j);
        area_model += kernel.density(scheme.omega(j));
    }
    let alpha = area_est / area_model;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::numerical(format!(
            "cannot scale the initial spectrum (estimate area {area_est}, model area {area_model})"
        )));
    }
    Ok(Initialization {
        theta: WaveParams::new(alpha, omega_p, INITIAL_GAMMA, r)?,
        tail_fallback,
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
