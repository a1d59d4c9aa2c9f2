//! Objective functions for the six estimators.
//!
//! Spectral objectives sum over every selected Fourier index, both signs of
//! `j` included. Likelihood-type objectives are returned in the "maximize"
//! sense; least squares is returned as a sum of squares (minimize).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Jonswap, WaveParams};
use crate::nonparam::{FrequencySelection, SpectralEstimate};
use crate::sampling::{QuadratureConfig, SampledModel, TimeSeries};

/// Which model density a spectral objective compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumForm {
    /// The continuous-time density `f(w)`.
    #[default]
    Continuous,
    /// The folded density `f_D(w)`.
    Aliased,
}

fn check_grid(est: &SpectralEstimate, sel: &FrequencySelection) -> Result<()> {
    if est.scheme != sel.scheme() {
        return Err(Error::config(format!(
            "selection grid (n = {}) does not match the estimate grid (n = {})",
            sel.scheme().n,
            est.scheme.n
        )));
    }
    Ok(())
}

fn model_for(
    theta: &WaveParams,
    est: &SpectralEstimate,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<SampledModel> {
    SampledModel::new(*theta, est.scheme, *quad, differenced)
}

/// Least squares distance `sum (f(w|theta) - Ibar(w))^2` over the selection.
pub fn objective_ls(
    theta: &WaveParams,
    estimate: &SpectralEstimate,
    selection: &FrequencySelection,
    form: SpectrumForm,
    differenced: bool,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_grid(estimate, selection)?;
    let model = model_for(theta, estimate, quad, differenced)?;
    Ok(least_squares(&model, estimate, selection, form))
}

/// Whittle likelihood `-sum {log f(w) + I(w) / f(w)}` with `f` the
/// continuous or folded density. Returns `-inf` when the model is not
/// strictly positive at a selected frequency.
pub fn objective_whittle(
    theta: &WaveParams,
    periodogram: &SpectralEstimate,
    selection: &FrequencySelection,
    form: SpectrumForm,
    differenced: bool,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_grid(periodogram, selection)?;
    let model = model_for(theta, periodogram, quad, differenced)?;
    Ok(whittle(&model, periodogram, selection, form))
}

/// De-biased Whittle likelihood, the Whittle form with the expected
/// periodogram in place of the model density.
pub fn objective_debiased_whittle(
    theta: &WaveParams,
    periodogram: &SpectralEstimate,
    selection: &FrequencySelection,
    differenced: bool,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_grid(periodogram, selection)?;
    let model = model_for(theta, periodogram, quad, differenced)?;
    Ok(debiased_whittle(&model, periodogram, selection))
}

/// Exact Gaussian log-likelihood of the mean-removed record under the
/// Toeplitz covariance built from the numerical autocovariance.
pub fn objective_gaussian_ml(theta: &WaveParams, x: &TimeSeries, quad: &QuadratureConfig) -> Result<f64> {
    let model = SampledModel::new(*theta, x.scheme(), *quad, false)?;
    let centred = x.demeaned();
    gaussian_loglik(&model.autocovariance().values, centred.values())
}

#[inline]
pub(crate) fn model_density(model: &SampledModel, kernel: &Jonswap, omega: f64, form: SpectrumForm) -> f64 {
    match form {
        SpectrumForm::Continuous => model.weight(omega) * kernel.density(omega.abs()),
        SpectrumForm::Aliased => model.aliased_unchecked(kernel, omega),
    }
}

#[inline]
fn model_density_gradient(
    model: &SampledModel,
    kernel: &Jonswap,
    omega: f64,
    form: SpectrumForm,
) -> (f64, [f64; 4]) {
    match form {
        SpectrumForm::Continuous => {
            let w = model.weight(omega);
            let (f, g) = kernel.density_gradient(omega.abs());
            (w * f, g.map(|v| w * v))
        }
        SpectrumForm::Aliased => model.aliased_with_gradient_unchecked(kernel, omega),
    }
}

pub(crate) fn least_squares(
    model: &SampledModel,
    est: &SpectralEstimate,
    sel: &FrequencySelection,
    form: SpectrumForm,
) -> f64 {
    let kernel = Jonswap::new(&model.theta);
    let scheme = est.scheme;
    sel.indices()
        .iter()
        .map(|&j| {
            let d = model_density(model, &kernel, scheme.omega(j), form) - est.at(j);
            d * d
        })
        .sum()
}

/// Sum of `log m + I / m`, negated; `-inf` for a non-positive model value.
fn whittle_sum(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut acc = 0.0;
    for (m, i) in pairs {
        if !(m > 0.0 && m.is_finite()) {
            return f64::NEG_INFINITY;
        }
        acc += m.ln() + i / m;
    }
    -acc
}

pub(crate) fn whittle(
    model: &SampledModel,
    est: &SpectralEstimate,
    sel: &FrequencySelection,
    form: SpectrumForm,
) -> f64 {
    let kernel = Jonswap::new(&model.theta);
    let scheme = est.scheme;
    whittle_sum(
        sel.indices()
            .iter()
            .map(|&j| (model_density(model, &kernel, scheme.omega(j), form), est.at(j))),
    )
}

pub(crate) fn debiased_whittle(model: &SampledModel, est: &SpectralEstimate, sel: &FrequencySelection) -> f64 {
    let ebar = model.expected_periodogram();
    let scheme = est.scheme;
    whittle_sum(
        sel.indices()
            .iter()
            .map(|&j| (ebar[scheme.position(j)], est.at(j))),
    )
}

/// Log-likelihood, score and Fisher information (minus the expected Hessian)
/// of a Whittle-type objective.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LikelihoodDerivatives {
    pub value: f64,
    pub score: [f64; 4],
    pub information: [[f64; 4]; 4],
}

fn accumulate(terms: impl Iterator<Item = (f64, [f64; 4], f64)>) -> Option<LikelihoodDerivatives> {
    let mut value = 0.0;
    let mut score = [0.0; 4];
    let mut info = [[0.0; 4]; 4];
    for (m, g, i) in terms {
        if !(m > 0.0 && m.is_finite()) {
            return None;
        }
        value -= m.ln() + i / m;
        let c = -(1.0 / m - i / (m * m));
        let inv_m2 = 1.0 / (m * m);
        for a in 0..4 {
            score[a] += c * g[a];
            for b in 0..=a {
                info[a][b] += inv_m2 * g[a] * g[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            info[b][a] = info[a][b];
        }
    }
    Some(LikelihoodDerivatives {
        value,
        score,
        information: info,
    })
}

pub(crate) fn whittle_derivatives(
    model: &SampledModel,
    est: &SpectralEstimate,
    sel: &FrequencySelection,
    form: SpectrumForm,
) -> Option<LikelihoodDerivatives> {
    let kernel = Jonswap::new(&model.theta);
    let scheme = est.scheme;
    accumulate(sel.indices().iter().map(|&j| {
        let (m, g) = model_density_gradient(model, &kernel, scheme.omega(j), form);
        (m, g, est.at(j))
    }))
}

pub(crate) fn debiased_whittle_derivatives(
    model: &SampledModel,
    est: &SpectralEstimate,
    sel: &FrequencySelection,
) -> Option<LikelihoodDerivatives> {
    let (ebar, grads) = model.expected_periodogram_with_gradient();
    let scheme = est.scheme;
    accumulate(sel.indices().iter().map(|&j| {
        let p = scheme.position(j);
        (ebar[p], [grads[0][p], grads[1][p], grads[2][p], grads[3][p]], est.at(j))
    }))
}

/// Gaussian log-likelihood via the Durbin-Levinson recursion, which
/// factorises the inverse of the Toeplitz covariance into unit triangular
/// and diagonal parts in O(n^2). On breakdown the variance is jittered by
/// `1e-10 c(0)` once before giving up.
pub(crate) fn gaussian_loglik(acf: &[f64], x: &[f64]) -> Result<f64> {
    if acf.len() < x.len() {
        return Err(Error::config("autocovariance shorter than the record"));
    }
    match durbin_levinson(acf, x, 0.0) {
        Some(v) => Ok(v),
        None => durbin_levinson(acf, x, 1e-10 * acf[0]).ok_or_else(|| {
            Error::numerical("Toeplitz covariance is not positive definite even after jitter")
        }),
    }
}

fn durbin_levinson(acf: &[f64], x: &[f64], jitter: f64) -> Option<f64> {
    let n = x.len();
    let c = |k: usize| if k == 0 { acf[0] + jitter } else { acf[k] };
    let mut v = c(0);
    if !(v > 0.0) {
        return None;
    }
    let mut log_det = v.ln();
    let mut quad = x[0] * x[0] / v;
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    for t in 1..n {
        // Order-t predictor coefficients phi[0..t] (phi[j-1] multiplies x_{t-j}).
        let mut num = c(t);
        for j in 1..t {
            num -= phi[j - 1] * c(t - j);
        }
        let kappa = num / v;
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return None;
        }
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 1..t {
            phi[j - 1] = prev[j - 1] - kappa * prev[t - j - 1];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        if !(v > 0.0) {
            return None;
        }
        let mut e = x[t];
        for j in 1..=t {
            e -= phi[j - 1] * x[t - j];
        }
        log_det += v.ln();
        quad += e * e / v;
    }
    let nf = n as f64;
    Some(-0.5 * (nf * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}
