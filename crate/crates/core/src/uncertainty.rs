//! Sampling covariance of the periodogram and sandwich standard errors for
//! de-biased Whittle estimates.

use nalgebra::Matrix4;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimation::{FitResult, MethodKind};
use crate::fft;
use crate::model::{WaveParams, PARAM_NAMES};
use crate::nonparam::FrequencySelection;
use crate::sampling::{QuadratureConfig, SampledModel, SamplingScheme};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// `Q(t) = h sum_j f_D(w_j) e^{i delta (n-1) w_j} e^{-i t delta w_j}` for
/// `t = 0..2n-1`, with `w_j = j h` and `h = 2 pi / (m delta)`, by one FFT.
///
/// `Q(t)` is the autocovariance at lag `n - 1 - t` written as a
/// Fourier sum, so its imaginary part vanishes up to rounding.
pub fn q_transform(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<Vec<Complex64>> {
    let model = SampledModel::new(*theta, *scheme, *quad, differenced)?;
    Ok(q_from_centered_grid(&model.folded_grid(), scheme, model.bin_width()))
}

/// `grid[i]` holds the density at `-pi/delta + i h`.
fn q_from_centered_grid(grid: &[f64], scheme: &SamplingScheme, h: f64) -> Vec<Complex64> {
    let m = grid.len();
    let half = m / 2;
    let shift = (scheme.n as f64 - 1.0) * scheme.delta * h;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let phase = Complex64::from_polar(1.0, shift * j as f64);
            phase * grid[(j + half) % m]
        })
        .collect();
    fft::forward_in_place(&mut buf);
    let len = (2 * scheme.n - 1).min(m);
    buf.truncate(len);
    for z in buf.iter_mut() {
        *z *= h;
    }
    buf
}

/// `|E[J(w_j) J(w_k)*]|^2` over the Fourier grid, where `J` is the scaled
/// discrete Fourier transform of the record.
///
/// For a real Gaussian process the full covariance of the periodogram is
/// `P(j, k) + P(j, -k)`, available as [`Self::full_cov`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodogramCovariance {
    scheme: SamplingScheme,
    /// Row-major in FFT order.
    values: Vec<f64>,
}

impl PeriodogramCovariance {
    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    #[inline]
    fn raw(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.scheme.n + b]
    }

    /// Entry for Fourier indices `j`, `k`.
    pub fn cov(&self, j: i64, k: i64) -> f64 {
        self.raw(self.scheme.fft_index(j), self.scheme.fft_index(k))
    }

    /// `cov(I(w_j), I(w_k))` for a real-valued process.
    pub fn full_cov(&self, j: i64, k: i64) -> f64 {
        let n = self.scheme.n;
        let a = self.scheme.fft_index(j);
        let b = self.scheme.fft_index(k);
        self.raw(a, b) + self.raw(a, (n - b) % n)
    }

    /// Dense matrix in ascending frequency order.
    pub fn to_natural(&self) -> Vec<Vec<f64>> {
        let (lo, hi) = self.scheme.index_range();
        (lo..=hi).map(|j| (lo..=hi).map(|k| self.cov(j, k)).collect()).collect()
    }
}

/// Covariance of the periodogram ordinates by a 2D FFT of the Hankel
/// matrix `T(r, s) = Q(r + s)`.
pub fn periodogram_covariance(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<PeriodogramCovariance> {
    let q = q_transform(theta, scheme, quad, differenced)?;
    Ok(covariance_from_q(&q, scheme))
}

fn covariance_from_q(q: &[Complex64], scheme: &SamplingScheme) -> PeriodogramCovariance {
    let n = scheme.n;
    let mut buf: Vec<Complex64> = Vec::with_capacity(n * n);
    for r in 0..n {
        buf.extend_from_slice(&q[r..r + n]);
    }
    if n > 1 {
        let plan = fft::forward(n);
        plan.process(&mut buf);
        transpose_square(&mut buf, n);
        plan.process(&mut buf);
    }
    // buf[k n + j] holds the transform at (j, k); T is symmetric, so is this.
    let scale = scheme.delta / (2.0 * std::f64::consts::PI * n as f64);
    let s2 = scale * scale;
    let mut values: Vec<f64> = buf.iter().map(|z| z.norm_sqr() * s2).collect();
    drop(buf);
    // Equal up to rounding; make the symmetry exact.
    for a in 0..n {
        for b in (a + 1)..n {
            let v = 0.5 * (values[a * n + b] + values[b * n + a]);
            values[a * n + b] = v;
            values[b * n + a] = v;
        }
    }
    PeriodogramCovariance { scheme: *scheme, values }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Correlation matrix `cov(j,k) / sqrt(cov(j,j) cov(k,k))` in ascending
/// frequency order.
pub fn correlation_matrix(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<Vec<Vec<f64>>> {
    let cov = periodogram_covariance(theta, scheme, quad, differenced)?;
    let (lo, hi) = scheme.index_range();
    let diag: Vec<f64> = (lo..=hi).map(|j| cov.cov(j, j).sqrt()).collect();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::numerical("periodogram variance vanishes at some frequency"));
    }
    Ok((lo..=hi)
        .zip(&diag)
        .map(|(j, dj)| {
            (lo..=hi)
                .zip(&diag)
                .map(|(k, dk)| if j == k { 1.0 } else { cov.cov(j, k) / (dj * dk) })
                .collect()
        })
        .collect())
}

/// Per-frequency weights `a_i(w) = (d fbar / d theta_i) / fbar^2` and the
/// expected periodogram over the selection.
struct ScoreWeights {
    fbar: Vec<f64>,
    grad: Vec<[f64; 4]>,
}

fn score_weights(model: &SampledModel, selection: &FrequencySelection) -> Result<ScoreWeights> {
    if selection.scheme() != model.scheme {
        return Err(Error::domain("selection grid does not match the model grid"));
    }
    let (ebar, grads) = model.expected_periodogram_with_gradient();
    let mut fbar = Vec::with_capacity(selection.len());
    let mut grad = Vec::with_capacity(selection.len());
    for &j in selection.indices() {
        let p = model.scheme.position(j);
        if !(ebar[p] > 0.0) {
            return Err(Error::numerical(format!(
                "expected periodogram is not positive at index {j}"
            )));
        }
        fbar.push(ebar[p]);
        grad.push([grads[0][p], grads[1][p], grads[2][p], grads[3][p]]);
    }
    Ok(ScoreWeights { fbar, grad })
}

/// `E[H] = -sum (1/fbar^2) grad fbar grad fbar^T` over the selection.
pub fn expected_hessian(
    theta: &WaveParams,
    selection: &FrequencySelection,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<[[f64; 4]; 4]> {
    let model = SampledModel::new(*theta, selection.scheme(), *quad, differenced)?;
    Ok(hessian_from(&score_weights(&model, selection)?))
}

fn hessian_from(w: &ScoreWeights) -> [[f64; 4]; 4] {
    let mut h = [[0.0; 4]; 4];
    for (f, g) in w.fbar.iter().zip(&w.grad) {
        let inv = 1.0 / (f * f);
        for a in 0..4 {
            for b in 0..=a {
                h[a][b] -= inv * g[a] * g[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            h[b][a] = h[a][b];
        }
    }
    h
}

/// `var(grad l_DW) = sum_j sum_k a(j) a(k)^T cov(I_j, I_k)` over the
/// selection, with the full real-process covariance `P(j,k) + P(j,-k)`.
pub fn score_variance(
    theta: &WaveParams,
    selection: &FrequencySelection,
    quad: &QuadratureConfig,
    differenced: bool,
    cov: &PeriodogramCovariance,
) -> Result<[[f64; 4]; 4]> {
    if cov.scheme() != selection.scheme() {
        return Err(Error::domain("covariance grid does not match the selection grid"));
    }
    let model = SampledModel::new(*theta, selection.scheme(), *quad, differenced)?;
    let w = score_weights(&model, selection)?;
    let a: Vec<[f64; 4]> = w
        .fbar
        .iter()
        .zip(&w.grad)
        .map(|(f, g)| g.map(|v| v / (f * f)))
        .collect();
    Ok(weighted_covariance(&a, selection.indices(), |j, k| cov.full_cov(j, k)))
}

/// `sum_j sum_k a_j a_k^T c(j, k)`.
fn weighted_covariance(a: &[[f64; 4]], idx: &[i64], c: impl Fn(i64, i64) -> f64) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (p, &j) in idx.iter().enumerate() {
        let mut row = [0.0; 4];
        for (q, &k) in idx.iter().enumerate() {
            let cjk = c(j, k);
            for i in 0..4 {
                row[i] += cjk * a[q][i];
            }
        }
        for i in 0..4 {
            for l in 0..4 {
                out[i][l] += a[p][i] * row[l];
            }
        }
    }
    symmetrize(out)
}

fn symmetrize(m: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (m[i][j] + m[j][i])))
}

/// The three matrices of the sandwich `E[H]^-1 var(score) E[H]^-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichVariance {
    pub hessian_expect: [[f64; 4]; 4],
    pub score_var: [[f64; 4]; 4],
    pub var_theta: [[f64; 4]; 4],
    /// The expected Hessian was singular and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// Sandwich variance of the de-biased Whittle estimator at `theta`.
pub fn sandwich_variance(
    theta: &WaveParams,
    selection: &FrequencySelection,
    quad: &QuadratureConfig,
    differenced: bool,
) -> Result<SandwichVariance> {
    let scheme = selection.scheme();
    let model = SampledModel::new(*theta, scheme, *quad, differenced)?;
    let w = score_weights(&model, selection)?;
    let hessian = hessian_from(&w);
    let cov = periodogram_covariance(theta, &scheme, quad, differenced)?;
    let a: Vec<[f64; 4]> = w
        .fbar
        .iter()
        .zip(&w.grad)
        .map(|(f, g)| g.map(|v| v / (f * f)))
        .collect();
    let score_var = weighted_covariance(&a, selection.indices(), |j, k| cov.full_cov(j, k));
    Ok(combine(hessian, score_var))
}

/// Assembles the sandwich from its two pieces.
pub fn combine(hessian: [[f64; 4]; 4], score_var: [[f64; 4]; 4]) -> SandwichVariance {
    let h = Matrix4::from_fn(|i, j| hessian[i][j]);
    let v = Matrix4::from_fn(|i, j| score_var[i][j]);
    let (h_inv, pseudo_inverse) = invert_negative_definite(&h);
    let s = h_inv * v * h_inv;
    let var_theta = symmetrize(std::array::from_fn(|i| std::array::from_fn(|j| s[(i, j)])));
    SandwichVariance {
        hessian_expect: symmetrize(hessian),
        score_var,
        var_theta,
        pseudo_inverse,
    }
}

fn invert_negative_definite(h: &Matrix4<f64>) -> (Matrix4<f64>, bool) {
    let neg = -h;
    let eig = neg.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 && min > 1e-12 * max {
        if let Some(ch) = neg.cholesky() {
            return (-ch.inverse(), false);
        }
    }
    let pinv = h
        .pseudo_inverse(1e-12 * max.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| Matrix4::zeros());
    (pinv, true)
}

/// A normal-theory interval clipped to the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub parameter: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    /// Whether the lower end was raised to the parameter-space boundary.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub level: f64,
    pub z: f64,
    pub variance: SandwichVariance,
    pub intervals: Vec<ConfidenceInterval>,
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level {level} must lie in (0, 1)")));
    }
    if level == 0.95 {
        return Ok(Z_95);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Lower edges of the parameter space: `alpha, omega_p > 0`, `gamma >= 1`, `r > 1`.
pub const PARAMETER_FLOORS: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

/// Intervals `theta_i +- z sqrt(var_ii)`, lower ends clipped to the
/// parameter space.
pub fn intervals(theta: &WaveParams, var_theta: &[[f64; 4]; 4], z: f64) -> Vec<ConfidenceInterval> {
    let est = theta.free();
    (0..4)
        .map(|i| {
            let se = var_theta[i][i].max(0.0).sqrt();
            let raw_lo = est[i] - z * se;
            let lower = raw_lo.max(PARAMETER_FLOORS[i]);
            ConfidenceInterval {
                parameter: PARAM_NAMES[i].to_string(),
                estimate: est[i],
                std_error: se,
                lower,
                upper: est[i] + z * se,
                clipped: lower > raw_lo,
            }
        })
        .collect()
}

/// Sandwich variance at the fitted parameters and clipped intervals.
/// Only de-biased Whittle fits are supported.
pub fn estimator_variance_and_ci(fit: &FitResult, level: f64) -> Result<UncertaintyReport> {
    if fit.method.kind != MethodKind::DebiasedWhittle {
        return Err(Error::config(format!(
            "standard errors are available for debiased_whittle fits, not {}",
            fit.method.kind
        )));
    }
    let z = normal_quantile(level)?;
    let variance = sandwich_variance(&fit.theta_hat, &fit.selection, &fit.quadrature, fit.method.differenced)?;
    Ok(UncertaintyReport {
        level,
        z,
        intervals: intervals(&fit.theta_hat, &variance.var_theta, z),
        variance,
    })
}
