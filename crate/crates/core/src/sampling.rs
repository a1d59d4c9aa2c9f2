//! From a continuous-time spectrum to a finite regularly sampled record.
//!
//! The aliased spectrum is approximated by a truncated fold
//! `f_D(w) ~ sum_{k=-K}^{K} f(w + 2 pi k / D)`, the autocovariance by a
//! left-endpoint Riemann sum of `f_D(w) e^{i w tau D}` over `[-pi/D, pi/D)`
//! with `M` bins (one FFT), and the expected periodogram by a triangle-weighted
//! transform of the first `N` lags (another FFT). Gradients in the parameters
//! follow the same path, term by term.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::model::{Jonswap, WaveParams};

/// Density cutoff (m^2 s / rad) used to pick the number of folds.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;
/// Smallest Riemann grid used for the autocovariance.
pub const MIN_GRID_SIZE: usize = 8192;
/// Cap on the fold count when the tail decays too slowly to reach the cutoff.
pub const MAX_FOLDS: usize = 512;

/// Sampling interval `delta` (seconds) and record length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub delta: f64,
    pub n: usize,
}

impl SamplingScheme {
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::domain(format!("sampling interval must be > 0, got {delta}")));
        }
        if n == 0 {
            return Err(Error::domain("record length must be at least 1"));
        }
        Ok(SamplingScheme { delta, n })
    }

    /// Scheme for a record of `seconds` duration, `n = round(seconds / delta)`.
    pub fn from_duration(delta: f64, seconds: f64) -> Result<Self> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::config(format!("duration must be > 0, got {seconds}")));
        }
        let n = (seconds / delta).round();
        if n < 1.0 {
            return Err(Error::config("duration shorter than one sample"));
        }
        Self::new(delta, n as usize)
    }

    /// Nyquist frequency `pi / delta` in rad/s.
    pub fn nyquist(&self) -> f64 {
        PI / self.delta
    }

    /// Smallest and largest Fourier index, `-ceil(n/2) + 1` and `floor(n/2)`.
    pub fn index_range(&self) -> (i64, i64) {
        let n = self.n as i64;
        (-((n + 1) / 2) + 1, n / 2)
    }

    /// Angular frequency `2 pi j / (n delta)` of Fourier index `j`.
    pub fn omega(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / (self.n as f64 * self.delta)
    }

    /// Position of Fourier index `j` in ascending-frequency arrays.
    pub fn position(&self, j: i64) -> usize {
        (j - self.index_range().0) as usize
    }

    /// Position of Fourier index `j` in FFT output order.
    pub fn fft_index(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }

    /// True when `j` is the Nyquist index (only exists for even `n`).
    pub fn is_nyquist(&self, j: i64) -> bool {
        self.n % 2 == 0 && j == (self.n / 2) as i64
    }

    /// Reorders an FFT-ordered array into ascending frequency order.
    pub(crate) fn fft_to_natural(&self, fft_order: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.index_range();
        (lo..=hi).map(|j| fft_order[self.fft_index(j)]).collect()
    }
}

/// A regularly sampled record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    scheme: SamplingScheme,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("time series is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("time series contains non-finite values"));
        }
        let scheme = SamplingScheme::new(delta, values.len())?;
        Ok(TimeSeries { values, scheme })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn delta(&self) -> f64 {
        self.scheme.delta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Copy with the sample mean subtracted.
    pub fn demeaned(&self) -> TimeSeries {
        let m = self.mean();
        TimeSeries {
            values: self.values.iter().map(|v| v - m).collect(),
            scheme: self.scheme,
        }
    }

    /// Copy with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> TimeSeries {
        TimeSeries {
            values: self.values.iter().map(|v| v * k).collect(),
            scheme: self.scheme,
        }
    }
}

/// Numerical settings for the aliasing fold and the autocovariance quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Riemann grid size over one Nyquist band; must be even and at least `2n`.
    pub m: usize,
    /// Folds on each side of the principal band.
    pub k_folds: usize,
    /// Cutoff used to choose `k_folds`.
    pub tail_threshold: f64,
}

impl QuadratureConfig {
    pub fn new(m: usize, k_folds: usize, tail_threshold: f64) -> Self {
        QuadratureConfig {
            m,
            k_folds,
            tail_threshold,
        }
    }

    /// Defaults: `m = max(8192, 2n)` and the smallest `K` whose first
    /// excluded frequency `(2K+1) pi / delta` has density below 1e-6.
    pub fn for_model(theta: &WaveParams, scheme: &SamplingScheme) -> Self {
        QuadratureConfig {
            m: default_grid_size(scheme.n),
            k_folds: folds_for_threshold(theta, scheme.delta, DEFAULT_TAIL_THRESHOLD),
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }

    pub(crate) fn check(&self, scheme: &SamplingScheme) -> Result<()> {
        if self.m < 2 * scheme.n {
            return Err(Error::config(format!(
                "quadrature grid M = {} is smaller than 2N = {}",
                self.m,
                2 * scheme.n
            )));
        }
        if self.m % 2 != 0 {
            return Err(Error::config(format!("quadrature grid M = {} must be even", self.m)));
        }
        Ok(())
    }
}

/// `max(8192, 2n)`, rounded up to even.
pub fn default_grid_size(n: usize) -> usize {
    MIN_GRID_SIZE.max(2 * n)
}

/// Smallest `K` such that the density at `(2K+1) pi / delta` lies below
/// `threshold` (and past the peak), capped at [`MAX_FOLDS`].
pub fn folds_for_threshold(theta: &WaveParams, delta: f64, threshold: f64) -> usize {
    let kernel = Jonswap::new(theta);
    (0..MAX_FOLDS)
        .find(|&k| {
            let w = (2 * k + 1) as f64 * PI / delta;
            w > kernel.omega_p() && kernel.density(w) < threshold
        })
        .unwrap_or(MAX_FOLDS)
}

/// Partially specified quadrature settings; missing entries take defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOverrides {
    pub m: Option<usize>,
    pub k_folds: Option<usize>,
    pub tail_threshold: Option<f64>,
}

impl QuadratureOverrides {
    pub fn resolve(&self, theta: &WaveParams, scheme: &SamplingScheme) -> Result<QuadratureConfig> {
        let threshold = self.tail_threshold.unwrap_or(DEFAULT_TAIL_THRESHOLD);
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::config("tail threshold must be > 0"));
        }
        let q = QuadratureConfig {
            m: self.m.unwrap_or_else(|| default_grid_size(scheme.n)),
            k_folds: self
                .k_folds
                .unwrap_or_else(|| folds_for_threshold(theta, scheme.delta, threshold)),
            tail_threshold: threshold,
        };
        q.check(scheme)?;
        Ok(q)
    }
}

/// Autocovariance at lags `0, delta, ..., (n-1) delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfSequence {
    pub values: Vec<f64>,
    pub scheme: SamplingScheme,
}

impl AcfSequence {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        let scheme = SamplingScheme::new(delta, values.len())?;
        Ok(AcfSequence { values, scheme })
    }
}

/// The multiplier `4 sin^2(w delta / 2)` taking a spectrum to that of the
/// first difference `X_{t+delta} - X_t`.
pub fn differencing_factor(omega: f64, delta: f64) -> f64 {
    let s = (0.5 * omega * delta).sin();
    4.0 * s * s
}

/// Spectrum of the differenced continuous-time model, `4 sin^2(w D/2) f(w)`.
pub fn differenced_spectrum(omega: f64, theta: &WaveParams, delta: f64) -> Result<f64> {
    Ok(differencing_factor(omega, delta) * crate::model::eval_spectrum(omega, theta)?)
}

/// First differences `y_t = x_{t+1} - x_t`, length `n - 1`.
pub fn difference_series(x: &TimeSeries) -> Result<TimeSeries> {
    if x.len() < 2 {
        return Err(Error::domain("differencing needs at least two samples"));
    }
    let values = x.values().windows(2).map(|w| w[1] - w[0]).collect();
    TimeSeries::new(values, x.delta())
}

/// A spectral model tied to a sampling scheme and quadrature settings.
///
/// With `differenced` set, every quantity refers to the first-differenced
/// process: each fold term is multiplied by `4 sin^2(w delta / 2)` at its own
/// frequency, and `scheme.n` is the length of the differenced record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledModel {
    pub theta: WaveParams,
    pub scheme: SamplingScheme,
    pub quad: QuadratureConfig,
    pub differenced: bool,
}

impl SampledModel {
    pub fn new(
        theta: WaveParams,
        scheme: SamplingScheme,
        quad: QuadratureConfig,
        differenced: bool,
    ) -> Result<Self> {
        theta.validate()?;
        quad.check(&scheme)?;
        Ok(SampledModel {
            theta,
            scheme,
            quad,
            differenced,
        })
    }

    /// Same model with default quadrature.
    pub fn with_default_quadrature(theta: WaveParams, scheme: SamplingScheme, differenced: bool) -> Result<Self> {
        let quad = QuadratureConfig::for_model(&theta, &scheme);
        Self::new(theta, scheme, quad, differenced)
    }

    /// Same sampling and quadrature, different parameters. Parameters are
    /// not re-validated; optimizers keep them inside the box.
    pub(crate) fn at(&self, theta: WaveParams) -> SampledModel {
        SampledModel { theta, ..*self }
    }

    fn check_band(&self, omega: f64) -> Result<()> {
        let nyq = self.scheme.nyquist();
        if !omega.is_finite() || omega.abs() > nyq * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "frequency {omega} outside the Nyquist band [-{nyq}, {nyq}]"
            )));
        }
        Ok(())
    }

    pub(crate) fn weight(&self, omega: f64) -> f64 {
        if self.differenced {
            differencing_factor(omega, self.scheme.delta)
        } else {
            1.0
        }
    }

    /// Truncated fold `sum_{k=-K}^{K} f(w + 2 pi k / delta)`.
    pub fn aliased_spectrum(&self, omega: f64) -> Result<f64> {
        self.check_band(omega)?;
        Ok(self.aliased_unchecked(&Jonswap::new(&self.theta), omega))
    }

    pub(crate) fn aliased_unchecked(&self, kernel: &Jonswap, omega: f64) -> f64 {
        let period = 2.0 * PI / self.scheme.delta;
        let k = self.quad.k_folds as i64;
        let mut acc = 0.0;
        for i in -k..=k {
            let w = omega + i as f64 * period;
            acc += self.weight(w) * kernel.density(w.abs());
        }
        acc
    }

    /// Parameter gradient of [`Self::aliased_spectrum`], summed over the same folds.
    pub fn aliased_spectrum_gradient(&self, omega: f64) -> Result<[f64; 4]> {
        self.check_band(omega)?;
        Ok(self.aliased_with_gradient_unchecked(&Jonswap::new(&self.theta), omega).1)
    }

    pub(crate) fn aliased_with_gradient_unchecked(&self, kernel: &Jonswap, omega: f64) -> (f64, [f64; 4]) {
        let period = 2.0 * PI / self.scheme.delta;
        let k = self.quad.k_folds as i64;
        let mut acc = 0.0;
        let mut grad = [0.0; 4];
        for i in -k..=k {
            let w = omega + i as f64 * period;
            let wt = self.weight(w);
            let (f, g) = kernel.density_gradient(w.abs());
            acc += wt * f;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += wt * b;
            }
        }
        (acc, grad)
    }

    /// Riemann bin width `2 pi / (m delta)`.
    pub(crate) fn bin_width(&self) -> f64 {
        2.0 * PI / (self.quad.m as f64 * self.scheme.delta)
    }

    /// Aliased spectrum on the grid `w_j = -pi/delta + j h`, `j = 0..m`.
    pub(crate) fn folded_grid(&self) -> Vec<f64> {
        let kernel = Jonswap::new(&self.theta);
        let m = self.quad.m;
        let half = m / 2;
        let h = self.bin_width();
        let imax = half + self.quad.k_folds * m;
        let table: Vec<f64> = (0..=imax)
            .map(|i| {
                let w = i as f64 * h;
                kernel.density(w)
            })
            .collect();
        let mut out = vec![0.0; m];
        for j in 0..=half {
            let base = j as i64 - half as i64;
            let mut acc = 0.0;
            for k in -(self.quad.k_folds as i64)..=self.quad.k_folds as i64 {
                acc += table[(base + k * m as i64).unsigned_abs() as usize];
            }
            out[j] = acc;
        }
        self.finish_grid(&mut out);
        out
    }

    /// Value and gradient grids, `[f, df/dalpha, df/domega_p, df/dgamma, df/dr]`.
    pub(crate) fn folded_grid_with_gradient(&self) -> [Vec<f64>; 5] {
        let kernel = Jonswap::new(&self.theta);
        let m = self.quad.m;
        let half = m / 2;
        let h = self.bin_width();
        let imax = half + self.quad.k_folds * m;
        let table: Vec<(f64, [f64; 4])> = (0..=imax)
            .map(|i| kernel.density_gradient(i as f64 * h))
            .collect();
        let mut out: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; m]);
        for j in 0..=half {
            let base = j as i64 - half as i64;
            let mut acc = [0.0; 5];
            for k in -(self.quad.k_folds as i64)..=self.quad.k_folds as i64 {
                let (f, g) = table[(base + k * m as i64).unsigned_abs() as usize];
                acc[0] += f;
                for c in 0..4 {
                    acc[c + 1] += g[c];
                }
            }
            for c in 0..5 {
                out[c][j] = acc[c];
            }
        }
        for grid in out.iter_mut() {
            self.finish_grid(grid);
        }
        out
    }

    /// Applies the differencing weight to `0..=m/2` and mirrors onto the
    /// negative half (`w_{m-j} = -w_j`).
    fn finish_grid(&self, grid: &mut [f64]) {
        let m = grid.len();
        let half = m / 2;
        if self.differenced {
            // 4 sin^2 is 2 pi / delta periodic, so it factors out of the fold.
            let h = self.bin_width();
            for (j, v) in grid.iter_mut().enumerate().take(half + 1) {
                let w = -self.scheme.nyquist() + j as f64 * h;
                *v *= differencing_factor(w, self.scheme.delta);
            }
        }
        for j in 1..half {
            grid[m - j] = grid[j];
        }
    }

    /// Lags `0..n` of `h sum_j g_j e^{i w_j tau delta}` for two real
    /// symmetric grids at once (the transform of each is real).
    fn grid_to_lags_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let m = a.len();
        let mut buf: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        fft::inverse_in_place(&mut buf);
        let h = self.bin_width();
        let n = self.scheme.n;
        let mut ra = Vec::with_capacity(n);
        let mut rb = Vec::with_capacity(n);
        for (tau, z) in buf.iter().take(n.min(m)).enumerate() {
            // e^{i w_j tau delta} = (-1)^tau e^{2 pi i j tau / m}
            let sign = if tau % 2 == 0 { h } else { -h };
            ra.push(sign * z.re);
            rb.push(sign * z.im);
        }
        (ra, rb)
    }

    /// Numerical autocovariance of the sampled process.
    pub fn autocovariance(&self) -> AcfSequence {
        let grid = self.folded_grid();
        let (values, _) = self.grid_to_lags_pair(&grid, None);
        AcfSequence {
            values,
            scheme: self.scheme,
        }
    }

    /// Autocovariance and its four parameter derivatives.
    pub fn autocovariance_with_gradient(&self) -> (AcfSequence, [AcfSequence; 4]) {
        let grids = self.folded_grid_with_gradient();
        let (c, d_alpha) = self.grid_to_lags_pair(&grids[0], Some(&grids[1]));
        let (d_wp, d_gamma) = self.grid_to_lags_pair(&grids[2], Some(&grids[3]));
        let (d_r, _) = self.grid_to_lags_pair(&grids[4], None);
        let wrap = |values| AcfSequence {
            values,
            scheme: self.scheme,
        };
        (wrap(c), [wrap(d_alpha), wrap(d_wp), wrap(d_gamma), wrap(d_r)])
    }

    pub fn autocovariance_gradient(&self) -> [AcfSequence; 4] {
        self.autocovariance_with_gradient().1
    }

    /// Expected periodogram over the Fourier grid, ascending frequency order.
    pub fn expected_periodogram(&self) -> Vec<f64> {
        expected_periodogram_unchecked(&self.autocovariance())
    }

    /// Expected periodogram and its parameter derivatives, ascending order.
    pub fn expected_periodogram_with_gradient(&self) -> (Vec<f64>, [Vec<f64>; 4]) {
        let (acf, grads) = self.autocovariance_with_gradient();
        (
            expected_periodogram_unchecked(&acf),
            grads.map(|g| expected_periodogram_unchecked(&g)),
        )
    }
}

/// Free-function form of [`SampledModel::aliased_spectrum`].
pub fn aliased_spectrum(
    omega: f64,
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
) -> Result<f64> {
    SampledModel::new(*theta, *scheme, *quad, false)?.aliased_spectrum(omega)
}

/// Free-function form of [`SampledModel::aliased_spectrum_gradient`].
pub fn aliased_spectrum_gradient(
    omega: f64,
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
) -> Result<[f64; 4]> {
    SampledModel::new(*theta, *scheme, *quad, false)?.aliased_spectrum_gradient(omega)
}

/// Free-function form of [`SampledModel::autocovariance`].
pub fn approx_autocovariance(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
) -> Result<AcfSequence> {
    Ok(SampledModel::new(*theta, *scheme, *quad, false)?.autocovariance())
}

/// Free-function form of [`SampledModel::autocovariance_gradient`].
pub fn approx_autocovariance_gradient(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
) -> Result<[AcfSequence; 4]> {
    Ok(SampledModel::new(*theta, *scheme, *quad, false)?.autocovariance_gradient())
}

/// Expected periodogram
/// `(1/2pi) Re(2 delta sum_tau (1 - tau/n) c(tau) e^{-i w tau delta} - delta c(0))`
/// at every Fourier frequency, ascending order.
pub fn expected_periodogram(acf: &AcfSequence) -> Result<Vec<f64>> {
    if acf.values.is_empty() {
        return Err(Error::domain("autocovariance sequence is empty"));
    }
    Ok(expected_periodogram_unchecked(acf))
}

/// Applies [`expected_periodogram`] to each derivative sequence.
pub fn expected_periodogram_gradient(grads: &[AcfSequence; 4]) -> Result<[Vec<f64>; 4]> {
    if grads.iter().any(|g| g.values.is_empty()) {
        return Err(Error::domain("autocovariance sequence is empty"));
    }
    Ok(std::array::from_fn(|i| expected_periodogram_unchecked(&grads[i])))
}

fn expected_periodogram_unchecked(acf: &AcfSequence) -> Vec<f64> {
    let n = acf.values.len();
    let nf = n as f64;
    let mut buf: Vec<Complex64> = acf
        .values
        .iter()
        .enumerate()
        .map(|(tau, &c)| Complex64::new((1.0 - tau as f64 / nf) * c, 0.0))
        .collect();
    fft::forward_in_place(&mut buf);
    let delta = acf.scheme.delta;
    let c0 = acf.values[0];
    let fft_order: Vec<f64> = buf
        .iter()
        .map(|z| delta / (2.0 * PI) * (2.0 * z.re - c0))
        .collect();
    let scheme = SamplingScheme { delta, n };
    scheme.fft_to_natural(&fft_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_spectrum;

    const DELTA: f64 = 0.78125;

    fn canon_model(n: usize) -> SampledModel {
        let scheme = SamplingScheme::new(DELTA, n).unwrap();
        SampledModel::with_default_quadrature(WaveParams::canonical(), scheme, false).unwrap()
    }

    #[test]
    fn fourier_index_bookkeeping() {
        let s = SamplingScheme::new(1.0, 4).unwrap();
        assert_eq!(s.index_range(), (-1, 2));
        assert_eq!(s.fft_index(-1), 3);
        assert_eq!(s.position(-1), 0);
        let s = SamplingScheme::new(1.0, 5).unwrap();
        assert_eq!(s.index_range(), (-2, 2));
        assert!(!s.is_nyquist(2));
    }

    #[test]
    fn default_folds_for_canonical() {
        let q = canon_model(2304).quad;
        assert_eq!(q.m, 8192);
        // f(7 pi / delta) < 1e-6 <= f(5 pi / delta)
        assert_eq!(q.k_folds, 3);
        let theta = WaveParams::canonical();
        assert!(eval_spectrum(7.0 * PI / DELTA, &theta).unwrap() < 1e-6);
        assert!(eval_spectrum(5.0 * PI / DELTA, &theta).unwrap() >= 1e-6);
    }

    #[test]
    fn zero_folds_is_the_spectrum() {
        let scheme = SamplingScheme::new(DELTA, 64).unwrap();
        let quad = QuadratureConfig::new(8192, 0, 1e-6);
        let theta = WaveParams::canonical();
        for &w in &[0.0, 0.3, 0.7, 2.5, -3.0] {
            let a = aliased_spectrum(w, &theta, &scheme, &quad).unwrap();
            assert_eq!(a, eval_spectrum(w, &theta).unwrap());
        }
        assert_eq!(aliased_spectrum_gradient(0.0, &theta, &scheme, &quad).unwrap(), [0.0; 4]);
    }

    #[test]
    fn aliased_positive_at_zero() {
        let m = canon_model(128);
        assert!(m.aliased_spectrum(0.0).unwrap() > 0.0);
    }

    #[test]
    fn aliased_matches_wider_fold() {
        let m = canon_model(128);
        let wide = SampledModel {
            quad: QuadratureConfig::new(m.quad.m, 10 * m.quad.k_folds, 1e-6),
            ..m
        };
        let a = m.aliased_spectrum(0.7).unwrap();
        let b = wide.aliased_spectrum(0.7).unwrap();
        // The gap is exactly the folds K < |k| <= 10K, about 1.3e-6 here:
        // the threshold bounds the first omitted term, not the whole tail.
        let period = 2.0 * PI / m.scheme.delta;
        let k = m.quad.k_folds as i64;
        let omitted: f64 = (k + 1..=10 * k)
            .flat_map(|i| [i, -i])
            .map(|i| eval_spectrum(0.7 + i as f64 * period, &m.theta).unwrap())
            .sum();
        assert!(((b - a) - omitted).abs() < 1e-15);
        assert!(omitted < 1.5e-6, "{omitted}");
        assert!(a >= eval_spectrum(0.7, &m.theta).unwrap());
    }

    #[test]
    fn rejects_out_of_band() {
        let m = canon_model(128);
        assert!(matches!(m.aliased_spectrum(5.0), Err(Error::Domain(_))));
    }

    #[test]
    fn small_grid_is_config_error() {
        let scheme = SamplingScheme::new(1.0, 100).unwrap();
        let quad = QuadratureConfig::new(150, 1, 1e-6);
        let err = SampledModel::new(WaveParams::canonical(), scheme, quad, false).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn folded_grid_matches_direct_fold() {
        let m = canon_model(64);
        let grid = m.folded_grid();
        let h = m.bin_width();
        for j in [0usize, 1, 100, 4095, 4096, 4097, 8000, 8191] {
            let w = -m.scheme.nyquist() + j as f64 * h;
            let direct = m.aliased_unchecked(&Jonswap::new(&m.theta), w);
            assert!((grid[j] - direct).abs() <= 1e-13 * direct.abs().max(1e-300), "j={j}");
        }
    }

    #[test]
    fn c0_matches_refined_quadrature() {
        let m = canon_model(2304);
        let c0 = m.autocovariance().values[0];
        // Midpoint rule with 16 M points of the folded spectrum.
        let fine = 16 * m.quad.m;
        let nyq = m.scheme.nyquist();
        let h = 2.0 * nyq / fine as f64;
        let kernel = Jonswap::new(&m.theta);
        let mut acc = 0.0;
        for j in 0..fine {
            acc += m.aliased_unchecked(&kernel, -nyq + (j as f64 + 0.5) * h);
        }
        let oracle = acc * h;
        assert!(((c0 - oracle) / oracle).abs() < 1e-6, "{c0} vs {oracle}");
    }

    #[test]
    fn acf_bounded_by_c0() {
        let acf = canon_model(2304).autocovariance();
        let c0 = acf.values[0];
        assert!(c0 > 0.0);
        for v in &acf.values {
            assert!(v.abs() <= c0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn acf_self_converges_in_m() {
        let base = canon_model(2304);
        let doubled = SampledModel {
            quad: QuadratureConfig::new(2 * base.quad.m, base.quad.k_folds, 1e-6),
            ..base
        };
        let a = base.autocovariance();
        let b = doubled.autocovariance();
        let c0 = a.values[0];
        for (x, y) in a.values.iter().zip(&b.values) {
            // Lags far out are tiny; measure against the variance.
            assert!((x - y).abs() / c0 < 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn acf_gradient_alpha_is_acf_over_alpha() {
        let m = canon_model(256);
        let (acf, grads) = m.autocovariance_with_gradient();
        for (c, d) in acf.values.iter().zip(&grads[0].values) {
            assert!((d - c / 0.7).abs() <= 1e-12 * acf.values[0]);
        }
    }

    #[test]
    fn acf_gradient_matches_finite_differences() {
        let m = canon_model(256);
        let grads = m.autocovariance_gradient();
        let x = m.theta.free();
        for i in 0..4 {
            let h = 1e-5 * x[i];
            let mut up = x;
            let mut dn = x;
            up[i] += h;
            dn[i] -= h;
            let a = m.at(m.theta.with_free(up)).autocovariance();
            let b = m.at(m.theta.with_free(dn)).autocovariance();
            let scale = grads[i].values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for tau in 0..256 {
                let fd = (a.values[tau] - b.values[tau]) / (2.0 * h);
                let an = grads[i].values[tau];
                assert!((fd - an).abs() / scale < 1e-5, "param {i} lag {tau}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn gamma_derivative_at_boundary_matches_direct_quadrature() {
        let scheme = SamplingScheme::new(1.0, 16).unwrap();
        let theta = WaveParams::new(0.7, 0.7, 1.0, 5.0).unwrap();
        let quad = QuadratureConfig::new(512, 2, 1e-6);
        let m = SampledModel::new(theta, scheme, quad, false).unwrap();
        let grads = m.autocovariance_gradient();
        // Riemann sum of sum_k f delta / gamma, written out directly.
        let kernel = Jonswap::new(&theta);
        let h = 2.0 * PI / (512.0 * 1.0);
        for tau in 0..16 {
            let mut acc = 0.0;
            for j in 0..512 {
                let w = -PI + j as f64 * h;
                let mut fold = 0.0;
                for k in -2i64..=2 {
                    let wk = (w + 2.0 * PI * k as f64).abs();
                    fold += kernel.density_gradient(wk).1[2];
                }
                acc += fold * (w * tau as f64).cos();
            }
            let oracle = acc * h;
            assert!(grads[2].values[tau].is_finite());
            assert!((grads[2].values[tau] - oracle).abs() < 1e-12, "lag {tau}");
        }
    }

    #[test]
    fn white_noise_expected_periodogram() {
        let mut v = vec![0.0; 16];
        v[0] = 2.5;
        let acf = AcfSequence::new(v, 0.5).unwrap();
        let e = expected_periodogram(&acf).unwrap();
        for x in e {
            assert!((x - 0.5 * 2.5 / (2.0 * PI)).abs() < 1e-15);
        }
        let one = AcfSequence::new(vec![3.0], 0.5).unwrap();
        assert!((expected_periodogram(&one).unwrap()[0] - 0.5 * 3.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(expected_periodogram(&AcfSequence {
            values: vec![],
            scheme: SamplingScheme { delta: 1.0, n: 1 }
        })
        .is_err());
    }

    #[test]
    fn expected_periodogram_sum_rule_and_sign() {
        let m = canon_model(2304);
        let acf = m.autocovariance();
        let e = expected_periodogram(&acf).unwrap();
        let total: f64 = e.iter().sum::<f64>() * 2.0 * PI / (2304.0 * DELTA);
        assert!(((total - acf.values[0]) / acf.values[0]).abs() < 1e-10);
        let peak = e.iter().cloned().fold(0.0, f64::max);
        for x in &e {
            assert!(*x >= -1e-12 * peak);
        }
    }

    #[test]
    fn expected_periodogram_gradient_is_linear() {
        let zeros: [AcfSequence; 4] = std::array::from_fn(|_| AcfSequence::new(vec![0.0; 8], 1.0).unwrap());
        for g in expected_periodogram_gradient(&zeros).unwrap() {
            assert!(g.iter().all(|v| *v == 0.0));
        }
        let m = canon_model(512);
        let (e, grads) = m.expected_periodogram_with_gradient();
        let peak = e.iter().cloned().fold(0.0, f64::max);
        for (a, b) in e.iter().zip(&grads[0]) {
            assert!((b - a / 0.7).abs() < 1e-12 * peak);
        }
    }

    #[test]
    fn differencing_basics() {
        let x = TimeSeries::new(vec![1.0, 2.0, 4.0], 1.0).unwrap();
        assert_eq!(difference_series(&x).unwrap().values(), &[1.0, 2.0]);
        let c = TimeSeries::new(vec![3.0; 10], 1.0).unwrap();
        assert!(difference_series(&c).unwrap().values().iter().all(|v| *v == 0.0));
        let ramp = TimeSeries::new((0..10).map(|t| 0.3 * 0.5 * t as f64).collect(), 0.5).unwrap();
        for v in difference_series(&ramp).unwrap().values() {
            assert!((v - 0.15).abs() < 1e-12);
        }
        assert!(difference_series(&TimeSeries::new(vec![1.0], 1.0).unwrap()).is_err());
        let theta = WaveParams::canonical();
        assert_eq!(differenced_spectrum(0.0, &theta, 1.0).unwrap(), 0.0);
        let nyq = PI / 0.5;
        let a = differenced_spectrum(nyq, &theta, 0.5).unwrap();
        assert!((a - 4.0 * eval_spectrum(nyq, &theta).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn differenced_acf_cross_check() {
        let n = 128;
        let scheme = SamplingScheme::new(DELTA, n + 1).unwrap();
        let x = SampledModel::with_default_quadrature(WaveParams::canonical(), scheme, false).unwrap();
        let y = SampledModel { differenced: true, ..x };
        let cx = x.autocovariance().values;
        let cy = y.autocovariance().values;
        for tau in 0..n {
            let prev = if tau == 0 { cx[1] } else { cx[tau - 1] };
            let expected = 2.0 * cx[tau] - cx[tau + 1] - prev;
            assert!((cy[tau] - expected).abs() < 1e-6, "lag {tau}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn differencing_factor_in_range(w in -50.0f64..50.0, d in 0.01f64..5.0) {
                let f = differencing_factor(w, d);
                prop_assert!((0.0..=4.0).contains(&f));
            }

            #[test]
            fn extra_folds_change_little(w in 0.0f64..4.0, extra in 1usize..6) {
                let m = canon_model(64);
                let more = SampledModel {
                    quad: QuadratureConfig::new(m.quad.m, m.quad.k_folds + extra, 1e-6),
                    ..m
                };
                let a = m.aliased_spectrum(w).unwrap();
                let b = more.aliased_spectrum(w).unwrap();
                prop_assert!(b >= a);
                prop_assert!(b - a < 1e-6 * (2 * extra) as f64);
            }
        }
    }
}
