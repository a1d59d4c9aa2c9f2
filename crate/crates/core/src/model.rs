//! The generalised JONSWAP spectral form and its parameter gradient.
//!
//! The one-sided form is
//!
//! ```text
//! S(w) = alpha w^-r exp{-(r/s) (w/wp)^-s} gamma^delta(w),
//! delta(w) = exp{-(w/wp - 1)^2 / (2 sigma(w)^2)},
//! ```
//!
//! with `sigma = sigma1` for `w <= wp` and `sigma2` above the peak. Everything
//! in this crate works with the two-sided density `f(w) = S(|w|)/2`, `f(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA1: f64 = 0.07;
pub const DEFAULT_SIGMA2: f64 = 0.09;
pub const DEFAULT_SHAPE: f64 = 4.0;
/// Arctan sharpness used when the smoothed peak width is switched on without
/// an explicit constant.
pub const DEFAULT_SMOOTHING: f64 = 1e4;

/// Names of the free parameters, in the order used by every 4-vector in the
/// crate (gradients, covariance matrices, bounds).
pub const PARAM_NAMES: [&str; 4] = ["alpha", "omega_p", "gamma", "r"];

fn default_sigma1() -> f64 {
    DEFAULT_SIGMA1
}
fn default_sigma2() -> f64 {
    DEFAULT_SIGMA2
}
fn default_shape() -> f64 {
    DEFAULT_SHAPE
}

/// Parameters of the generalised JONSWAP form.
///
/// `alpha`, `omega_p`, `gamma` and `r` are free; `sigma1`, `sigma2` and `s`
/// are shape constants held fixed while fitting. `smoothing = Some(C)`
/// replaces the step peak width by
/// `sigma1 + (sigma2 - sigma1) (1/2 + arctan(C (w - wp)) / pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub alpha: f64,
    pub omega_p: f64,
    pub gamma: f64,
    pub r: f64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_shape")]
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
}

impl WaveParams {
    /// Builds a validated parameter vector with the default shape constants.
    pub fn new(alpha: f64, omega_p: f64, gamma: f64, r: f64) -> Result<Self> {
        let p = Self::new_unchecked(alpha, omega_p, gamma, r);
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn new_unchecked(alpha: f64, omega_p: f64, gamma: f64, r: f64) -> Self {
        WaveParams {
            alpha,
            omega_p,
            gamma,
            r,
            sigma1: DEFAULT_SIGMA1,
            sigma2: DEFAULT_SIGMA2,
            s: DEFAULT_SHAPE,
            smoothing: None,
        }
    }

    /// The sea state used throughout the simulation studies:
    /// `alpha = 0.7, omega_p = 0.7, gamma = 3.3, r = 4`.
    pub fn canonical() -> Self {
        Self::new_unchecked(0.7, 0.7, 3.3, 4.0)
    }

    pub fn with_smoothing(mut self, c: f64) -> Self {
        self.smoothing = Some(c);
        self
    }

    pub fn with_shape(mut self, sigma1: f64, sigma2: f64, s: f64) -> Self {
        self.sigma1 = sigma1;
        self.sigma2 = sigma2;
        self.s = s;
        self
    }

    /// Checks `alpha > 0`, `omega_p > 0`, `gamma >= 1`, `r > 1` and that the
    /// shape constants are positive.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.alpha) && self.alpha > 0.0) {
            return Err(Error::domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(ok(self.omega_p) && self.omega_p > 0.0) {
            return Err(Error::domain(format!("omega_p must be > 0, got {}", self.omega_p)));
        }
        if !(ok(self.gamma) && self.gamma >= 1.0) {
            return Err(Error::domain(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(ok(self.r) && self.r > 1.0) {
            return Err(Error::domain(format!("r must be > 1, got {}", self.r)));
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2), ("s", self.s)] {
            if !(ok(v) && v > 0.0) {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(c) = self.smoothing {
            if !(ok(c) && c > 0.0) {
                return Err(Error::domain(format!("smoothing constant must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    /// The free parameters as `[alpha, omega_p, gamma, r]`.
    pub fn free(&self) -> [f64; 4] {
        [self.alpha, self.omega_p, self.gamma, self.r]
    }

    /// Copy with the free parameters replaced; shape constants are kept.
    pub fn with_free(&self, v: [f64; 4]) -> Self {
        WaveParams {
            alpha: v[0],
            omega_p: v[1],
            gamma: v[2],
            r: v[3],
            ..*self
        }
    }
}

/// One evaluation of the two-sided density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumValue {
    pub omega: f64,
    pub density: f64,
}

/// Two-sided generalised JONSWAP density `f(omega | theta)`.
pub fn eval_spectrum(omega: f64, theta: &WaveParams) -> Result<f64> {
    theta.validate()?;
    if !omega.is_finite() {
        return Err(Error::domain("frequency must be finite"));
    }
    Ok(Jonswap::new(theta).density(omega.abs()))
}

/// Partial derivatives of [`eval_spectrum`] in `(alpha, omega_p, gamma, r)`.
///
/// The density is even in `omega`, so its parameter derivatives are as well;
/// all four vanish at `omega = 0`.
pub fn eval_spectrum_gradient(omega: f64, theta: &WaveParams) -> Result<[f64; 4]> {
    theta.validate()?;
    if !omega.is_finite() {
        return Err(Error::domain("frequency must be finite"));
    }
    Ok(Jonswap::new(theta).density_gradient(omega.abs()).1)
}

/// Evaluates the density at each frequency.
pub fn tabulate(theta: &WaveParams, omegas: &[f64]) -> Result<Vec<SpectrumValue>> {
    theta.validate()?;
    let k = Jonswap::new(theta);
    Ok(omegas
        .iter()
        .map(|&omega| SpectrumValue {
            omega,
            density: k.density(omega.abs()),
        })
        .collect())
}

/// Unchecked evaluation kernel with the parameter-only quantities hoisted.
///
/// All methods take a non-negative frequency; callers fold the sign.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jonswap {
    omega_p: f64,
    gamma: f64,
    r: f64,
    s: f64,
    sigma1: f64,
    sigma2: f64,
    smoothing: Option<f64>,
    ln_half_alpha: f64,
    ln_gamma: f64,
    r_over_s: f64,
    inv_alpha: f64,
    inv_gamma: f64,
    s_is_four: bool,
}

impl Jonswap {
    pub(crate) fn new(theta: &WaveParams) -> Self {
        Jonswap {
            omega_p: theta.omega_p,
            gamma: theta.gamma,
            r: theta.r,
            s: theta.s,
            sigma1: theta.sigma1,
            sigma2: theta.sigma2,
            smoothing: theta.smoothing,
            ln_half_alpha: (0.5 * theta.alpha).ln(),
            ln_gamma: theta.gamma.ln(),
            r_over_s: theta.r / theta.s,
            inv_alpha: 1.0 / theta.alpha,
            inv_gamma: 1.0 / theta.gamma,
            s_is_four: theta.s == 4.0,
        }
    }

    #[inline]
    fn sigma(&self, w: f64) -> f64 {
        match self.smoothing {
            None => {
                if w <= self.omega_p {
                    self.sigma1
                } else {
                    self.sigma2
                }
            }
            Some(c) => {
                self.sigma1
                    + (self.sigma2 - self.sigma1)
                        * (0.5 + (c * (w - self.omega_p)).atan() / std::f64::consts::PI)
            }
        }
    }

    /// `(w / wp)^-s`.
    #[inline]
    fn inv_pow(&self, u: f64) -> f64 {
        if self.s_is_four {
            let v = 1.0 / u;
            let v2 = v * v;
            v2 * v2
        } else {
            u.powf(-self.s)
        }
    }

    #[inline]
    fn delta(&self, w: f64, u: f64) -> (f64, f64) {
        let sigma = self.sigma(w);
        let d = u - 1.0;
        ((-d * d / (2.0 * sigma * sigma)).exp(), sigma)
    }

    /// Log of the two-sided density without the peak-enhancement term, plus
    /// the pieces reused by the gradient.
    #[inline]
    pub(crate) fn density_with_ln(&self, w: f64, ln_w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let u = w / self.omega_p;
        let us = self.inv_pow(u);
        let (delta, _) = self.delta(w, u);
        let ln_f = self.ln_half_alpha - self.r * ln_w - self.r_over_s * us + delta * self.ln_gamma;
        if ln_f < -745.0 || !ln_f.is_finite() {
            0.0
        } else {
            ln_f.exp()
        }
    }

    #[inline]
    pub(crate) fn density(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        self.density_with_ln(w, w.ln())
    }

    /// Density and its gradient in `(alpha, omega_p, gamma, r)`.
    #[inline]
    pub(crate) fn density_gradient_with_ln(&self, w: f64, ln_w: f64) -> (f64, [f64; 4]) {
        if w <= 0.0 {
            return (0.0, [0.0; 4]);
        }
        let u = w / self.omega_p;
        let us = self.inv_pow(u);
        let (delta, sigma) = self.delta(w, u);
        let ln_f = self.ln_half_alpha - self.r * ln_w - self.r_over_s * us + delta * self.ln_gamma;
        if ln_f < -745.0 || !ln_f.is_finite() {
            return (0.0, [0.0; 4]);
        }
        let f = ln_f.exp();
        let wp = self.omega_p;
        let d = u - 1.0;
        let sig2 = sigma * sigma;
        // d delta / d wp, including the dependence of the smoothed width on wp.
        let mut ddelta_dwp = delta * d * w / (sig2 * wp * wp);
        if let Some(c) = self.smoothing {
            let x = c * (w - wp);
            let dsigma_dwp = -(self.sigma2 - self.sigma1) * c / (std::f64::consts::PI * (1.0 + x * x));
            ddelta_dwp += delta * d * d / (sig2 * sigma) * dsigma_dwp;
        }
        let d_wp = self.ln_gamma * ddelta_dwp - self.r * w / (wp * wp) * us / u;
        let d_r = -ln_w - us / self.s;
        (
            f,
            [
                f * self.inv_alpha,
                f * d_wp,
                f * delta * self.inv_gamma,
                f * d_r,
            ],
        )
    }

    #[inline]
    pub(crate) fn density_gradient(&self, w: f64) -> (f64, [f64; 4]) {
        if w <= 0.0 {
            return (0.0, [0.0; 4]);
        }
        self.density_gradient_with_ln(w, w.ln())
    }

    pub(crate) fn omega_p(&self) -> f64 {
        self.omega_p
    }

    #[allow(dead_code)]
    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }
}
