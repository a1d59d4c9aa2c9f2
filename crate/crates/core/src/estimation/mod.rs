//! Parametric fitting: objectives, starting values and the optimizer driver.

mod init;
mod objectives;
mod optimizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WaveParams;
use crate::nonparam::{bartlett, default_segment_len, periodogram, FrequencySelection, SpectralEstimate};
use crate::sampling::{difference_series, QuadratureConfig, QuadratureOverrides, SampledModel, TimeSeries};

pub use init::{initialize, initialize_from_estimate, Initialization, FALLBACK_TAIL_EXPONENT, INITIAL_GAMMA};
pub use objectives::{
    objective_debiased_whittle, objective_gaussian_ml, objective_ls, objective_whittle, SpectrumForm,
};

use optimizer::{Bounds, Outcome, Tolerances};

/// Record length above which the exact likelihood is refused by default.
pub const DEFAULT_ML_MAX_N: usize = 4096;

/// Offset keeping `log(gamma - 1 + eps)` finite at `gamma = 1`.
const GAMMA_EPS: f64 = 1e-8;

/// Parameter box: `alpha`, `gamma` and `r` limits; `omega_p` runs from the
/// lowest selected frequency to Nyquist.
pub const ALPHA_BOUNDS: (f64, f64) = (1e-6, 1e3);
pub const GAMMA_BOUNDS: (f64, f64) = (1.0, 20.0);
pub const R_BOUNDS: (f64, f64) = (1.1, 20.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Least squares against the periodogram.
    Ls,
    /// Least squares against the Bartlett estimate.
    Bls,
    Whittle,
    AliasedWhittle,
    DebiasedWhittle,
    /// Exact time-domain Gaussian likelihood.
    GaussianMl,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Ls,
        MethodKind::Bls,
        MethodKind::Whittle,
        MethodKind::AliasedWhittle,
        MethodKind::DebiasedWhittle,
        MethodKind::GaussianMl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Ls => "ls",
            MethodKind::Bls => "bls",
            MethodKind::Whittle => "whittle",
            MethodKind::AliasedWhittle => "aliased_whittle",
            MethodKind::DebiasedWhittle => "debiased_whittle",
            MethodKind::GaussianMl => "gaussian_ml",
        }
    }

    /// Whittle-type objectives, which have a score and Fisher information.
    pub fn is_likelihood_spectral(self) -> bool {
        matches!(
            self,
            MethodKind::Whittle | MethodKind::AliasedWhittle | MethodKind::DebiasedWhittle
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "ls" => MethodKind::Ls,
            "bls" => MethodKind::Bls,
            "whittle" | "w" => MethodKind::Whittle,
            "aliased_whittle" | "aw" => MethodKind::AliasedWhittle,
            "debiased_whittle" | "dw" => MethodKind::DebiasedWhittle,
            "gaussian_ml" | "ml" => MethodKind::GaussianMl,
            _ => return Err(Error::config(format!("unknown method '{s}'"))),
        })
    }
}

/// An estimator and its options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub kind: MethodKind,
    /// Fit the first-differenced record against the differenced model.
    #[serde(default)]
    pub differenced: bool,
    /// Segment length for BLS; `None` means `round(100 / delta)`.
    #[serde(default)]
    pub bartlett_segment_len: Option<usize>,
    /// Model density used by LS and BLS.
    #[serde(default)]
    pub ls_form: SpectrumForm,
    #[serde(default = "default_ml_max_n")]
    pub ml_max_n: usize,
}

fn default_ml_max_n() -> usize {
    DEFAULT_ML_MAX_N
}

impl Method {
    pub fn new(kind: MethodKind) -> Self {
        Method {
            kind,
            differenced: false,
            bartlett_segment_len: None,
            ls_form: SpectrumForm::Continuous,
            ml_max_n: DEFAULT_ML_MAX_N,
        }
    }

    pub fn debiased_whittle() -> Self {
        Self::new(MethodKind::DebiasedWhittle)
    }

    pub fn bls(segment_len: usize) -> Self {
        Method {
            bartlett_segment_len: Some(segment_len),
            ..Self::new(MethodKind::Bls)
        }
    }

    pub fn differenced(mut self, on: bool) -> Self {
        self.differenced = on;
        self
    }
}

/// Which search the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Scoring for the Whittle-type objectives, simplex for the others.
    #[default]
    Auto,
    /// Simplex only.
    Simplex,
    /// Simplex, then a scoring polish where the objective allows it.
    SimplexPolish,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Relative objective change (simplex spread, or predicted scoring gain).
    pub f_rel_tol: f64,
    /// Simplex diameter in transformed coordinates, or relative scoring step.
    pub x_tol: f64,
    pub max_iterations: usize,
    /// Initial simplex edge in transformed coordinates.
    pub simplex_step: f64,
    /// Extra simplex rounds started from the previous optimum.
    pub restarts: usize,
    pub strategy: Strategy,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            f_rel_tol: 1e-8,
            x_tol: 1e-6,
            max_iterations: 2000,
            simplex_step: 0.1,
            restarts: 1,
            strategy: Strategy::Auto,
        }
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: WaveParams,
    /// The method as run (BLS segment length filled in).
    pub method: Method,
    /// Objective at the estimate: log-likelihood for Whittle-type and ML
    /// fits, sum of squares for LS and BLS.
    pub objective_at_opt: f64,
    pub objective_at_init: f64,
    /// Selected indices on the grid of the fitted record (the differenced
    /// record when differencing).
    pub selection: FrequencySelection,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub init: WaveParams,
    pub tail_fallback: bool,
    pub quadrature: QuadratureConfig,
}

/// Fits `method` to `x` starting from [`initialize`].
pub fn fit(
    x: &TimeSeries,
    method: &Method,
    selection: &FrequencySelection,
    quad: &QuadratureOverrides,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    fit_from(x, method, selection, quad, config, None)
}

/// Fits `method` to `x`, starting from `init` when given (for example the
/// estimate for a neighbouring record).
pub fn fit_from(
    x: &TimeSeries,
    method: &Method,
    selection: &FrequencySelection,
    quad: &QuadratureOverrides,
    config: &OptimizerConfig,
    init: Option<WaveParams>,
) -> Result<FitResult> {
    let (start, tail_fallback) = match init {
        Some(theta) => {
            theta.validate()?;
            (theta, false)
        }
        None => {
            let i = initialize(x, selection)?;
            (i.theta, i.tail_fallback)
        }
    };
    let mut method = *method;
    let problem = Problem::build(x, &mut method, selection, quad, &start)?;
    let bounds = problem.bounds();
    let start = start.with_free(bounds.clamp(start.free()));

    let init_score = problem.score(&start);
    if !init_score.is_finite() {
        return Err(Error::numerical(format!(
            "{} objective is not finite at the starting point {:?}; the model density may \
             vanish at selected frequencies (raise omega_min)",
            method.kind,
            start.free()
        )));
    }
    let tol = Tolerances {
        f_rel: config.f_rel_tol,
        x_tol: config.x_tol,
        max_iterations: config.max_iterations,
    };
    let outcome = problem.optimize(&start, &bounds, &tol, config);
    let theta_hat = start.with_free(bounds.clamp(outcome.x));
    let score = problem.score(&theta_hat);
    if !score.is_finite() {
        return Err(Error::numerical("objective is not finite at the estimate"));
    }
    Ok(FitResult {
        theta_hat,
        method,
        objective_at_opt: problem.native(score),
        objective_at_init: problem.native(init_score),
        selection: problem.selection().clone(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        init: start,
        tail_fallback,
        quadrature: problem.model().quad,
    })
}

enum Objective {
    LeastSquares(SpectrumForm),
    Whittle(SpectrumForm),
    Debiased,
}

enum Problem {
    Spectral {
        objective: Objective,
        estimate: SpectralEstimate,
        selection: FrequencySelection,
        model: SampledModel,
    },
    Likelihood {
        values: Vec<f64>,
        selection: FrequencySelection,
        model: SampledModel,
    },
}

impl Problem {
    fn build(
        x: &TimeSeries,
        method: &mut Method,
        selection: &FrequencySelection,
        quad: &QuadratureOverrides,
        start: &WaveParams,
    ) -> Result<Problem> {
        let data = if method.differenced {
            difference_series(x)?
        } else {
            x.clone()
        };
        let scheme = data.scheme();
        let quad = quad.resolve(start, &scheme)?;
        let on_data_grid = selection.rebase(scheme)?;
        let differenced = method.differenced;
        let spectral = |objective, estimate: SpectralEstimate| -> Result<Problem> {
            let selection = selection.rebase(estimate.scheme)?;
            let model = SampledModel::new(*start, estimate.scheme, quad, differenced)?;
            Ok(Problem::Spectral {
                objective,
                estimate,
                selection,
                model,
            })
        };
        match method.kind {
            MethodKind::Ls => spectral(Objective::LeastSquares(method.ls_form), periodogram(&data)?),
            MethodKind::Bls => {
                let len = method
                    .bartlett_segment_len
                    .unwrap_or_else(|| default_segment_len(scheme.delta));
                method.bartlett_segment_len = Some(len);
                spectral(Objective::LeastSquares(method.ls_form), bartlett(&data, len)?)
            }
            MethodKind::Whittle => spectral(Objective::Whittle(SpectrumForm::Continuous), periodogram(&data)?),
            MethodKind::AliasedWhittle => spectral(Objective::Whittle(SpectrumForm::Aliased), periodogram(&data)?),
            MethodKind::DebiasedWhittle => spectral(Objective::Debiased, periodogram(&data)?),
            MethodKind::GaussianMl => {
                if data.len() > method.ml_max_n {
                    return Err(Error::config(format!(
                        "record length {} exceeds the exact-likelihood limit {}",
                        data.len(),
                        method.ml_max_n
                    )));
                }
                if method.differenced {
                    return Err(Error::config("the exact likelihood does not support differencing"));
                }
                Ok(Problem::Likelihood {
                    values: data.demeaned().into_values(),
                    selection: on_data_grid,
                    model: SampledModel::new(*start, scheme, quad, false)?,
                })
            }
        }
    }

    fn selection(&self) -> &FrequencySelection {
        match self {
            Problem::Spectral { selection, .. } | Problem::Likelihood { selection, .. } => selection,
        }
    }

    fn model(&self) -> &SampledModel {
        match self {
            Problem::Spectral { model, .. } | Problem::Likelihood { model, .. } => model,
        }
    }

    fn bounds(&self) -> Bounds {
        let sel = self.selection();
        let nyq = sel.scheme().nyquist();
        let wp_lo = sel.lowest_positive_omega().unwrap_or(nyq).min(nyq);
        Bounds {
            lo: [ALPHA_BOUNDS.0, wp_lo, GAMMA_BOUNDS.0, R_BOUNDS.0],
            hi: [ALPHA_BOUNDS.1, nyq, GAMMA_BOUNDS.1, R_BOUNDS.1],
        }
    }

    /// Objective in the maximize sense; `-inf` when it cannot be evaluated.
    fn score(&self, theta: &WaveParams) -> f64 {
        let v = match self {
            Problem::Spectral {
                objective,
                estimate,
                selection,
                model,
            } => {
                let m = model.at(*theta);
                match objective {
                    Objective::LeastSquares(form) => -objectives::least_squares(&m, estimate, selection, *form),
                    Objective::Whittle(form) => objectives::whittle(&m, estimate, selection, *form),
                    Objective::Debiased => objectives::debiased_whittle(&m, estimate, selection),
                }
            }
            Problem::Likelihood { values, model, .. } => {
                let acf = model.at(*theta).autocovariance();
                objectives::gaussian_loglik(&acf.values, values).unwrap_or(f64::NEG_INFINITY)
            }
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn native(&self, score: f64) -> f64 {
        match self {
            Problem::Spectral {
                objective: Objective::LeastSquares(_),
                ..
            } => -score,
            _ => score,
        }
    }

    fn derivatives(&self, theta: &WaveParams) -> Option<objectives::LikelihoodDerivatives> {
        match self {
            Problem::Spectral {
                objective,
                estimate,
                selection,
                model,
            } => {
                let m = model.at(*theta);
                match objective {
                    Objective::Whittle(form) => objectives::whittle_derivatives(&m, estimate, selection, *form),
                    Objective::Debiased => objectives::debiased_whittle_derivatives(&m, estimate, selection),
                    Objective::LeastSquares(_) => None,
                }
            }
            Problem::Likelihood { .. } => None,
        }
    }

    fn has_scoring(&self) -> bool {
        matches!(
            self,
            Problem::Spectral {
                objective: Objective::Whittle(_) | Objective::Debiased,
                ..
            }
        )
    }

    fn optimize(&self, start: &WaveParams, bounds: &Bounds, tol: &Tolerances, config: &OptimizerConfig) -> Outcome {
        let scoring = |x0: [f64; 4]| {
            optimizer::projected_scoring(
                |x| self.score(&start.with_free(*x)),
                |x| self.derivatives(&start.with_free(*x)),
                x0,
                bounds,
                tol,
            )
        };
        let simplex = || self.simplex(start, bounds, tol, config);
        match config.strategy {
            Strategy::Auto if self.has_scoring() => match scoring(start.free()) {
                Some(out) if out.converged => out,
                _ => self.polish(simplex(), &scoring),
            },
            Strategy::Auto | Strategy::Simplex => simplex(),
            Strategy::SimplexPolish => {
                let out = simplex();
                if self.has_scoring() {
                    self.polish(out, &scoring)
                } else {
                    out
                }
            }
        }
    }

    fn polish(&self, out: Outcome, scoring: &dyn Fn([f64; 4]) -> Option<Outcome>) -> Outcome {
        match scoring(out.x) {
            Some(p) if p.value >= out.value => Outcome {
                iterations: out.iterations + p.iterations,
                evaluations: out.evaluations + p.evaluations,
                converged: p.converged || out.converged,
                ..p
            },
            _ => out,
        }
    }

    /// Simplex search on `(log alpha, log omega_p, log(gamma - 1 + eps), log(r - 1))`.
    /// Returned `x` and `value` are in parameter space and the maximize sense.
    fn simplex(&self, start: &WaveParams, bounds: &Bounds, tol: &Tolerances, config: &OptimizerConfig) -> Outcome {
        let ubounds = Bounds {
            lo: to_unconstrained(bounds.lo),
            hi: to_unconstrained(bounds.hi),
        };
        let out = optimizer::nelder_mead_restarted(
            |u| -self.score(&start.with_free(bounds.clamp(from_unconstrained(*u)))),
            to_unconstrained(start.free()),
            config.simplex_step,
            &ubounds,
            tol,
            config.restarts,
        );
        Outcome {
            x: bounds.clamp(from_unconstrained(out.x)),
            value: -out.value,
            ..out
        }
    }
}

fn to_unconstrained(t: [f64; 4]) -> [f64; 4] {
    [t[0].ln(), t[1].ln(), (t[2] - 1.0 + GAMMA_EPS).ln(), (t[3] - 1.0).ln()]
}

fn from_unconstrained(u: [f64; 4]) -> [f64; 4] {
    [u[0].exp(), u[1].exp(), 1.0 - GAMMA_EPS + u[2].exp(), 1.0 + u[3].exp()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonparam::{select_frequencies, EstimateKind};
    use crate::sampling::SamplingScheme;

    #[test]
    fn method_names_round_trip() {
        for k in MethodKind::ALL {
            assert_eq!(k.name().parse::<MethodKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("DW".parse::<MethodKind>().unwrap(), MethodKind::DebiasedWhittle);
        assert!(matches!("nope".parse::<MethodKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn transform_round_trip() {
        let t = [0.7, 0.7, 3.3, 4.0];
        let back = from_unconstrained(to_unconstrained(t));
        for i in 0..4 {
            assert!((back[i] - t[i]).abs() < 1e-12);
        }
        assert!((from_unconstrained(to_unconstrained([1.0, 1.0, 1.0, 2.0]))[2] - 1.0).abs() < 1e-15);
    }

    fn noise_free_dw(theta: WaveParams, strategy: Strategy) -> FitResult {
        // Use the expected periodogram as data by fitting an estimate directly.
        let scheme = SamplingScheme::new(0.78125, 1024).unwrap();
        let model = SampledModel::with_default_quadrature(theta, scheme, false).unwrap();
        let estimate = SpectralEstimate {
            omegas: crate::nonparam::fourier_frequencies(&scheme),
            values: model.expected_periodogram(),
            kind: EstimateKind::Periodogram,
            scheme,
        };
        let selection = select_frequencies(&scheme, 0.0, f64::INFINITY, true).unwrap();
        let start = WaveParams::new(0.5, 0.75, 2.0, 4.5).unwrap();
        let problem = Problem::Spectral {
            objective: Objective::Debiased,
            estimate,
            selection: selection.clone(),
            model: model.at(start),
        };
        let config = OptimizerConfig {
            strategy,
            ..Default::default()
        };
        let bounds = problem.bounds();
        let tol = Tolerances {
            f_rel: config.f_rel_tol,
            x_tol: config.x_tol,
            max_iterations: config.max_iterations,
        };
        let out = problem.optimize(&start, &bounds, &tol, &config);
        FitResult {
            theta_hat: start.with_free(out.x),
            method: Method::debiased_whittle(),
            objective_at_opt: out.value,
            objective_at_init: problem.score(&start),
            selection,
            converged: out.converged,
            iterations: out.iterations,
            evaluations: out.evaluations,
            init: start,
            tail_fallback: false,
            quadrature: model.quad,
        }
    }

    #[test]
    fn noise_free_debiased_fit_recovers_truth() {
        let theta = WaveParams::canonical();
        for strategy in [Strategy::Auto, Strategy::SimplexPolish] {
            let r = noise_free_dw(theta, strategy);
            assert!(r.converged);
            let err = r
                .theta_hat
                .free()
                .iter()
                .zip(theta.free())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-4, "{strategy:?}: {:?}", r.theta_hat.free());
            assert!(r.objective_at_opt >= r.objective_at_init);
        }
    }

    #[test]
    fn ml_rejects_long_records() {
        let x = TimeSeries::new((0..100).map(|t| (t as f64 * 0.3).sin()).collect(), 0.78125).unwrap();
        let method = Method {
            ml_max_n: 50,
            ..Method::new(MethodKind::GaussianMl)
        };
        let sel = FrequencySelection::full(x.scheme()).unwrap();
        let r = fit(&x, &method, &sel, &QuadratureOverrides::default(), &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
