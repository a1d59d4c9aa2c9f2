//! Monte Carlo comparison of estimators on simulated records.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, Method, OptimizerConfig};
use crate::model::{WaveParams, PARAM_NAMES};
use crate::nonparam::{select_frequencies, Band};
use crate::sampling::{QuadratureOverrides, SamplingScheme};
use crate::simulation::CirculantEmbedding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub grid: Vec<WaveParams>,
    pub methods: Vec<Method>,
    pub scheme: SamplingScheme,
    pub band: Band,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    #[serde(skip, default)]
    pub optimizer: OptimizerConfig,
}

/// The parameter grid `alpha = 0.7`, `omega_p` in {0.7, 0.9, 1.2},
/// `gamma` in {1, 2, 3.3, 5}, `r` in {4, 5}.
pub fn standard_grid() -> Vec<WaveParams> {
    let mut out = Vec::with_capacity(24);
    for wp in [0.7, 0.9, 1.2] {
        for gamma in [1.0, 2.0, 3.3, 5.0] {
            for r in [4.0, 5.0] {
                out.push(WaveParams::canonical().with_free([0.7, wp, gamma, r]));
            }
        }
    }
    out
}

/// Percent statistics relative to the true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentStats {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

impl PercentStats {
    /// `100 (mean - truth) / truth`, population SD and RMSE likewise scaled.
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Option<Self> {
        if estimates.is_empty() {
            return None;
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
        let k = 100.0 / truth.abs();
        Some(PercentStats {
            bias: k * (mean - truth),
            sd: k * var.sqrt(),
            rmse: k * mse.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    /// Averaged over the grid.
    pub stats: PercentStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub parameters: Vec<ParameterSummary>,
    /// Average over the four parameters; bias enters as its magnitude.
    pub average: PercentStats,
    /// Fits that returned an error (left out of the statistics).
    pub failures: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub reps: usize,
    pub grid_size: usize,
    pub wall_seconds: f64,
    pub methods: Vec<MethodSummary>,
}

/// Estimates `[grid point][method][rep]`, `None` for failed fits.
type Estimates = Vec<Vec<Vec<Option<([f64; 4], bool)>>>>;

/// Simulates `reps` records per grid point, fits every method to each and
/// summarises the estimates. Records are shared across methods; work runs on
/// the current rayon pool.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    if config.grid.is_empty() || config.methods.is_empty() {
        return Err(Error::config("benchmark needs at least one grid point and one method"));
    }
    let start = Instant::now();
    let selection = select_frequencies(
        &config.scheme,
        config.band.omega_min,
        config.band.omega_max,
        config.band.drop_zero_nyquist,
    )?;
    let mut estimates: Estimates = Vec::with_capacity(config.grid.len());
    for (g, theta) in config.grid.iter().enumerate() {
        theta.validate()?;
        let quad = config.quadrature.resolve(theta, &config.scheme)?;
        let emb = CirculantEmbedding::from_model(theta, &config.scheme, &quad)?;
        let seed = config.seed.wrapping_add((g as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let per_rep: Vec<Vec<Option<([f64; 4], bool)>>> = (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let x = emb.sample(seed, rep);
                config
                    .methods
                    .iter()
                    .map(|m| {
                        fit(&x, m, &selection, &config.quadrature, &config.optimizer)
                            .ok()
                            .map(|r| (r.theta_hat.free(), r.converged))
                    })
                    .collect()
            })
            .collect();
        // Reorder to [method][rep].
        let by_method = (0..config.methods.len())
            .map(|mi| per_rep.iter().map(|row| row[mi]).collect())
            .collect();
        estimates.push(by_method);
    }
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| summarize(m, &config.grid, &estimates, mi))
        .collect();
    Ok(BenchmarkReport {
        reps: config.reps,
        grid_size: config.grid.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
        methods,
    })
}

fn summarize(method: &Method, grid: &[WaveParams], est: &Estimates, mi: usize) -> MethodSummary {
    let mut failures = 0;
    let mut not_converged = 0;
    let mut sums = [[0.0f64; 3]; 4];
    let mut counts = [0usize; 4];
    for (g, theta) in grid.iter().enumerate() {
        let runs = &est[g][mi];
        failures += runs.iter().filter(|r| r.is_none()).count();
        not_converged += runs.iter().filter(|r| matches!(r, Some((_, false)))).count();
        let ok: Vec<[f64; 4]> = runs.iter().flatten().map(|(t, _)| *t).collect();
        let truth = theta.free();
        for p in 0..4 {
            let col: Vec<f64> = ok.iter().map(|t| t[p]).collect();
            if let Some(s) = PercentStats::from_estimates(&col, truth[p]) {
                sums[p][0] += s.bias;
                sums[p][1] += s.sd;
                sums[p][2] += s.rmse;
                counts[p] += 1;
            }
        }
    }
    let parameters: Vec<ParameterSummary> = (0..4)
        .map(|p| {
            let c = counts[p].max(1) as f64;
            ParameterSummary {
                parameter: PARAM_NAMES[p].to_string(),
                stats: PercentStats {
                    bias: sums[p][0] / c,
                    sd: sums[p][1] / c,
                    rmse: sums[p][2] / c,
                },
            }
        })
        .collect();
    let average = PercentStats {
        bias: parameters.iter().map(|p| p.stats.bias.abs()).sum::<f64>() / 4.0,
        sd: parameters.iter().map(|p| p.stats.sd).sum::<f64>() / 4.0,
        rmse: parameters.iter().map(|p| p.stats.rmse).sum::<f64>() / 4.0,
    };
    MethodSummary {
        method: *method,
        parameters,
        average,
        failures,
        not_converged,
    }
}
