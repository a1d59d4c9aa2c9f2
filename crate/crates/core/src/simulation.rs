//! Exact Gaussian records by circulant embedding of the sampled
//! autocovariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::model::WaveParams;
use crate::sampling::{AcfSequence, QuadratureConfig, SampledModel, SamplingScheme, TimeSeries};

/// Negative eigenvalues down to this fraction of the largest are clipped.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// Number of circulant doublings tried before embedding is declared failed.
pub const MAX_EMBEDDING_GROWTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub circulant_size: usize,
    pub min_eigenvalue: f64,
    /// Some small negative eigenvalues were set to zero.
    pub clipped: bool,
}

/// Precomputed square-root eigenvalues of the embedding circulant.
#[derive(Debug, Clone)]
pub struct CirculantEmbedding {
    scale: Vec<f64>,
    n: usize,
    delta: f64,
    report: EmbeddingReport,
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

impl CirculantEmbedding {
    /// Embeds `c(0..n)` in a circulant of size `2(n-1)` (size 1 when `n = 1`).
    pub fn from_acf(acf: &AcfSequence) -> Result<Self> {
        let n = acf.values.len();
        Self::build(&acf.values, n, acf.scheme.delta, (2 * n).saturating_sub(2).max(1))
    }

    /// Embedding for the model's numerical autocovariance. The circulant is
    /// `2(n-1)` rounded up to a 2-3-5 smooth length, the extra interior lags
    /// coming from the same autocovariance. Short records of narrow-band
    /// spectra can give a circulant with negative eigenvalues; the size is
    /// then doubled, up to [`MAX_EMBEDDING_GROWTH`] times.
    pub fn from_model(theta: &WaveParams, scheme: &SamplingScheme, quad: &QuadratureConfig) -> Result<Self> {
        let n = scheme.n;
        let mut size = if n == 1 { 1 } else { smooth_size(2 * (n - 1)) };
        let mut attempt = 0;
        loop {
            let lags = size / 2 + 1;
            let wide = SamplingScheme::new(scheme.delta, lags.max(n))?;
            let mut q = *quad;
            q.m = q.m.max(2 * wide.n);
            q.m += q.m % 2;
            let acf = SampledModel::new(*theta, wide, q, false)?.autocovariance();
            match Self::build(&acf.values, n, scheme.delta, size) {
                Err(Error::Numerical(_)) if attempt < MAX_EMBEDDING_GROWTH && n > 1 => {
                    attempt += 1;
                    size *= 2;
                }
                other => return other,
            }
        }
    }

    fn build(c: &[f64], n: usize, delta: f64, size: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("record length must be positive"));
        }
        let half = size / 2;
        if c.len() < half + 1 || c.len() < n {
            return Err(Error::config("autocovariance too short for the circulant"));
        }
        let mut row: Vec<Complex64> = (0..size)
            .map(|k| Complex64::new(if k <= half { c[k] } else { c[size - k] }, 0.0))
            .collect();
        fft::forward_in_place(&mut row);
        let eig: Vec<f64> = row.iter().map(|z| z.re).collect();
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || !min.is_finite() {
            return Err(Error::numerical("embedding failed: circulant has no positive eigenvalue"));
        }
        if min < -EIGEN_TOLERANCE * max {
            return Err(Error::numerical(format!(
                "embedding failed: eigenvalue {min:e} below -{EIGEN_TOLERANCE:e} x {max:e}"
            )));
        }
        let m = size as f64;
        let scale = eig.iter().map(|&l| (l.max(0.0) / m).sqrt()).collect();
        Ok(CirculantEmbedding {
            scale,
            n,
            delta,
            report: EmbeddingReport {
                circulant_size: size,
                min_eigenvalue: min,
                clipped: min < 0.0,
            },
        })
    }

    pub fn report(&self) -> EmbeddingReport {
        self.report
    }

    /// Record number `rep` of the stream seeded by `seed`. Each rep draws
    /// from its own ChaCha stream, so output does not depend on scheduling.
    pub fn sample(&self, seed: u64, rep: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(s * a, s * b)
            })
            .collect();
        fft::forward_in_place(&mut buf);
        let values = buf[..self.n].iter().map(|z| z.re).collect();
        TimeSeries::new(values, self.delta).expect("simulated values are finite")
    }
}

/// Simulated records and the embedding diagnostics.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<TimeSeries>,
    pub report: EmbeddingReport,
}

/// `reps` independent records of length `scheme.n` whose covariance is the
/// numerical (aliased) autocovariance of `theta`.
pub fn simulate_gaussian(
    theta: &WaveParams,
    scheme: &SamplingScheme,
    quad: &QuadratureConfig,
    seed: u64,
    reps: usize,
) -> Result<Simulation> {
    if reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    let emb = CirculantEmbedding::from_model(theta, scheme, quad)?;
    let records = (0..reps as u64).into_par_iter().map(|r| emb.sample(seed, r)).collect();
    Ok(Simulation {
        records,
        report: emb.report(),
    })
}
