//! Fitting parametric ocean wave spectra to sampled records.
//!
//! The crate evaluates the generalised JONSWAP spectral form, maps it onto a
//! finite regularly sampled record (aliasing, numerical autocovariance and the
//! expected periodogram), and fits its parameters with six estimators: least
//! squares on the periodogram or a Bartlett estimate, the Whittle, aliased
//! Whittle and de-biased Whittle likelihoods, and exact Gaussian maximum
//! likelihood. Records can be simulated exactly by circulant embedding, and
//! de-biased Whittle fits come with sandwich-variance confidence intervals.

pub mod benchmark;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod model;
pub mod nonparam;
pub mod sampling;
pub mod simulation;
pub mod uncertainty;

mod fft;

pub use error::{Error, Result};
pub use estimation::{fit, FitResult, Method, MethodKind, OptimizerConfig};
pub use model::WaveParams;
pub use nonparam::{FrequencySelection, SpectralEstimate};
pub use sampling::{QuadratureConfig, SampledModel, SamplingScheme, TimeSeries};
