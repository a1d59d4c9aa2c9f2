//! Non-parametric spectral estimates and the choice of fitted frequencies.
//!
//! All arrays over a Fourier grid are in ascending frequency order, indices
//! `j = -ceil(n/2)+1, ..., floor(n/2)`; see [`SamplingScheme::position`].

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::sampling::{SamplingScheme, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Periodogram,
    Bartlett,
}

/// A spectral estimate on a Fourier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: EstimateKind,
    pub scheme: SamplingScheme,
}

impl SpectralEstimate {
    /// Value at Fourier index `j`.
    pub fn at(&self, j: i64) -> f64 {
        self.values[self.scheme.position(j)]
    }
}

/// The `n` Fourier frequencies `2 pi j / (n delta)` in ascending order.
pub fn fourier_frequencies(scheme: &SamplingScheme) -> Vec<f64> {
    let (lo, hi) = scheme.index_range();
    (lo..=hi).map(|j| scheme.omega(j)).collect()
}

/// Periodogram `delta / (2 pi n) |sum_t x_t e^{-i t delta w}|^2` of the
/// mean-removed record.
pub fn periodogram(x: &TimeSeries) -> Result<SpectralEstimate> {
    let scheme = x.scheme();
    Ok(SpectralEstimate {
        omegas: fourier_frequencies(&scheme),
        values: periodogram_values(x.values(), scheme),
        kind: EstimateKind::Periodogram,
        scheme,
    })
}

fn periodogram_values(values: &[f64], scheme: SamplingScheme) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    fft::forward_in_place(&mut buf);
    let scale = scheme.delta / (2.0 * PI * n as f64);
    let fft_order: Vec<f64> = buf.iter().map(|z| scale * z.norm_sqr()).collect();
    scheme.fft_to_natural(&fft_order)
}

/// Bartlett estimate: the average of the periodograms of `floor(n / L)`
/// consecutive non-overlapping segments of length `L`, each mean-removed.
/// Trailing samples that do not fill a segment are discarded.
pub fn bartlett(x: &TimeSeries, segment_len: usize) -> Result<SpectralEstimate> {
    if segment_len == 0 || segment_len > x.len() {
        return Err(Error::domain(format!(
            "segment length {segment_len} must be in 1..={}",
            x.len()
        )));
    }
    let scheme = SamplingScheme::new(x.delta(), segment_len)?;
    let segments = x.len() / segment_len;
    let mut acc = vec![0.0; segment_len];
    for seg in x.values().chunks_exact(segment_len) {
        for (a, v) in acc.iter_mut().zip(periodogram_values(seg, scheme)) {
            *a += v;
        }
    }
    for a in acc.iter_mut() {
        *a /= segments as f64;
    }
    Ok(SpectralEstimate {
        omegas: fourier_frequencies(&scheme),
        values: acc,
        kind: EstimateKind::Bartlett,
        scheme,
    })
}

/// Segment length giving a resolution of `0.2 pi` rad/s, `round(100 / delta)`.
pub fn default_segment_len(delta: f64) -> usize {
    (100.0 / delta).round().max(1.0) as usize
}

/// Frequency band used to build a selection on any grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub omega_min: f64,
    pub omega_max: f64,
    pub drop_zero_nyquist: bool,
}

impl Default for Band {
    fn default() -> Self {
        Band {
            omega_min: 0.0,
            omega_max: f64::INFINITY,
            drop_zero_nyquist: true,
        }
    }
}

/// The set of Fourier indices entering an objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySelection {
    indices: Vec<i64>,
    scheme: SamplingScheme,
    band: Option<Band>,
}

impl FrequencySelection {
    /// Arbitrary index set; it cannot be moved to another grid.
    pub fn from_indices(scheme: SamplingScheme, mut indices: Vec<i64>) -> Result<Self> {
        let (lo, hi) = scheme.index_range();
        if indices.is_empty() {
            return Err(Error::config("frequency selection is empty"));
        }
        if let Some(j) = indices.iter().find(|&&j| j < lo || j > hi) {
            return Err(Error::domain(format!("Fourier index {j} outside {lo}..={hi}")));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(FrequencySelection {
            indices,
            scheme,
            band: None,
        })
    }

    /// Every index except zero and Nyquist.
    pub fn full(scheme: SamplingScheme) -> Result<Self> {
        select_frequencies(&scheme, 0.0, f64::INFINITY, true)
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn band(&self) -> Option<Band> {
        self.band
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Selected indices with `j > 0`.
    pub fn positive(&self) -> impl Iterator<Item = i64> + '_ {
        self.indices.iter().copied().filter(|&j| j > 0)
    }

    /// Smallest selected positive frequency.
    pub fn lowest_positive_omega(&self) -> Option<f64> {
        self.positive().next().map(|j| self.scheme.omega(j))
    }

    /// Indices of the grid that are not selected.
    pub fn dropped(&self) -> Vec<i64> {
        let (lo, hi) = self.scheme.index_range();
        (lo..=hi).filter(|j| self.indices.binary_search(j).is_err()).collect()
    }

    /// The same band on a different grid (another record length).
    pub fn rebase(&self, scheme: SamplingScheme) -> Result<Self> {
        if scheme == self.scheme {
            return Ok(self.clone());
        }
        match self.band {
            Some(b) => select_frequencies(&scheme, b.omega_min, b.omega_max, b.drop_zero_nyquist),
            None => Err(Error::config(
                "an index-based frequency selection cannot be moved to another grid",
            )),
        }
    }
}

/// Keeps indices with `omega_min <= |w_j| <= omega_max`; with
/// `drop_zero_nyquist` the zero and Nyquist indices are always removed.
pub fn select_frequencies(
    scheme: &SamplingScheme,
    omega_min: f64,
    omega_max: f64,
    drop_zero_nyquist: bool,
) -> Result<FrequencySelection> {
    if omega_min.is_nan() || omega_max.is_nan() || omega_min < 0.0 {
        return Err(Error::config("band limits must be non-negative numbers"));
    }
    if omega_min > omega_max {
        return Err(Error::config(format!("band [{omega_min}, {omega_max}] is empty")));
    }
    let nyq = scheme.nyquist();
    if omega_min > nyq {
        return Err(Error::config(format!(
            "lower band limit {omega_min} exceeds the Nyquist frequency {nyq}"
        )));
    }
    let (lo, hi) = scheme.index_range();
    // Tolerance on the band edges so that frequencies computed from the same
    // formula compare equal.
    let tol = 1e-12 * nyq;
    let indices: Vec<i64> = (lo..=hi)
        .filter(|&j| {
            let w = scheme.omega(j).abs();
            if drop_zero_nyquist && (j == 0 || scheme.is_nyquist(j)) {
                return false;
            }
            w >= omega_min - tol && w <= omega_max + tol
        })
        .collect();
    if indices.is_empty() {
        return Err(Error::config("frequency selection is empty"));
    }
    Ok(FrequencySelection {
        indices,
        scheme: *scheme,
        band: Some(Band {
            omega_min,
            omega_max,
            drop_zero_nyquist,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_frequencies_examples() {
        let f = fourier_frequencies(&SamplingScheme::new(1.0, 4).unwrap());
        let expected = [-PI / 2.0, 0.0, PI / 2.0, PI];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let f = fourier_frequencies(&SamplingScheme::new(0.78125, 2304).unwrap());
        assert_eq!(f.len(), 2304);
        assert!((f.last().unwrap() - 4.0212386).abs() < 1e-6);
        let f = fourier_frequencies(&SamplingScheme::new(1.0, 5).unwrap());
        assert_eq!(f.len(), 5);
        assert!((f[0] + 4.0 * PI / 5.0).abs() < 1e-15);
        assert!(f.iter().all(|w| (w.abs() - PI).abs() > 0.1));
    }

    #[test]
    fn periodogram_two_point() {
        let x = TimeSeries::new(vec![1.0, -1.0], 1.0).unwrap();
        let p = periodogram(&x).unwrap();
        // Grid j = 0, 1.
        assert!(p.at(0).abs() < 1e-15);
        assert!((p.at(1) - 1.0 / PI).abs() < 1e-15);
        let z = periodogram(&TimeSeries::new(vec![0.0; 7], 1.0).unwrap()).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parseval() {
        let vals: Vec<f64> = (0..101).map(|t| ((t * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let x = TimeSeries::new(vals, 0.4).unwrap();
        let p = periodogram(&x).unwrap();
        let lhs = p.values.iter().sum::<f64>() * 2.0 * PI / (101.0 * 0.4);
        let c = x.demeaned();
        let rhs = c.values().iter().map(|v| v * v).sum::<f64>() / 101.0;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn bartlett_cases() {
        let vals: Vec<f64> = (0..50).map(|t| (t as f64 * 0.7).sin() + 0.1 * t as f64).collect();
        let x = TimeSeries::new(vals.clone(), 1.0).unwrap();
        let b = bartlett(&x, 30).unwrap();
        let first = periodogram(&TimeSeries::new(vals[..30].to_vec(), 1.0).unwrap()).unwrap();
        assert_eq!(b.values, first.values);

        let seg: Vec<f64> = vals[..20].to_vec();
        let doubled: Vec<f64> = seg.iter().chain(seg.iter()).copied().collect();
        let b = bartlett(&TimeSeries::new(doubled, 1.0).unwrap(), 20).unwrap();
        let single = periodogram(&TimeSeries::new(seg, 1.0).unwrap()).unwrap();
        for (a, c) in b.values.iter().zip(&single.values) {
            assert!((a - c).abs() < 1e-14);
        }
        assert!(matches!(bartlett(&x, 51), Err(Error::Domain(_))));
        assert_eq!(default_segment_len(0.78125), 128);
    }

    #[test]
    fn selection_examples() {
        let s = SamplingScheme::new(1.0, 8).unwrap();
        let sel = select_frequencies(&s, 0.0, f64::INFINITY, true).unwrap();
        assert_eq!(sel.indices(), &[-3, -2, -1, 1, 2, 3]);
        assert_eq!(sel.dropped(), vec![0, 4]);

        let s = SamplingScheme::new(0.78125, 1536).unwrap();
        let sel = select_frequencies(&s, 0.3, 3.0, true).unwrap();
        for &j in sel.indices() {
            let w = s.omega(j).abs();
            assert!((0.3 - 1e-9..=3.0 + 1e-9).contains(&w));
        }
        let n_pos = sel.positive().count();
        assert_eq!(sel.len(), 2 * n_pos);

        assert!(matches!(select_frequencies(&s, 5.0, 6.0, true), Err(Error::Config(_))));
        assert!(select_frequencies(&s, 2.0, 1.0, true).is_err());
    }

    #[test]
    fn rebase_keeps_band() {
        let s = SamplingScheme::new(1.0, 64).unwrap();
        let sel = select_frequencies(&s, 0.5, 2.0, true).unwrap();
        let other = sel.rebase(SamplingScheme::new(1.0, 63).unwrap()).unwrap();
        assert_eq!(other.band(), sel.band());
        let custom = FrequencySelection::from_indices(s, vec![3]).unwrap();
        assert!(custom.rebase(SamplingScheme::new(1.0, 63).unwrap()).is_err());
        assert!(FrequencySelection::from_indices(s, vec![]).is_err());
        assert!(FrequencySelection::from_indices(s, vec![40]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn periodogram_even(vals in proptest::collection::vec(-10.0f64..10.0, 2..64)) {
                let x = TimeSeries::new(vals, 0.5).unwrap();
                let p = periodogram(&x).unwrap();
                let (lo, hi) = p.scheme.index_range();
                for j in lo..=hi {
                    if -j >= lo && -j <= hi {
                        prop_assert!((p.at(j) - p.at(-j)).abs() <= 1e-12 * (1.0 + p.at(j)));
                    }
                    prop_assert!(p.at(j) >= 0.0);
                }
            }

            #[test]
            fn selection_symmetric(n in 2usize..300, a in 0.0f64..3.0, width in 0.01f64..5.0) {
                let s = SamplingScheme::new(1.0, n).unwrap();
                if let Ok(sel) = select_frequencies(&s, a, a + width, true) {
                    let (lo, _) = s.index_range();
                    for &j in sel.indices() {
                        prop_assert!(j != 0);
                        if -j >= lo {
                            prop_assert!(sel.indices().binary_search(&-j).is_ok());
                        }
                    }
                }
            }
        }
    }
}
