//! Thread-local FFT planning.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// In-place unnormalised forward transform, `X_k = sum_t x_t e^{-2 pi i k t / n}`.
pub(crate) fn forward_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        forward(buf.len()).process(buf);
    }
}

/// In-place unnormalised inverse transform, `x_t = sum_k X_k e^{+2 pi i k t / n}`.
pub(crate) fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        inverse(buf.len()).process(buf);
    }
}
