//! Savitzky-Golay smoothing on a uniformly spaced sequence.
//!
//! Interior points use the centred convolution weights. The first and last
//! `window / 2` points are evaluated from a polynomial fitted to the first or
//! last `window` samples.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error("window length {0} must be odd and >= 1")]
    EvenWindow(usize),
    #[error("window length {window} must exceed polyorder {polyorder}")]
    PolyorderTooLarge { window: usize, polyorder: usize },
    #[error("sequence of {len} points is shorter than the window {window}")]
    TooShort { len: usize, window: usize },
}

/// Least-squares weights that evaluate the degree-`polyorder` fit through
/// `(positions[j], y_j)` at `at`.
pub fn fit_weights(positions: &[f64], polyorder: usize, at: f64) -> Vec<f64> {
    let cols = polyorder + 1;
    let v = DMatrix::from_fn(positions.len(), cols, |r, c| (positions[r] - at).powi(c as i32));
    let qr = v.qr();
    let q = qr.q();
    let r = qr.r();
    // Row 0 of R⁻¹ Qᵀ is the constant term of the fit, i.e. its value at `at`.
    let pinv = r
        .solve_upper_triangular(&q.transpose())
        .expect("Vandermonde matrix of distinct positions has full rank");
    pinv.row(0).iter().copied().collect()
}

/// Centred convolution weights for an odd window.
pub fn savgol_coefficients(window: usize, polyorder: usize) -> Result<Vec<f64>, SmoothingError> {
    check(window, polyorder)?;
    let half = (window / 2) as f64;
    let positions: Vec<f64> = (0..window).map(|j| j as f64 - half).collect();
    Ok(fit_weights(&positions, polyorder, 0.0))
}

fn check(window: usize, polyorder: usize) -> Result<(), SmoothingError> {
    if window.is_multiple_of(2) {
        return Err(SmoothingError::EvenWindow(window));
    }
    if window <= polyorder {
        return Err(SmoothingError::PolyorderTooLarge { window, polyorder });
    }
    Ok(())
}

pub fn savgol_smooth(values: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>, SmoothingError> {
    let centre = savgol_coefficients(window, polyorder)?;
    let n = values.len();
    if n < window {
        return Err(SmoothingError::TooShort { len: n, window });
    }
    let half = window / 2;
    let positions: Vec<f64> = (0..window).map(|j| j as f64).collect();
    let apply = |weights: &[f64], from: usize| -> f64 {
        weights.iter().zip(&values[from..from + window]).map(|(w, y)| w * y).sum()
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i < half {
            apply(&fit_weights(&positions, polyorder, i as f64), 0)
        } else if i + half >= n {
            let from = n - window;
            apply(&fit_weights(&positions, polyorder, (i - from) as f64), from)
        } else {
            apply(&centre, i - half)
        };
        out.push(y);
    }
    Ok(out)
}
