//! 2-D FFT on row-major buffers.
//!
//! Convention: `fft2` is unnormalized; `ifft2` applies the `1/(N1*N2)` factor,
//! so `ifft2(fft2(x)) == x`. The unnormalized inverse (`ifft2_unnorm`) is the
//! exact adjoint of `fft2`, which the curvelet transform relies on.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::image::RealImage;

/// Complex matrix of frequency-domain samples; same layout as [`RealImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex<f64>>,
}

impl ComplexImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_real(img: &RealImage) -> Self {
        Self {
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| Complex::new(v, 0.0)).collect(),
        }
    }

    /// Real parts as an image; imaginary parts are discarded.
    pub fn re(&self) -> RealImage {
        RealImage::from_vec_unchecked(
            self.height,
            self.width,
            self.data.iter().map(|c| c.re).collect(),
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Planned 2-D FFT for one grid size. Plans are cheap to clone (Arc inside)
/// and safe to share across threads.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft(cols, FftDirection::Forward),
            row_inv: planner.plan_fft(cols, FftDirection::Inverse),
            col_fwd: planner.plan_fft(rows, FftDirection::Forward),
            col_inv: planner.plan_fft(rows, FftDirection::Inverse),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, data: &mut [Complex<f64>], forward: bool) {
        assert_eq!(data.len(), self.rows * self.cols);
        let row_plan = if forward { &self.row_fwd } else { &self.row_inv };
        let col_plan = if forward { &self.col_fwd } else { &self.col_inv };
        let mut scratch =
            vec![Complex::new(0.0, 0.0); row_plan.get_inplace_scratch_len().max(col_plan.get_inplace_scratch_len())];
        for r in 0..self.rows {
            row_plan.process_with_scratch(&mut data[r * self.cols..(r + 1) * self.cols], &mut scratch);
        }
        // Columns via transpose, row FFTs, transpose back.
        let mut t = transpose(data, self.rows, self.cols);
        for c in 0..self.cols {
            col_plan.process_with_scratch(&mut t[c * self.rows..(c + 1) * self.rows], &mut scratch);
        }
        let back = transpose(&t, self.cols, self.rows);
        data.copy_from_slice(&back);
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward_inplace(&self, data: &mut [Complex<f64>]) {
        self.apply(data, true);
    }

    /// Unnormalized inverse DFT (the adjoint of `forward_inplace`), in place.
    pub fn inverse_unnorm_inplace(&self, data: &mut [Complex<f64>]) {
        self.apply(data, false);
    }
}

fn transpose(data: &[Complex<f64>], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Unnormalized 2-D DFT of a real image.
pub fn fft2(img: &RealImage) -> ComplexImage {
    let mut spec = ComplexImage::from_real(img);
    Fft2::new(img.height(), img.width()).forward_inplace(&mut spec.data);
    spec
}

/// Inverse 2-D DFT with the `1/(N1*N2)` normalization.
pub fn ifft2(spec: &ComplexImage) -> ComplexImage {
    let mut out = spec.clone();
    Fft2::new(spec.height, spec.width).inverse_unnorm_inplace(&mut out.data);
    let scale = 1.0 / (spec.height * spec.width) as f64;
    for c in &mut out.data {
        *c *= scale;
    }
    out
}
