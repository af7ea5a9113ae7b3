//! One analysis level of the CDF 9/7 biorthogonal filter bank.
//!
//! Lifting implementation of the standard irreversible 9/7 transform:
//! separable, whole-sample symmetric boundary extension, lowpass scaled so a
//! constant signal maps to `sqrt(2) * c`. The HH band feeds the noise
//! estimator, whose 0.6745 median factor assumes the HH response to white
//! noise keeps its standard deviation (this normalization gives gain 0.983).

use crate::error::{Error, Result};
use crate::image::RealImage;

const ALPHA: f64 = -1.586_134_342_069_364_8;
const BETA: f64 = -0.052_980_118_571_885_6;
const GAMMA: f64 = 0.882_911_075_541_187_5;
const DELTA: f64 = 0.443_506_852_051_114_2;
const KAPPA: f64 = 1.149_604_398_860_241_8;

/// The four subbands of one analysis level. Naming is (row filter, column
/// filter): `lh` is lowpass along rows and highpass along columns, `hh` is
/// the diagonal band.
#[derive(Debug, Clone)]
pub struct Dwt97Bands {
    pub ll: RealImage,
    pub lh: RealImage,
    pub hl: RealImage,
    pub hh: RealImage,
}

#[inline]
fn sym(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// One 1-D analysis step in place on interleaved samples; even indices end up
/// holding lowpass, odd highpass.
fn lift_forward(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 2);
    for step in 0..4 {
        let (coef, start) = match step {
            0 => (ALPHA, 1),
            1 => (BETA, 0),
            2 => (GAMMA, 1),
            _ => (DELTA, 0),
        };
        for i in (start..n).step_by(2) {
            let a = x[sym(i as isize - 1, n)];
            let b = x[sym(i as isize + 1, n)];
            x[i] += coef * (a + b);
        }
    }
    for i in (0..n).step_by(2) {
        x[i] *= KAPPA;
    }
    for i in (1..n).step_by(2) {
        x[i] /= KAPPA;
    }
}

fn lift_inverse(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 2);
    for i in (0..n).step_by(2) {
        x[i] /= KAPPA;
    }
    for i in (1..n).step_by(2) {
        x[i] *= KAPPA;
    }
    for step in 0..4 {
        let (coef, start) = match step {
            0 => (DELTA, 0),
            1 => (GAMMA, 1),
            2 => (BETA, 0),
            _ => (ALPHA, 1),
        };
        for i in (start..n).step_by(2) {
            let a = x[sym(i as isize - 1, n)];
            let b = x[sym(i as isize + 1, n)];
            x[i] -= coef * (a + b);
        }
    }
}

/// Splits interleaved samples into (lowpass, highpass) halves; lowpass gets
/// the ceil half for odd lengths.
fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = x.iter().step_by(2).copied().collect();
    let hi = x.iter().skip(1).step_by(2).copied().collect();
    (lo, hi)
}

fn interleave(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; lo.len() + hi.len()];
    for (i, &v) in lo.iter().enumerate() {
        out[2 * i] = v;
    }
    for (i, &v) in hi.iter().enumerate() {
        out[2 * i + 1] = v;
    }
    out
}

/// One 2-D analysis level. Requires both dimensions >= 2.
pub fn dwt97_level1(img: &RealImage) -> Result<Dwt97Bands> {
    let (h, w) = (img.height(), img.width());
    if h < 2 || w < 2 {
        return Err(Error::InvalidArgument(format!(
            "dwt97 needs both dimensions >= 2, got {h}x{w}"
        )));
    }
    let (wl, wh) = (w.div_ceil(2), w / 2);
    let (hl_n, hh_n) = (h.div_ceil(2), h / 2);

    // Rows first: produces [L | H] halves per row.
    let mut row_lo = vec![0.0; h * wl];
    let mut row_hi = vec![0.0; h * wh];
    let mut buf = vec![0.0; w];
    for r in 0..h {
        buf.copy_from_slice(&img.data()[r * w..(r + 1) * w]);
        lift_forward(&mut buf);
        let (lo, hi) = deinterleave(&buf);
        row_lo[r * wl..(r + 1) * wl].copy_from_slice(&lo);
        row_hi[r * wh..(r + 1) * wh].copy_from_slice(&hi);
    }

    // Columns of each half.
    let mut col = vec![0.0; h];
    let mut split_cols = |half: &[f64], cols: usize| -> (RealImage, RealImage) {
        let mut lo_img = RealImage::zeros(hl_n, cols.max(1));
        let mut hi_img = RealImage::zeros(hh_n.max(1), cols.max(1));
        let mut lo_img_data = vec![0.0; hl_n * cols];
        let mut hi_img_data = vec![0.0; hh_n * cols];
        for c in 0..cols {
            for r in 0..h {
                col[r] = half[r * cols + c];
            }
            lift_forward(&mut col);
            let (lo, hi) = deinterleave(&col);
            for (r, &v) in lo.iter().enumerate() {
                lo_img_data[r * cols + c] = v;
            }
            for (r, &v) in hi.iter().enumerate() {
                hi_img_data[r * cols + c] = v;
            }
        }
        if cols > 0 {
            lo_img = RealImage::from_vec_unchecked(hl_n, cols, lo_img_data);
            hi_img = RealImage::from_vec_unchecked(hh_n, cols, hi_img_data);
        }
        (lo_img, hi_img)
    };

    let (ll, hl) = split_cols(&row_lo, wl);
    let (lh, hh) = split_cols(&row_hi, wh);
    Ok(Dwt97Bands { ll, lh, hl, hh })
}

/// Inverse of [`dwt97_level1`]; reconstructs to the original `h x w` size.
pub fn idwt97_level1(bands: &Dwt97Bands) -> Result<RealImage> {
    let wl = bands.ll.width();
    let wh = bands.lh.width();
    let hl_n = bands.ll.height();
    let hh_n = bands.hl.height();
    let h = hl_n + hh_n;
    let w = wl + wh;
    if bands.lh.height() != hl_n || bands.hl.width() != wl || bands.hh.width() != wh
        || bands.hh.height() != hh_n
    {
        return Err(Error::DimensionMismatch(
            "inconsistent subband shapes".into(),
        ));
    }

    // Invert columns of each half.
    let mut row_lo = vec![0.0; h * wl];
    let mut row_hi = vec![0.0; h * wh];
    let merge_cols = |lo: &RealImage, hi: &RealImage, half: &mut [f64], cols: usize| {
        for c in 0..cols {
            let locol: Vec<f64> = (0..lo.height()).map(|r| lo.get(r, c)).collect();
            let hicol: Vec<f64> = (0..hi.height()).map(|r| hi.get(r, c)).collect();
            let mut col = interleave(&locol, &hicol);
            lift_inverse(&mut col);
            for (r, &v) in col.iter().enumerate() {
                half[r * cols + c] = v;
            }
        }
    };
    merge_cols(&bands.ll, &bands.hl, &mut row_lo, wl);
    merge_cols(&bands.lh, &bands.hh, &mut row_hi, wh);

    // Invert rows.
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let lo = &row_lo[r * wl..(r + 1) * wl];
        let hi = &row_hi[r * wh..(r + 1) * wh];
        let mut row = interleave(lo, hi);
        lift_inverse(&mut row);
        out[r * w..(r + 1) * w].copy_from_slice(&row);
    }
    Ok(RealImage::from_vec_unchecked(h, w, out))
}
