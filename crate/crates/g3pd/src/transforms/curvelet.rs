//! Discrete curvelet transform via frequency wrapping.
//!
//! Construction: FFT of the image, multiplication by smooth concentric
//! annular windows times angular wedge windows, wrapping of each windowed
//! wedge onto its own small periodic grid, and an inverse FFT per band.
//! The coarsest scale is a single lowpass band; the finest scale is a single
//! wavelet-style highpass band with no angular split; the number of angles
//! doubles every other scale.
//!
//! The windows form a partition of unity in squared magnitude and every
//! band's support embeds injectively into its wrapping grid, so the frame is
//! tight: the adjoint is the inverse and energy is preserved. Coefficients
//! are real because each wedge is paired with its antipodal twin and the
//! wrapping grid is chosen symmetric about the frequency origin.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::transforms::fft::Fft2;

/// Smooth C^3 step: 0 below 0, 1 above 1.
#[inline]
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
    }
}

/// One frequency-domain sample belonging to a band: position on the full
/// grid, wrapped position on the band grid, and the window value there.
#[derive(Debug, Clone, Copy)]
struct BandPoint {
    full: u32,
    small: u32,
    weight: f64,
}

/// Shape and sampling of a single band.
pub struct BandGeometry {
    /// 0 = lowpass, `scales - 1` = highpass, in between: curvelet annuli.
    pub scale: usize,
    /// Index of the antipodal wedge pair within its scale (0 for the
    /// lowpass/highpass bands).
    pub orientation: usize,
    /// Center angle of the wedge pair, in [0, pi); meaningless for the
    /// lowpass/highpass bands.
    pub center_angle: f64,
    pub rows: usize,
    pub cols: usize,
    points: Vec<BandPoint>,
    fft: Fft2,
    norm: f64,
}

impl BandGeometry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Frame metadata for one image size: band shapes, wedge windows, and the
/// index maps needed to apply the transform and its adjoint.
pub struct CurveletGeometry {
    height: usize,
    width: usize,
    scales: usize,
    angles_scale2: usize,
    bands: Vec<BandGeometry>,
    band_offsets: Vec<usize>,
    coeff_count: usize,
    fft_full: Fft2,
}

/// Number of angular wedges at curvelet scale `s` (1-based from the
/// lowpass): the count at the second-coarsest scale, doubling every other
/// scale toward finer scales.
fn angles_at_scale(angles_scale2: usize, s: usize) -> usize {
    angles_scale2 * (1usize << s.saturating_sub(1).div_ceil(2))
}

impl CurveletGeometry {
    pub fn new(height: usize, width: usize, scales: usize, angles_scale2: usize) -> Result<Self> {
        if scales < 2 {
            return Err(Error::Geometry(format!("need at least 2 scales, got {scales}")));
        }
        if angles_scale2 < 8 || angles_scale2 % 4 != 0 {
            return Err(Error::Geometry(format!(
                "angles at scale 2 must be a multiple of 4 and >= 8, got {angles_scale2}"
            )));
        }
        let min_dim = 1usize << scales;
        if height < min_dim || width < min_dim {
            return Err(Error::Geometry(format!(
                "{height}x{width} image too small for {scales} scales (need >= {min_dim})"
            )));
        }

        // Radial breakpoints rho[s] = pi / 2^(scales-1-s); the annulus at
        // scale s peaks at rho[s] and is supported on (rho[s-1], rho[s+1]).
        let rho: Vec<f64> = (0..scales)
            .map(|s| PI / (1u64 << (scales - 1 - s)) as f64)
            .collect();

        let radial = |s: usize, r: f64| -> f64 {
            if s == 0 {
                if r <= rho[0] {
                    1.0
                } else if r < rho[1] {
                    (0.5 * PI * smooth_step((r - rho[0]) / (rho[1] - rho[0]))).cos()
                } else {
                    0.0
                }
            } else if s == scales - 1 {
                if r >= rho[s] {
                    1.0
                } else if r > rho[s - 1] {
                    (0.5 * PI * smooth_step((r - rho[s - 1]) / (rho[s] - rho[s - 1]))).sin()
                } else {
                    0.0
                }
            } else if r <= rho[s - 1] || r >= rho[s + 1] {
                0.0
            } else if r < rho[s] {
                (0.5 * PI * smooth_step((r - rho[s - 1]) / (rho[s] - rho[s - 1]))).sin()
            } else {
                (0.5 * PI * smooth_step((r - rho[s]) / (rho[s + 1] - rho[s]))).cos()
            }
        };

        // Band bookkeeping: per band a list of (signed frequency coords,
        // weight); boxes and wrap maps are derived afterwards.
        struct Raw {
            scale: usize,
            orientation: usize,
            center_angle: f64,
            pts: Vec<(i64, i64, f64)>,
        }
        let mut raw: Vec<Raw> = Vec::new();
        raw.push(Raw { scale: 0, orientation: 0, center_angle: 0.0, pts: Vec::new() });
        let mut band_of: HashMap<(usize, usize), usize> = HashMap::new();
        band_of.insert((0, 0), 0);
        for s in 1..scales - 1 {
            let n = angles_at_scale(angles_scale2, s);
            for pair in 0..n / 2 {
                band_of.insert((s, pair), raw.len());
                raw.push(Raw {
                    scale: s,
                    orientation: pair,
                    center_angle: (pair as f64) * 2.0 * PI / n as f64,
                    pts: Vec::new(),
                });
            }
        }
        let highpass_idx = raw.len();
        band_of.insert((scales - 1, 0), highpass_idx);
        raw.push(Raw { scale: scales - 1, orientation: 0, center_angle: 0.0, pts: Vec::new() });

        const WEIGHT_FLOOR: f64 = 1e-12;

        for row in 0..height {
            let mr = signed_freq(row, height);
            let wr = 2.0 * PI * mr as f64 / height as f64;
            for col in 0..width {
                let mc = signed_freq(col, width);
                let wc = 2.0 * PI * mc as f64 / width as f64;
                let r = (wr * wr + wc * wc).sqrt();
                let lp = radial(0, r);
                if lp > WEIGHT_FLOOR {
                    raw[0].pts.push((mr, mc, lp));
                }
                let hp = radial(scales - 1, r);
                if hp > WEIGHT_FLOOR {
                    raw[highpass_idx].pts.push((mr, mc, hp));
                }
                for s in 1..scales - 1 {
                    let ann = radial(s, r);
                    if ann <= WEIGHT_FLOOR {
                        continue;
                    }
                    let n = angles_at_scale(angles_scale2, s);
                    let dtheta = 2.0 * PI / n as f64;
                    let theta = wr.atan2(wc).rem_euclid(2.0 * PI);
                    let l0 = (theta / dtheta).floor() as i64;
                    for cand in [l0, l0 + 1] {
                        let l = cand.rem_euclid(n as i64) as usize;
                        let center = l as f64 * dtheta;
                        let d = ((theta - center + PI).rem_euclid(2.0 * PI) - PI).abs() / dtheta;
                        if d >= 1.0 {
                            continue;
                        }
                        let v = (0.5 * PI * smooth_step(d)).cos();
                        let w = ann * v;
                        if w > WEIGHT_FLOOR {
                            let band = band_of[&(s, l % (n / 2))];
                            raw[band].pts.push((mr, mc, w));
                        }
                    }
                }
            }
        }

        // Derive per-band wrapping grids. Wedge bands use the symmetric
        // bounding box with odd side lengths, which keeps the wrapped
        // spectrum conjugate-symmetric (real coefficients) and alias-free.
        // The highpass band covers the Nyquist rows and keeps the full grid.
        let mut bands = Vec::with_capacity(raw.len());
        let mut band_offsets = Vec::with_capacity(raw.len());
        let mut coeff_count = 0usize;
        for (i, rb) in raw.into_iter().enumerate() {
            let (rows, cols, points) = if i == highpass_idx {
                let pts = rb
                    .pts
                    .iter()
                    .map(|&(mr, mc, w)| BandPoint {
                        full: full_index(mr, mc, height, width) as u32,
                        small: full_index(mr, mc, height, width) as u32,
                        weight: w,
                    })
                    .collect();
                (height, width, pts)
            } else {
                let a = rb.pts.iter().map(|p| p.0.abs()).max().unwrap_or(0);
                let b = rb.pts.iter().map(|p| p.1.abs()).max().unwrap_or(0);
                let rows = (2 * a + 1) as usize;
                let cols = (2 * b + 1) as usize;
                let pts = rb
                    .pts
                    .iter()
                    .map(|&(mr, mc, w)| BandPoint {
                        full: full_index(mr, mc, height, width) as u32,
                        small: (mr.rem_euclid(rows as i64) as usize * cols
                            + mc.rem_euclid(cols as i64) as usize)
                            as u32,
                        weight: w,
                    })
                    .collect();
                (rows, cols, pts)
            };
            band_offsets.push(coeff_count);
            coeff_count += rows * cols;
            bands.push(BandGeometry {
                scale: rb.scale,
                orientation: rb.orientation,
                center_angle: rb.center_angle,
                rows,
                cols,
                points,
                fft: Fft2::new(rows, cols),
                norm: 1.0 / ((rows * cols * height * width) as f64).sqrt(),
            });
        }

        Ok(Self {
            height,
            width,
            scales,
            angles_scale2,
            bands,
            band_offsets,
            coeff_count,
            fft_full: Fft2::new(height, width),
        })
    }

    /// Memoized constructor; geometries are immutable and shared.
    pub fn cached(height: usize, width: usize, scales: usize, angles_scale2: usize) -> Result<Arc<Self>> {
        static CACHE: Lazy<Mutex<HashMap<(usize, usize, usize, usize), Arc<CurveletGeometry>>>> =
            Lazy::new(|| Mutex::new(HashMap::new()));
        let key = (height, width, scales, angles_scale2);
        if let Some(g) = CACHE.lock().unwrap().get(&key) {
            return Ok(g.clone());
        }
        let built = Arc::new(Self::new(height, width, scales, angles_scale2)?);
        CACHE.lock().unwrap().insert(key, built.clone());
        Ok(built)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn angles_scale2(&self) -> usize {
        self.angles_scale2
    }

    /// Total number of real coefficients, the sum over band grids.
    pub fn coeff_count(&self) -> usize {
        self.coeff_count
    }

    pub fn bands(&self) -> &[BandGeometry] {
        &self.bands
    }

    pub fn band_offset(&self, band: usize) -> usize {
        self.band_offsets[band]
    }

    fn compatible(&self, other: &CurveletGeometry) -> bool {
        std::ptr::eq(self, other)
            || (self.height == other.height
                && self.width == other.width
                && self.scales == other.scales
                && self.angles_scale2 == other.angles_scale2)
    }

    /// Analysis: image -> coefficient pyramid.
    pub fn forward(self: &Arc<Self>, img: &RealImage) -> Result<CurveletCoeffs> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::Geometry(format!(
                "image {}x{} does not match geometry {}x{}",
                img.height(),
                img.width(),
                self.height,
                self.width
            )));
        }
        let mut spec: Vec<Complex<f64>> =
            img.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft_full.forward_inplace(&mut spec);

        let mut data = vec![0.0f64; self.coeff_count];
        for (band, offset) in self.bands.iter().zip(&self.band_offsets) {
            let mut buf = vec![Complex::new(0.0, 0.0); band.len()];
            for p in &band.points {
                buf[p.small as usize] += spec[p.full as usize] * p.weight;
            }
            band.fft.inverse_unnorm_inplace(&mut buf);
            let out = &mut data[*offset..*offset + band.len()];
            for (dst, c) in out.iter_mut().zip(&buf) {
                *dst = c.re * band.norm;
            }
        }
        Ok(CurveletCoeffs {
            geometry: self.clone(),
            data,
        })
    }

    /// Adjoint of [`CurveletGeometry::forward`]; inverts it because the frame
    /// is tight.
    pub fn adjoint(&self, coeffs: &CurveletCoeffs) -> Result<RealImage> {
        if !self.compatible(&coeffs.geometry) {
            return Err(Error::Geometry(
                "coefficient geometry does not match this transform".into(),
            ));
        }
        let mut spec = vec![Complex::new(0.0, 0.0); self.height * self.width];
        for (band, offset) in self.bands.iter().zip(&self.band_offsets) {
            let src = &coeffs.data[*offset..*offset + band.len()];
            let mut buf: Vec<Complex<f64>> =
                src.iter().map(|&v| Complex::new(v, 0.0)).collect();
            band.fft.forward_inplace(&mut buf);
            for p in &band.points {
                spec[p.full as usize] += buf[p.small as usize] * (p.weight * band.norm);
            }
        }
        self.fft_full.inverse_unnorm_inplace(&mut spec);
        Ok(RealImage::from_vec_unchecked(
            self.height,
            self.width,
            spec.iter().map(|c| c.re).collect(),
        ))
    }
}

#[inline]
fn signed_freq(idx: usize, n: usize) -> i64 {
    if idx <= (n - 1) / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

#[inline]
fn full_index(mr: i64, mc: i64, height: usize, width: usize) -> usize {
    let r = mr.rem_euclid(height as i64) as usize;
    let c = mc.rem_euclid(width as i64) as usize;
    r * width + c
}

/// Multiscale, multi-orientation coefficient pyramid. Bands are stored
/// flat in geometry order (lowpass, then each scale coarse to fine with its
/// orientations, then highpass).
#[derive(Clone)]
pub struct CurveletCoeffs {
    geometry: Arc<CurveletGeometry>,
    data: Vec<f64>,
}

impl CurveletCoeffs {
    pub fn zeros(geometry: Arc<CurveletGeometry>) -> Self {
        let n = geometry.coeff_count();
        Self {
            geometry,
            data: vec![0.0; n],
        }
    }

    pub fn geometry(&self) -> &Arc<CurveletGeometry> {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn band(&self, i: usize) -> &[f64] {
        let off = self.geometry.band_offset(i);
        let len = self.geometry.bands()[i].len();
        &self.data[off..off + len]
    }

    pub fn same_geometry(&self, other: &CurveletCoeffs) -> bool {
        self.geometry.compatible(&other.geometry)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CurveletCoeffs {
        Self {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `self + a * other`.
    pub fn axpy(&self, a: f64, other: &CurveletCoeffs) -> CurveletCoeffs {
        debug_assert!(self.same_geometry(other));
        Self {
            geometry: self.geometry.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| x + a * y)
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> CurveletCoeffs {
        self.map(|v| a * v)
    }

    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &CurveletCoeffs) -> f64 {
        debug_assert!(self.same_geometry(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Length-prefixed binary dump: band count, then per band its shape and
    /// raw little-endian doubles. A debugging aid, not a stable format.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        let bands = self.geometry.bands();
        w.write_all(&(bands.len() as u32).to_le_bytes())?;
        for (i, band) in bands.iter().enumerate() {
            w.write_all(&(band.rows as u32).to_le_bytes())?;
            w.write_all(&(band.cols as u32).to_le_bytes())?;
            for &v in self.band(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`CurveletCoeffs::write_binary`], validating
    /// the band layout against `geometry`.
    pub fn read_binary(geometry: Arc<CurveletGeometry>, mut r: impl Read) -> Result<Self> {
        let bad = |reason: &str| Error::Geometry(format!("coefficient stream: {reason}"));
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf).map_err(|_| bad("truncated band count"))?;
        let nbands = u32::from_le_bytes(u32buf) as usize;
        if nbands != geometry.bands().len() {
            return Err(bad(&format!(
                "band count {nbands} does not match geometry ({})",
                geometry.bands().len()
            )));
        }
        let mut data = vec![0.0f64; geometry.coeff_count()];
        for (i, band) in geometry.bands().iter().enumerate() {
            r.read_exact(&mut u32buf).map_err(|_| bad("truncated shape"))?;
            let rows = u32::from_le_bytes(u32buf) as usize;
            r.read_exact(&mut u32buf).map_err(|_| bad("truncated shape"))?;
            let cols = u32::from_le_bytes(u32buf) as usize;
            if rows != band.rows || cols != band.cols {
                return Err(bad(&format!(
                    "band {i} shape {rows}x{cols} does not match geometry {}x{}",
                    band.rows, band.cols
                )));
            }
            let off = geometry.band_offset(i);
            let mut f64buf = [0u8; 8];
            for v in &mut data[off..off + rows * cols] {
                r.read_exact(&mut f64buf).map_err(|_| bad("truncated samples"))?;
                *v = f64::from_le_bytes(f64buf);
            }
        }
        Ok(Self { geometry, data })
    }
}

/// Analysis with a memoized geometry for this image size.
pub fn curvelet_forward(img: &RealImage, scales: usize, angles_scale2: usize) -> Result<CurveletCoeffs> {
    let geom = CurveletGeometry::cached(img.height(), img.width(), scales, angles_scale2)?;
    geom.forward(img)
}

/// Adjoint (and, by tightness, inverse) of [`curvelet_forward`].
pub fn curvelet_adjoint(coeffs: &CurveletCoeffs) -> Result<RealImage> {
    coeffs.geometry.clone().adjoint(coeffs)
}
