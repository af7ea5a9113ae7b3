//! Deterministic synthetic inputs for tests, demos, and the acceptance
//! suite. All randomness is ChaCha-seeded so outputs are identical across
//! platforms and runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{RealImage, SegmentationMask};

/// Standard normal samples via Box-Muller.
pub fn gaussian_noise(height: usize, width: usize, std: f64, seed: u64) -> RealImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealImage::from_fn(height, width, |_, _| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

#[derive(Debug, Clone)]
pub struct SinusoidDiskParams {
    pub height: usize,
    pub width: usize,
    /// Disk radius in pixels, centered.
    pub radius: f64,
    /// Ridge period along the wave direction, pixels.
    pub period: f64,
    /// Wave direction in radians.
    pub angle: f64,
    pub amplitude: f64,
    pub background: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SinusoidDiskParams {
    fn default() -> Self {
        Self {
            height: 256,
            width: 256,
            radius: 40.0,
            period: 8.0,
            angle: 0.35,
            amplitude: 0.06,
            background: 0.5,
            noise_std: 0.02,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinusoidDiskFixture {
    pub image: RealImage,
    /// The true disk support.
    pub truth: SegmentationMask,
    pub params: SinusoidDiskParams,
}

/// Oriented sinusoid confined to a centered disk over a flat background,
/// plus Gaussian noise everywhere.
pub fn sinusoid_disk(params: &SinusoidDiskParams) -> SinusoidDiskFixture {
    let p = params.clone();
    let (h, w) = (p.height, p.width);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let noise = gaussian_noise(h, w, p.noise_std, p.seed);
    let (dir_y, dir_x) = p.angle.sin_cos();
    let mut truth = SegmentationMask::zeros(h, w);
    let image = RealImage::from_fn(h, w, |r, c| {
        let dy = r as f64 - cy;
        let dx = c as f64 - cx;
        let inside = (dy * dy + dx * dx).sqrt() <= p.radius;
        let mut v = p.background + noise.get(r, c);
        if inside {
            truth.set(r, c, 1);
            let phase = 2.0 * std::f64::consts::PI * (dx * dir_x + dy * dir_y) / p.period;
            v += p.amplitude * phase.sin();
        }
        v
    });
    SinusoidDiskFixture { image, truth, params: p }
}

/// Two-level cartoon: a centered square of `inner` on an `outer` background,
/// with optional noise.
pub fn two_level_square(
    height: usize,
    width: usize,
    outer: f64,
    inner: f64,
    noise_std: f64,
    seed: u64,
) -> (RealImage, RealImage) {
    let clean = RealImage::from_fn(height, width, |r, c| {
        let in_r = r >= height / 4 && r < height - height / 4;
        let in_c = c >= width / 4 && c < width - width / 4;
        if in_r && in_c {
            inner
        } else {
            outer
        }
    });
    let noisy = if noise_std > 0.0 {
        clean.add(&gaussian_noise(height, width, noise_std, seed))
    } else {
        clean.clone()
    };
    (clean, noisy)
}

/// Flat background with one small disk of a different level.
pub fn small_disk(
    height: usize,
    width: usize,
    radius: f64,
    background: f64,
    disk_level: f64,
) -> RealImage {
    let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    RealImage::from_fn(height, width, |r, c| {
        let dy = r as f64 - cy;
        let dx = c as f64 - cx;
        if (dy * dy + dx * dx).sqrt() <= radius {
            disk_level
        } else {
            background
        }
    })
}
