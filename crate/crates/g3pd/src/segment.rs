//! Foreground segmentation from the texture part.
//!
//! The texture image is binarized on its exact zero set (the pointwise
//! shrink in the solver produces true zeros), then cleaned up at block
//! level: blocks with enough nonzero pixels seed the foreground, a
//! neighbor vote smooths the block grid, the largest 4-connected component
//! is kept and its enclosed holes are filled.

use crate::error::{Error, Result};
use crate::image::{RealImage, SegmentationMask};
use crate::solver::{decompose_g3pd, Diagnostics, SolverConfig};

/// Block-level morphology parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphologyConfig {
    /// Block window size in pixels; odd.
    pub s: usize,
    /// Nonzero-pixel count threshold: a block seeds foreground when its
    /// count exceeds `t`.
    pub t: usize,
    /// Neighbor-vote threshold out of the 8 surrounding blocks.
    pub b: usize,
    /// Cap on smoothing sweeps.
    pub max_smoothing_passes: usize,
}

impl Default for MorphologyConfig {
    fn default() -> Self {
        Self {
            s: 9,
            t: 5,
            b: 6,
            max_smoothing_passes: 10,
        }
    }
}

impl MorphologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.s % 2 == 0 {
            return Err(Error::Config(format!("s must be a positive odd integer, got {}", self.s)));
        }
        if self.t == 0 {
            return Err(Error::Config("t must be positive".into()));
        }
        if self.b > 8 {
            return Err(Error::Config(format!("b must lie in [0, 8], got {}", self.b)));
        }
        if self.max_smoothing_passes == 0 {
            return Err(Error::Config("max_smoothing_passes must be positive".into()));
        }
        Ok(())
    }
}

/// Marks the non-zero pixels of the texture image. No tolerance: the zero
/// set is exact by construction and invariant under positive scaling.
pub fn binarize_texture(v: &RealImage) -> SegmentationMask {
    let data = v.data().iter().map(|&x| u8::from(x != 0.0)).collect();
    SegmentationMask::new(v.height(), v.width(), data).expect("binary by construction")
}

/// Block grid of nonzero-pixel counts; partial blocks at the right/bottom
/// edges are allowed.
struct BlockGrid {
    rows: usize,
    cols: usize,
    counts: Vec<usize>,
}

impl BlockGrid {
    fn from_mask(mask: &SegmentationMask, s: usize) -> Self {
        let rows = mask.height().div_ceil(s);
        let cols = mask.width().div_ceil(s);
        let mut counts = vec![0usize; rows * cols];
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask.get(r, c) == 1 {
                    counts[(r / s) * cols + c / s] += 1;
                }
            }
        }
        Self { rows, cols, counts }
    }
}

/// One synchronous neighbor-vote sweep. A block turns on when at least `b`
/// of its 8 neighbors (out-of-grid counts as background) are foreground and
/// turns off when at most `8 - b` are; otherwise it keeps its value.
fn smooth_pass(grid: &[u8], rows: usize, cols: usize, b: usize) -> Vec<u8> {
    let mut next = grid.to_vec();
    for r in 0..rows {
        for c in 0..cols {
            let mut on = 0usize;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let nr = r as i64 + dr;
                    let nc = c as i64 + dc;
                    if nr >= 0 && nr < rows as i64 && nc >= 0 && nc < cols as i64 {
                        on += grid[nr as usize * cols + nc as usize] as usize;
                    }
                }
            }
            let i = r * cols + c;
            if on >= b {
                next[i] = 1;
            } else if on <= 8 - b {
                next[i] = 0;
            }
        }
    }
    next
}

/// Largest 4-connected foreground component; ties broken by the smallest
/// top-left (row-major) block index. Everything else becomes background.
fn keep_largest_component(grid: &mut [u8], rows: usize, cols: usize) {
    let mut label = vec![usize::MAX; grid.len()];
    let mut sizes: Vec<(usize, usize)> = Vec::new(); // (size, first index)
    for start in 0..grid.len() {
        if grid[start] == 0 || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let (r, c) = (i / cols, i % cols);
            let mut push = |nr: usize, nc: usize| {
                let j = nr * cols + nc;
                if grid[j] == 1 && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(r - 1, c);
            }
            if r + 1 < rows {
                push(r + 1, c);
            }
            if c > 0 {
                push(r, c - 1);
            }
            if c + 1 < cols {
                push(r, c + 1);
            }
        }
        sizes.push((size, start));
    }
    if sizes.is_empty() {
        return;
    }
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(id, _)| id)
        .expect("nonempty");
    for i in 0..grid.len() {
        grid[i] = u8::from(label[i] == best);
    }
}

/// Fills enclosed background holes: background components (8-connected,
/// the dual of the 4-connected foreground) that do not touch the grid
/// border become foreground.
fn fill_holes(grid: &mut [u8], rows: usize, cols: usize) {
    let mut reachable = vec![false; grid.len()];
    let mut stack = Vec::new();
    let seed = |i: usize, stack: &mut Vec<usize>, reachable: &mut Vec<bool>, grid: &[u8]| {
        if grid[i] == 0 && !reachable[i] {
            reachable[i] = true;
            stack.push(i);
        }
    };
    for c in 0..cols {
        seed(c, &mut stack, &mut reachable, grid);
        seed((rows - 1) * cols + c, &mut stack, &mut reachable, grid);
    }
    for r in 0..rows {
        seed(r * cols, &mut stack, &mut reachable, grid);
        seed(r * cols + cols - 1, &mut stack, &mut reachable, grid);
    }
    while let Some(i) = stack.pop() {
        let (r, c) = (i / cols, i % cols);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let nr = r as i64 + dr;
                let nc = c as i64 + dc;
                if nr >= 0 && nr < rows as i64 && nc >= 0 && nc < cols as i64 {
                    let j = nr as usize * cols + nc as usize;
                    if grid[j] == 0 && !reachable[j] {
                        reachable[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    for i in 0..grid.len() {
        if grid[i] == 0 && !reachable[i] {
            grid[i] = 1;
        }
    }
}

/// Block-level cleanup of a pixel binarization into a single-component ROI
/// mask. The smooth/keep/fill sequence is iterated to a fixpoint (bounded
/// by `max_smoothing_passes` rounds) so the operation is idempotent on its
/// own output.
pub fn block_morphology(binary: &SegmentationMask, cfg: &MorphologyConfig) -> Result<SegmentationMask> {
    cfg.validate()?;
    if binary.height() < cfg.s || binary.width() < cfg.s {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} smaller than one {}x{} block",
            binary.height(),
            binary.width(),
            cfg.s,
            cfg.s
        )));
    }
    let blocks = BlockGrid::from_mask(binary, cfg.s);
    let (rows, cols) = (blocks.rows, blocks.cols);
    let mut grid: Vec<u8> = blocks.counts.iter().map(|&n| u8::from(n > cfg.t)).collect();

    for _round in 0..cfg.max_smoothing_passes {
        let before_round = grid.clone();
        for _pass in 0..cfg.max_smoothing_passes {
            let next = smooth_pass(&grid, rows, cols, cfg.b);
            let stable = next == grid;
            grid = next;
            if stable {
                break;
            }
        }
        keep_largest_component(&mut grid, rows, cols);
        fill_holes(&mut grid, rows, cols);
        if grid == before_round {
            break;
        }
    }

    // Expand blocks back to pixel resolution.
    let mut mask = SegmentationMask::zeros(binary.height(), binary.width());
    for r in 0..binary.height() {
        for c in 0..binary.width() {
            mask.set(r, c, grid[(r / cfg.s) * cols + c / cfg.s]);
        }
    }
    Ok(mask)
}

/// Full pipeline: decomposition, binarization of the texture part, block
/// morphology. The mask has the input dimensions.
pub fn segment(
    f: &RealImage,
    solver_cfg: &SolverConfig,
    morph_cfg: &MorphologyConfig,
) -> Result<(SegmentationMask, RealImage, Diagnostics)> {
    let (_, v, _, diag) = decompose_g3pd(f, solver_cfg)?;
    let mask = block_morphology(&binarize_texture(&v), morph_cfg)?;
    Ok((mask, v, diag))
}

/// Copy of the input with the ROI boundary drawn at a fixed intensity, for
/// visual inspection. Boundary pixels are foreground pixels 4-adjacent to
/// background or to the image border.
pub fn overlay_boundary(f: &RealImage, mask: &SegmentationMask, intensity: f64) -> Result<RealImage> {
    if f.height() != mask.height() || f.width() != mask.width() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            f.height(),
            f.width(),
            mask.height(),
            mask.width()
        )));
    }
    let (h, w) = (f.height(), f.width());
    let mut out = f.clone();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == 0 {
                continue;
            }
            let edge = r == 0
                || r == h - 1
                || c == 0
                || c == w - 1
                || mask.get(r - 1, c) == 0
                || mask.get(r + 1, c) == 0
                || mask.get(r, c - 1) == 0
                || mask.get(r, c + 1) == 0;
            if edge {
                out.set(r, c, intensity);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::segmentation_error;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn disk_mask(h: usize, w: usize, radius: f64) -> SegmentationMask {
        let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
        let mut m = SegmentationMask::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                if d <= radius {
                    m.set(r, c, 1);
                }
            }
        }
        m
    }

    #[test]
    fn binarize_cases() {
        let z = RealImage::zeros(4, 4);
        assert_eq!(binarize_texture(&z).count_foreground(), 0);

        let mut one = RealImage::zeros(4, 4);
        one.set(2, 3, -0.25);
        let m = binarize_texture(&one);
        assert_eq!(m.count_foreground(), 1);
        assert_eq!(m.get(2, 3), 1);
    }

    #[test]
    fn binarize_scale_invariant() {
        let mut rng = StdRng::seed_from_u64(1);
        let v = RealImage::from_fn(8, 8, |_, _| {
            if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        });
        assert_eq!(binarize_texture(&v), binarize_texture(&v.scale(17.5)));
    }

    #[test]
    fn all_ones_maps_to_all_ones() {
        let m = SegmentationMask::new(27, 36, vec![1; 27 * 36]).unwrap();
        let out = block_morphology(&m, &MorphologyConfig::default()).unwrap();
        assert_eq!(out.count_foreground(), 27 * 36);
    }

    #[test]
    fn isolated_foreground_block_is_removed() {
        // One fully populated block in an empty 7x7-block grid: zero
        // foreground neighbors, so the vote clears it.
        let s = 9;
        let mut m = SegmentationMask::zeros(7 * s, 7 * s);
        for r in 3 * s..4 * s {
            for c in 3 * s..4 * s {
                m.set(r, c, 1);
            }
        }
        let out = block_morphology(&m, &MorphologyConfig::default()).unwrap();
        assert_eq!(out.count_foreground(), 0);
    }

    #[test]
    fn disk_speckle_recovers_disk() {
        // Synthetic stand-in for a binarized texture: dense speckle inside
        // the disk, sparse speckle outside.
        let (h, w) = (180, 180);
        let truth = disk_mask(h, w, 60.0);
        let mut rng = StdRng::seed_from_u64(7);
        let mut noisy = SegmentationMask::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let p = if truth.get(r, c) == 1 { 0.55 } else { 0.01 };
                if rng.gen_bool(p) {
                    noisy.set(r, c, 1);
                }
            }
        }
        let out = block_morphology(&noisy, &MorphologyConfig::default()).unwrap();
        let (err, _, _) = segmentation_error(&out, &truth).unwrap();
        assert!(err <= 0.02, "block-level error {err}");
    }

    #[test]
    fn output_is_single_component_or_empty() {
        let mut rng = StdRng::seed_from_u64(21);
        for trial in 0..8 {
            let (h, w) = (90 + 9 * (trial % 3), 99);
            let mut m = SegmentationMask::zeros(h, w);
            for r in 0..h {
                for c in 0..w {
                    if rng.gen_bool(0.25) {
                        m.set(r, c, 1);
                    }
                }
            }
            let out = block_morphology(&m, &MorphologyConfig::default()).unwrap();
            assert_component_count_le_1(&out);
        }
    }

    fn assert_component_count_le_1(mask: &SegmentationMask) {
        let (h, w) = (mask.height(), mask.width());
        let mut seen = vec![false; h * w];
        let mut components = 0;
        for start in 0..h * w {
            if mask.data()[start] == 0 || seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (r, c) = (i / w, i % w);
                let mut push = |j: usize| {
                    if mask.data()[j] == 1 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if r > 0 {
                    push(i - w);
                }
                if r + 1 < h {
                    push(i + w);
                }
                if c > 0 {
                    push(i - 1);
                }
                if c + 1 < w {
                    push(i + 1);
                }
            }
        }
        assert!(components <= 1, "found {components} components");
    }

    #[test]
    fn idempotent_on_own_output() {
        let (h, w) = (180, 153);
        let truth = disk_mask(h, w, 55.0);
        let mut rng = StdRng::seed_from_u64(3);
        let mut noisy = SegmentationMask::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let p = if truth.get(r, c) == 1 { 0.5 } else { 0.02 };
                if rng.gen_bool(p) {
                    noisy.set(r, c, 1);
                }
            }
        }
        let cfg = MorphologyConfig::default();
        let once = block_morphology(&noisy, &cfg).unwrap();
        let twice = block_morphology(&once, &cfg).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn raising_t_never_adds_seed_blocks() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = {
            let mut m = SegmentationMask::zeros(45, 45);
            for r in 0..45 {
                for c in 0..45 {
                    if rng.gen_bool(0.2) {
                        m.set(r, c, 1);
                    }
                }
            }
            m
        };
        let grid = BlockGrid::from_mask(&m, 9);
        for t in 1..20 {
            let lo: usize = grid.counts.iter().filter(|&&n| n > t).count();
            let hi: usize = grid.counts.iter().filter(|&&n| n > t + 1).count();
            assert!(hi <= lo);
        }
    }

    #[test]
    fn rejects_image_smaller_than_block() {
        let m = SegmentationMask::zeros(5, 5);
        assert!(block_morphology(&m, &MorphologyConfig::default()).is_err());
    }

    #[test]
    fn morphology_config_validation() {
        let mut cfg = MorphologyConfig::default();
        cfg.s = 8;
        assert!(cfg.validate().is_err());
        cfg.s = 9;
        cfg.b = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overlay_marks_boundary_only() {
        let f = RealImage::constant(12, 12, 0.5);
        let mask = disk_mask(12, 12, 4.0);
        let out = overlay_boundary(&f, &mask, 1.0).unwrap();
        let marked = out.data().iter().filter(|&&v| v == 1.0).count();
        assert!(marked > 0 && marked < mask.count_foreground());
    }
}
