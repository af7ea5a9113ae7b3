//! Grayscale image file I/O.
//!
//! The canonical on-disk format is binary PGM (P5, maxval 255). 8-bit
//! grayscale PNG is accepted on read. Masks are stored as P5 with
//! values {0, 255}.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{RealImage, SegmentationMask};

/// Loads an 8-bit single-channel image (P5 PGM or grayscale PNG) and maps
/// intensities to `[0, 1]` by dividing by 255.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<RealImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        load_pgm_bytes(path, &bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        load_png_bytes(path, &bytes)
    } else if bytes.starts_with(b"P6") {
        Err(Error::format(path, "P6 (color) PGM is not supported, expected single-channel P5"))
    } else if bytes.starts_with(b"P2") {
        Err(Error::format(path, "ASCII (P2) PGM is not supported, expected binary P5"))
    } else {
        Err(Error::format(path, "unrecognized image format, expected P5 PGM or 8-bit grayscale PNG"))
    }
}

fn load_pgm_bytes(path: &Path, bytes: &[u8]) -> Result<RealImage> {
    let mut pos = 2; // past "P5"
    let width = read_pgm_int(path, bytes, &mut pos)?;
    let height = read_pgm_int(path, bytes, &mut pos)?;
    let maxval = read_pgm_int(path, bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::format(
            path,
            format!("maxval must be 255 (8-bit), got {maxval}"),
        ));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(path, "missing whitespace after maxval"));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(path, "image dimensions overflow"))?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "image dimensions must be positive"));
    }
    let raster = &bytes[pos..];
    if raster.len() < n {
        return Err(Error::format(
            path,
            format!("raster truncated: expected {n} bytes, found {}", raster.len()),
        ));
    }
    let data = raster[..n].iter().map(|&b| b as f64 / 255.0).collect();
    RealImage::new(height, width, data)
}

/// Reads a whitespace/comment-delimited unsigned integer from a PGM header.
fn read_pgm_int(path: &Path, bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and '#' comments.
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(path, "malformed header: expected integer"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(path, "malformed header integer"))
}

fn load_png_bytes(path: &Path, bytes: &[u8]) -> Result<RealImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, format!("PNG decode failed: {e}")))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::format(
                path,
                format!(
                    "PNG must be 8-bit grayscale, got color type {:?}",
                    other.color()
                ),
            ))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    RealImage::new(h, w, data)
}

/// Writes a P5 PGM. Values are clamped to `[0, 1]` and quantized by
/// `round(v * 255)` with ties away from zero.
pub fn save_grayscale(img: &RealImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(img.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
    out.extend(img.data().iter().map(|&v| quantize(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads a binary mask stored as P5 with values {0, 255}; any sample >= 128
/// counts as foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<SegmentationMask> {
    let img = load_grayscale(path)?;
    let data = img.data().iter().map(|&v| u8::from(v >= 0.5)).collect();
    SegmentationMask::new(img.height(), img.width(), data)
}

/// Writes a mask as P5 with foreground 255, background 0.
pub fn save_mask(mask: &SegmentationMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(mask.data().len() + 32);
    write!(out, "P5\n{} {}\n255\n", mask.width(), mask.height()).expect("vec write");
    out.extend(mask.data().iter().map(|&v| if v == 1 { 255u8 } else { 0u8 }));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the raw `f64` samples row-major, little-endian, no header. The
/// matching `.pgm` output carries the dimensions.
pub fn save_raw_f64(img: &RealImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(img.len() * 8);
    for &v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
