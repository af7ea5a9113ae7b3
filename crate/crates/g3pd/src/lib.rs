//! Global three-part decomposition (G3PD) of grayscale images and
//! fingerprint foreground segmentation built on it.
//!
//! An input image `f` is split into a cartoon part `u` (piecewise
//! homogeneous, low total variation), a texture part `v` (oscillatory,
//! sparse both pointwise and in the curvelet domain), and a noise part
//! `eps` whose curvelet coefficients are small in sup norm, with
//! `f = u + v + eps` enforced through an augmented Lagrangian. The
//! foreground mask is then derived from the non-zero pixels of `v` by
//! block-level morphology. A benchmark layer evaluates masks against
//! ground truth and trains the two sensor-dependent parameters.

pub mod bench;
pub mod config;
pub mod error;
pub mod image;
pub mod io;
pub mod prox;
pub mod segment;
pub mod solver;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{crop, mirror_pad, PadSpec, RealImage, SegmentationMask, VectorField};
