//! Non-neural machinery for a two-branch oriented scene-text detector.
//!
//! A detector of this family pairs a dense per-pixel branch (rotated-box
//! regression on a score grid) with an SSD-style anchor branch (quadrilateral
//! offsets regressed against a lattice of prior boxes). This crate implements
//! everything around the network itself:
//!
//! - [`geometry`]: quadrilateral primitives, convex clipping, IoU, minimum
//!   bounding rectangles, polygon shrinking, and rotated-box conversions.
//! - [`anchors`]: prior-box lattice generation with per-category aspect
//!   ratios, anchor density, and the inference-time trimming rule.
//! - [`targets`]: ground-truth label and regression-target generation for
//!   both branches.
//! - [`losses`]: classification/regression loss values with online hard
//!   example mining, computed deterministically from prediction tensors.
//! - [`postprocess`]: decoding both branches, score fusion, and the cascaded
//!   rectangle-then-quadrilateral non-maximum suppression.
//! - [`toolkit`]: tensor container files, ICDAR-style ground-truth parsing,
//!   detection I/O, precision/recall/F evaluation, SVG rendering, and the
//!   run configuration.
//!
//! All numeric code is generic over the scalar type through [`Real`];
//! concrete aliases for `f32` and `f64` live at the crate root.

pub mod anchors;
pub mod geometry;
pub mod grid;
pub mod losses;
pub mod postprocess;
pub mod targets;
pub mod toolkit;

use std::fmt;

/// Floating-point scalar the geometry and loss kernels are generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Casts an `f64` literal/constant into the working scalar type.
#[inline]
pub(crate) fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite constant")
}

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An operation produced a geometrically degenerate result.
    #[error("degenerate result: {0}")]
    Degenerate(String),
    /// A text input (ground truth, detections, config) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A binary tensor file is malformed.
    #[error("tensor format error: {0}")]
    Format(String),
    /// The run configuration failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub type Point32 = geometry::Point<f32>;
pub type Point64 = geometry::Point<f64>;
pub type Quad32 = geometry::Quad<f32>;
pub type Quad64 = geometry::Quad<f64>;
pub type AARect32 = geometry::AARect<f32>;
pub type AARect64 = geometry::AARect<f64>;
pub type RotRect32 = geometry::RotRect<f32>;
pub type RotRect64 = geometry::RotRect<f64>;
pub type RBoxPred32 = geometry::RBoxPred<f32>;
pub type RBoxPred64 = geometry::RBoxPred<f64>;
pub type Detection32 = postprocess::Detection<f32>;
pub type Detection64 = postprocess::Detection<f64>;
pub type GroundTruth32 = targets::GroundTruth<f32>;
pub type GroundTruth64 = targets::GroundTruth<f64>;
