//! Synthesis of barrel-distorted wide-angle imagery, analytic backward warping
//! flows, oracle rectification by backward bilinear warping, and scoring.
//!
//! The forward model maps an undistorted ray angle `θu = atan(r)` to a
//! distorted angle `θd = θu (1 + k1 θu² + k2 θu⁴ + k3 θu⁶ + k4 θu⁸)`, placed
//! at the equidistant radius `s·θd` (focal-normalized). Distorted images are
//! produced by pulling each destination pixel through the numeric inverse of
//! that map; rectification samples the distorted image through the closed-form
//! forward map stored as a backward flow.

pub mod buffer;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod pyramid;
pub mod warp;

pub use buffer::{FlowField, ImageBuffer, ValidityMask};
pub use error::{Error, Result};
pub use geometry::{DistortionParams, Intrinsics, NormalizedPoint, PixelPoint};
