//! Camera model and the two radial distortion models.
//!
//! Angles are radians in `f64`. Normalized coordinates divide pixel offsets from
//! the principal point by the focal length, so a ray at angle `θ` from the
//! optical axis meets the undistorted plane at radius `tan θ`. Distorted
//! positions use the equidistant convention: radius `s·θd`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the inversion bracket; `tan` is still finite here.
pub const MAX_ANGLE: f64 = FRAC_PI_2 - 1e-9;

/// Residual tolerance on `|distort_angle(θ) - θd|` for [`undistort_angle`].
pub const INVERSION_TOLERANCE: f64 = 1e-10;

const NEWTON_ITERATIONS: usize = 50;
const BISECTION_ITERATIONS: usize = 200;

/// Minimum number of derivative samples taken by [`validate_params`].
pub const VALIDATION_SAMPLES: usize = 2048;

const SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    /// Focal length in pixels.
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self> {
        let intr = Self { f, cx, cy };
        if !intr.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "intrinsics need f > 0 and a finite principal point, got f={f} cx={cx} cy={cy}"
            )));
        }
        Ok(intr)
    }

    /// Principal point at the center of a `width x height` frame, where pixel
    /// centers sit on integer coordinates.
    pub fn centered(f: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.f > 0.0 && self.f.is_finite() && self.cx.is_finite() && self.cy.is_finite()
    }

    /// Largest distance in pixels from the principal point to a corner pixel center.
    pub fn corner_radius(&self, width: usize, height: usize) -> f64 {
        let xs = [0.0, width as f64 - 1.0];
        let ys = [0.0, height as f64 - 1.0];
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x - self.cx).hypot(y - self.cy)))
            .fold(0.0, f64::max)
    }

    /// Undistorted ray angle of the farthest frame corner.
    pub fn corner_angle(&self, width: usize, height: usize) -> f64 {
        theta_from_radius(self.corner_radius(width, height) / self.f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    /// Radial coefficients `k1..k4` of the forward model.
    pub k: [f64; 4],
    pub intr: Intrinsics,
    /// Fill scale applied to the distorted radius.
    pub s: f64,
}

impl DistortionParams {
    pub fn new(k: [f64; 4], intr: Intrinsics) -> Self {
        Self { k, intr, s: 1.0 }
    }

    pub fn with_scale(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    /// Checks `s > 0` and monotonicity of the forward polynomial up to the
    /// corner angle of the given frame.
    pub fn validate_for_frame(&self, width: usize, height: usize) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidConfig(format!("fill scale must be > 0, got {}", self.s)));
        }
        if !self.intr.is_valid() {
            return Err(Error::InvalidConfig("invalid intrinsics".into()));
        }
        let theta_max = self.intr.corner_angle(width, height);
        if !validate_params(&self.k, theta_max) {
            return Err(Error::InvalidParams { theta_max });
        }
        Ok(())
    }
}

/// Focal-normalized camera-plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPoint {
    pub a: f64,
    pub b: f64,
}

impl NormalizedPoint {
    pub fn radius(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// Pixel coordinates: `u` is the column, `v` the row, origin at the top-left pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

pub fn pixel_to_normalized(p: PixelPoint, intr: &Intrinsics) -> NormalizedPoint {
    NormalizedPoint {
        a: (p.u - intr.cx) / intr.f,
        b: (p.v - intr.cy) / intr.f,
    }
}

pub fn normalized_to_pixel(n: NormalizedPoint, intr: &Intrinsics) -> PixelPoint {
    PixelPoint {
        u: n.a * intr.f + intr.cx,
        v: n.b * intr.f + intr.cy,
    }
}

/// Ray angle for an undistorted normalized radius.
pub fn theta_from_radius(r_u: f64) -> f64 {
    assert!(r_u >= 0.0, "radius must be non-negative, got {r_u}");
    r_u.atan()
}

/// Forward model: `θd = θu (1 + k1 θu² + k2 θu⁴ + k3 θu⁶ + k4 θu⁸)`.
#[inline]
pub fn distort_angle(theta_u: f64, k: &[f64; 4]) -> f64 {
    let t = theta_u * theta_u;
    theta_u * (1.0 + t * (k[0] + t * (k[1] + t * (k[2] + t * k[3]))))
}

/// `d θd / d θu` of [`distort_angle`].
#[inline]
pub fn distort_angle_derivative(theta_u: f64, k: &[f64; 4]) -> f64 {
    let t = theta_u * theta_u;
    1.0 + t * (3.0 * k[0] + t * (5.0 * k[1] + t * (7.0 * k[2] + t * 9.0 * k[3])))
}

/// Numeric inverse of [`distort_angle`] on `[0, π/2)`.
///
/// Newton from `θd` with a maintained bracket; any step that leaves the bracket
/// or meets a non-positive slope is replaced by bisection.
pub fn undistort_angle(theta_d: f64, k: &[f64; 4]) -> Result<f64> {
    solve_increasing(theta_d, |t| (distort_angle(t, k), distort_angle_derivative(t, k)))
}

/// Inverse distortion model `θu = Σ kᵢ θd^(2i-1)`, evaluated directly.
#[inline]
pub fn inverse_model_angle(theta_d: f64, k_inv: &[f64]) -> f64 {
    let t = theta_d * theta_d;
    theta_d * k_inv.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

#[inline]
pub fn inverse_model_derivative(theta_d: f64, k_inv: &[f64]) -> f64 {
    let t = theta_d * theta_d;
    k_inv
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * t + (2 * i + 1) as f64 * c)
}

/// Distorted angle whose inverse-model image is `theta_u`, found numerically.
pub fn solve_inverse_model(theta_u: f64, k_inv: &[f64]) -> Result<f64> {
    solve_increasing(theta_u, |t| {
        (inverse_model_angle(t, k_inv), inverse_model_derivative(t, k_inv))
    })
}

/// True iff the forward polynomial has positive slope on `[0, theta_max]`.
pub fn validate_params(k: &[f64; 4], theta_max: f64) -> bool {
    sampled_positive(theta_max, |t| distort_angle_derivative(t, k))
}

/// True iff the inverse-model polynomial has positive slope on `[0, theta_max]`.
pub fn validate_inverse_model(k_inv: &[f64], theta_max: f64) -> bool {
    !k_inv.is_empty() && sampled_positive(theta_max, |t| inverse_model_derivative(t, k_inv))
}

fn sampled_positive(theta_max: f64, slope: impl Fn(f64) -> f64) -> bool {
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return false;
    }
    let n = VALIDATION_SAMPLES;
    (0..=n).all(|i| {
        let t = if i == n { theta_max } else { theta_max * i as f64 / n as f64 };
        let d = slope(t);
        d.is_finite() && d > 0.0
    })
}

/// Solves `g(θ) = target` for a function that is increasing on `[0, MAX_ANGLE]`
/// with `g(0) = 0`. `eval` returns `(g(θ), g'(θ))`.
fn solve_increasing(target: f64, eval: impl Fn(f64) -> (f64, f64)) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if target < 0.0 {
        // odd polynomial
        return solve_increasing(-target, eval).map(|t| -t);
    }
    if !target.is_finite() {
        return Err(Error::NoConvergence {
            target,
            residual: f64::INFINITY,
        });
    }

    let hi = if eval(MAX_ANGLE).0 > target {
        MAX_ANGLE
    } else {
        // The polynomial may turn over before the horizon; bracket at the
        // first sampled crossing instead.
        (1..=VALIDATION_SAMPLES)
            .map(|i| MAX_ANGLE * i as f64 / VALIDATION_SAMPLES as f64)
            .find(|&t| eval(t).0 > target)
            .ok_or(Error::NonMonotonic { target })?
    };
    let mut lo = 0.0;
    let mut hi = hi;
    let mut theta = target.min(hi);

    for _ in 0..NEWTON_ITERATIONS {
        let (g, slope) = eval(theta);
        let residual = g - target;
        if residual.abs() < INVERSION_TOLERANCE {
            return Ok(theta);
        }
        if residual < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let next = theta - residual / slope;
        theta = if slope > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }

    let mut residual = f64::INFINITY;
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        residual = eval(mid).0 - target;
        if residual.abs() < INVERSION_TOLERANCE {
            return Ok(mid);
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence { target, residual })
}

/// Uniform ranges for the four forward coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub k: [(f64, f64); 4],
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            k: [(0.0, 0.5), (-0.05, 0.05), (-0.05, 0.05), (-0.05, 0.05)],
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.k.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "range for k{} must satisfy lo <= hi, got ({lo}, {hi})",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Draws coefficients uniformly, rejecting sets that are not monotone up to
/// the frame's corner angle. Returned params carry `s = 1`.
pub fn sample_params(
    seed: u64,
    ranges: &SamplingRanges,
    width: usize,
    height: usize,
    intr: Intrinsics,
) -> Result<DistortionParams> {
    ranges.validate()?;
    let theta_max = intr.corner_angle(width, height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLING_ATTEMPTS {
        let k = ranges.k.map(|(lo, hi)| rng.gen_range(lo..=hi));
        if validate_params(&k, theta_max) {
            return Ok(DistortionParams::new(k, intr));
        }
    }
    Err(Error::SamplingExhausted {
        attempts: SAMPLING_ATTEMPTS,
    })
}

/// Inverse-model coefficients `(1, c)` that send the corner ray `theta_corner`
/// to the same distorted angle as the forward model with `k`.
pub fn matched_inverse_model(k: &[f64; 4], theta_corner: f64) -> Vec<f64> {
    let theta_d = distort_angle(theta_corner, k);
    let c = (theta_corner - theta_d) / theta_d.powi(3);
    vec![1.0, c]
}
