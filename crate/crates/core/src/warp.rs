//! Flow construction, backward bilinear warping and distorted-image synthesis.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{FlowField, ImageBuffer, ValidityMask};
use crate::error::{Error, Result};
use crate::geometry::{
    distort_angle, inverse_model_angle, solve_inverse_model, theta_from_radius,
    undistort_angle, validate_inverse_model, DistortionParams, MAX_ANGLE,
};

/// Which distortion model generates the distorted image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Forward polynomial on the undistorted angle, inverted numerically per pixel.
    Forward,
    /// Odd polynomial on the distorted angle, evaluated directly.
    InverseModel,
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMode::Forward => "forward",
            SynthesisMode::InverseModel => "inverse_model",
        })
    }
}

impl FromStr for SynthesisMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forward" => Ok(SynthesisMode::Forward),
            "inverse" | "inverse_model" => Ok(SynthesisMode::InverseModel),
            other => Err(format!("unknown synthesis mode `{other}`")),
        }
    }
}

/// Sources this close outside the frame still count as in bounds, in pixels.
/// Covers roundoff on exact border hits such as corner-matched corners and
/// f32 flow storage.
pub const BOUNDS_TOLERANCE: f64 = 1e-4;

#[inline]
fn within(v: f64, max: f64) -> bool {
    v >= -BOUNDS_TOLERANCE && v <= max + BOUNDS_TOLERANCE
}

/// Bilinear blend of the four pixel centers around `(x, y)`.
///
/// Coordinates outside `[0, W-1] x [0, H-1]` (beyond [`BOUNDS_TOLERANCE`]) are
/// clamped to the border and reported with `in_bounds = false`.
#[inline]
pub fn bilinear_sample(img: &ImageBuffer, x: f64, y: f64) -> ([f32; 3], bool) {
    let (w, h) = img.dims();
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    let in_bounds = within(x, max_x) && within(y, max_y);

    let xc = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
    let yc = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
    let x0 = (xc.floor() as usize).min(w.saturating_sub(2));
    let y0 = (yc.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (xc - x0 as f64) as f32;
    let fy = (yc - y0 as f64) as f32;

    let p00 = img.get(x0, y0);
    let p10 = img.get(x1, y0);
    let p01 = img.get(x0, y1);
    let p11 = img.get(x1, y1);
    let mut out = [0.0f32; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    (out, in_bounds)
}

/// Corner-matched fill scale: the undistorted frame corner lands exactly on
/// the distorted frame corner.
pub fn fill_scale(params: &DistortionParams, width: usize, height: usize) -> f64 {
    let intr = &params.intr;
    let r_corner = intr.corner_radius(width, height);
    if r_corner == 0.0 {
        return 1.0;
    }
    let theta_corner = theta_from_radius(r_corner / intr.f);
    r_corner / (intr.f * distort_angle(theta_corner, &params.k))
}

/// Fill scale for the inverse model, chosen the same way as [`fill_scale`].
pub fn fill_scale_inverse_model(
    params: &DistortionParams,
    k_inv: &[f64],
    width: usize,
    height: usize,
) -> Result<f64> {
    let intr = &params.intr;
    let r_corner = intr.corner_radius(width, height);
    if r_corner == 0.0 {
        return Ok(1.0);
    }
    let theta_corner = theta_from_radius(r_corner / intr.f);
    let theta_d = solve_inverse_model(theta_corner, k_inv)
        .map_err(|_| Error::InvalidParams { theta_max: theta_corner })?;
    Ok(r_corner / (intr.f * theta_d))
}

/// Analytic backward flow of the forward model.
///
/// Each rectified pixel `p` maps to its distorted location `D(p)`; the flow is
/// `D(p) - p`.
pub fn gt_backward_flow(params: &DistortionParams, width: usize, height: usize) -> Result<FlowField> {
    params.validate_for_frame(width, height)?;
    let k = params.k;
    radial_flow(params, width, height, |theta_u| Ok(distort_angle(theta_u, &k)))
}

/// Backward flow of the inverse model, whose forward direction needs a
/// numeric solve per pixel.
pub fn inverse_model_backward_flow(
    params: &DistortionParams,
    k_inv: &[f64],
    width: usize,
    height: usize,
) -> Result<FlowField> {
    validate_inverse_frame(params, k_inv, width, height)?;
    radial_flow(params, width, height, |theta_u| solve_inverse_model(theta_u, k_inv))
}

/// Dispatches to the flow of the given synthesis mode.
pub fn backward_flow(
    params: &DistortionParams,
    mode: SynthesisMode,
    k_inv: Option<&[f64]>,
    width: usize,
    height: usize,
) -> Result<FlowField> {
    match mode {
        SynthesisMode::Forward => gt_backward_flow(params, width, height),
        SynthesisMode::InverseModel => {
            inverse_model_backward_flow(params, require_k_inv(k_inv)?, width, height)
        }
    }
}

fn require_k_inv(k_inv: Option<&[f64]>) -> Result<&[f64]> {
    k_inv
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::InvalidConfig("inverse-model mode needs coefficients".into()))
}

fn validate_inverse_frame(
    params: &DistortionParams,
    k_inv: &[f64],
    width: usize,
    height: usize,
) -> Result<()> {
    if !(params.s > 0.0 && params.s.is_finite()) || !params.intr.is_valid() {
        return Err(Error::InvalidConfig("invalid intrinsics or fill scale".into()));
    }
    let theta_corner = params.intr.corner_angle(width, height);
    let theta_d = solve_inverse_model(theta_corner, k_inv)
        .map_err(|_| Error::InvalidParams { theta_max: theta_corner })?;
    if !validate_inverse_model(k_inv, theta_d) {
        return Err(Error::InvalidParams { theta_max: theta_d });
    }
    Ok(())
}

/// Backward displacement of the forward model at pixel `(x, y)`, in `f64`.
pub fn gt_displacement(params: &DistortionParams, x: f64, y: f64) -> [f64; 2] {
    let k = params.k;
    radial_displacement(params, x, y, |theta_u| Ok(distort_angle(theta_u, &k)))
        .expect("closed-form map is total")
}

/// Displacement `D(p) - p` for a radial map: `theta_d_of` sends an
/// undistorted angle to a distorted one, placed at radius `s * θd`.
#[inline]
fn radial_displacement(
    params: &DistortionParams,
    x: f64,
    y: f64,
    theta_d_of: impl Fn(f64) -> Result<f64>,
) -> Result<[f64; 2]> {
    let intr = &params.intr;
    let dx = x - intr.cx;
    let dy = y - intr.cy;
    let r_u = dx.hypot(dy) / intr.f;
    if r_u == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let theta_d = theta_d_of(theta_from_radius(r_u))?;
    let gain = params.s * theta_d / r_u - 1.0;
    Ok([gain * dx, gain * dy])
}

fn radial_flow(
    params: &DistortionParams,
    width: usize,
    height: usize,
    theta_d_of: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<FlowField> {
    let rows: Vec<Vec<[f32; 2]>> = (0..height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    radial_displacement(params, x as f64, y as f64, &theta_d_of)
                        .map(|d| [d[0] as f32, d[1] as f32])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    FlowField::from_vectors(width, height, rows.concat())
}

/// Backward warp: `out(u, v) = src(u + du, v + dv)`, sized like the flow.
pub fn apply_backward_flow(src: &ImageBuffer, flow: &FlowField) -> (ImageBuffer, ValidityMask) {
    let (w, h) = flow.dims();
    let rows: Vec<(Vec<[f32; 3]>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let d = flow.get(x, y);
                    bilinear_sample(src, x as f64 + d[0] as f64, y as f64 + d[1] as f64)
                })
                .unzip()
        })
        .collect();
    assemble(w, h, rows)
}

/// Which output pixels of `flow` sample inside a `src_width x src_height` frame.
pub fn flow_validity(flow: &FlowField, src_width: usize, src_height: usize) -> ValidityMask {
    let (w, h) = flow.dims();
    let (max_x, max_y) = ((src_width - 1) as f64, (src_height - 1) as f64);
    let flags = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let d = flow.get(x, y);
            let (sx, sy) = (x as f64 + d[0] as f64, y as f64 + d[1] as f64);
            within(sx, max_x) && within(sy, max_y)
        })
        .collect();
    ValidityMask::from_flags(w, h, flags).expect("flag count matches")
}

/// Synthesizes the distorted view of `gt`.
///
/// Every distorted pixel `q` pulls from the undistorted image: its angle
/// `θd = r_q / s` is mapped back to `θu` (numerically in forward mode, by the
/// polynomial in inverse-model mode) and sampled at radius `f·tan θu`.
pub fn synthesize_distorted(
    gt: &ImageBuffer,
    params: &DistortionParams,
    mode: SynthesisMode,
    k_inv: Option<&[f64]>,
) -> Result<(ImageBuffer, ValidityMask)> {
    let (w, h) = gt.dims();
    match mode {
        SynthesisMode::Forward => params.validate_for_frame(w, h)?,
        SynthesisMode::InverseModel => validate_inverse_frame(params, require_k_inv(k_inv)?, w, h)?,
    }
    let intr = params.intr;
    let theta_d_max = intr.corner_radius(w, h) / (intr.f * params.s);
    if theta_d_max >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::DomainExceeded { theta: theta_d_max });
    }

    let k = params.k;
    let k_inv = k_inv.unwrap_or(&[]);
    let undistort = |theta_d: f64| -> Result<f64> {
        match mode {
            SynthesisMode::Forward => undistort_angle(theta_d, &k),
            SynthesisMode::InverseModel => Ok(inverse_model_angle(theta_d, k_inv)),
        }
    };

    let rows: Vec<(Vec<[f32; 3]>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let dy = y as f64 - intr.cy;
            (0..w)
                .map(|x| {
                    let dx = x as f64 - intr.cx;
                    let r_d = dx.hypot(dy) / intr.f;
                    if r_d == 0.0 {
                        return Ok(bilinear_sample(gt, x as f64, y as f64));
                    }
                    let theta_u = undistort(r_d / params.s)?;
                    let gain = if theta_u >= MAX_ANGLE {
                        // ray at or beyond the horizon: push far outside the frame
                        1e9
                    } else {
                        theta_u.max(0.0).tan() / r_d
                    };
                    Ok(bilinear_sample(gt, intr.cx + gain * dx, intr.cy + gain * dy))
                })
                .collect::<Result<Vec<_>>>()
                .map(|px| px.into_iter().unzip())
        })
        .collect::<Result<_>>()?;
    Ok(assemble(w, h, rows))
}

fn assemble(w: usize, h: usize, rows: Vec<(Vec<[f32; 3]>, Vec<bool>)>) -> (ImageBuffer, ValidityMask) {
    let mut pixels = Vec::with_capacity(w * h);
    let mut flags = Vec::with_capacity(w * h);
    for (p, m) in rows {
        pixels.extend(p);
        flags.extend(m);
    }
    (
        ImageBuffer::from_pixels(w, h, pixels).expect("row sizes match"),
        ValidityMask::from_flags(w, h, flags).expect("row sizes match"),
    )
}
