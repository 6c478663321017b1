//! File formats: PNG images and masks, the `FDBW` flow container, line-delimited
//! JSON manifests, and flow color visualization.
//!
//! Flow layout (all little-endian):
//!
//! ```text
//! b"FDBW" | width: u32 | height: u32 | (du: f32, dv: f32) * width * height, row-major
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::buffer::{FlowField, ImageBuffer, ValidityMask};
use crate::error::{Error, Result};
use crate::geometry::{DistortionParams, Intrinsics};
use crate::warp::{backward_flow, SynthesisMode};

pub const FLOW_MAGIC: &[u8; 4] = b"FDBW";
const FLOW_HEADER_LEN: u64 = 12;

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(FLOW_HEADER_LEN as usize + 8 * flow.vectors().len());
    out.extend_from_slice(FLOW_MAGIC);
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    for d in flow.vectors() {
        out.extend_from_slice(&d[0].to_le_bytes());
        out.extend_from_slice(&d[1].to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8], path: &Path) -> Result<FlowField> {
    let truncated = |expected: u64| Error::TruncatedFile {
        path: path.to_path_buf(),
        expected,
        found: bytes.len() as u64,
    };
    if bytes.len() < 4 {
        return Err(truncated(FLOW_HEADER_LEN));
    }
    if &bytes[..4] != FLOW_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if (bytes.len() as u64) < FLOW_HEADER_LEN {
        return Err(truncated(FLOW_HEADER_LEN));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (w, h) = (u32_at(4) as usize, u32_at(8) as usize);
    let expected = FLOW_HEADER_LEN + 8 * w as u64 * h as u64;
    if bytes.len() as u64 != expected {
        return Err(truncated(expected));
    }
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let data = (0..w * h)
        .map(|i| {
            let o = FLOW_HEADER_LEN as usize + 8 * i;
            [f32_at(o), f32_at(o + 4)]
        })
        .collect();
    FlowField::from_vectors(w, h, data)
}

pub fn write_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flow(&bytes, path)
}

/// One synthesized sample. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub gt_path: String,
    pub distorted_path: String,
    pub flow_path: String,
    pub mask_path: String,
    pub width: usize,
    pub height: usize,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub s: f64,
    pub mode: SynthesisMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_inv: Option<Vec<f64>>,
    pub seed: u64,
    /// Fields this version does not know about, kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl DatasetRecord {
    pub fn params(&self) -> DistortionParams {
        DistortionParams {
            k: [self.k1, self.k2, self.k3, self.k4],
            intr: Intrinsics {
                f: self.f,
                cx: self.cx,
                cy: self.cy,
            },
            s: self.s,
        }
    }

    /// Recomputes the backward flow from the stored parameters.
    pub fn regenerate_flow(&self) -> Result<FlowField> {
        backward_flow(
            &self.params(),
            self.mode,
            self.k_inv.as_deref(),
            self.width,
            self.height,
        )
    }
}

pub fn write_manifest(records: &[DatasetRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Lower bound on the automatic saturation scale, in pixels.
pub const AUTO_MAGNITUDE_FLOOR: f32 = 10.0;

/// Color-wheel rendering: hue encodes direction, saturation the magnitude
/// relative to `max_magnitude` (clipped at 1). Zero flow is white.
///
/// Without `max_magnitude` the scale is the largest magnitude in the flow,
/// but never below [`AUTO_MAGNITUDE_FLOOR`], so sub-pixel flows render near white.
pub fn flow_to_color(flow: &FlowField, max_magnitude: Option<f32>) -> ImageBuffer {
    let max = match max_magnitude {
        Some(m) if m > 0.0 => m,
        _ => flow.max_magnitude().max(AUTO_MAGNITUDE_FLOOR),
    };
    ImageBuffer::from_fn(flow.width(), flow.height(), |x, y| {
        let [du, dv] = flow.get(x, y);
        let sat = (du.hypot(dv) / max).min(1.0);
        let hue = (dv as f64).atan2(du as f64).to_degrees().rem_euclid(360.0);
        hsv_to_rgb(hue, sat as f64)
    })
}

/// HSV with value 1.
fn hsv_to_rgb(hue_deg: f64, sat: f64) -> [f32; 3] {
    let h = hue_deg / 60.0;
    let c = sat;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = 1.0 - c;
    [(r + m) as f32, (g + m) as f32, (b + m) as f32]
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

fn open_8bit(path: &Path) -> Result<DynamicImage> {
    let img = image::open(path).map_err(|e| image_error(path, e))?;
    match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => Ok(img),
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("only 8-bit rasters are supported, got {:?}", other.color()),
        }),
    }
}

/// Loads any supported 8-bit raster as RGB bytes.
pub fn load_rgb8(path: impl AsRef<Path>) -> Result<image::RgbImage> {
    Ok(open_8bit(path.as_ref())?.into_rgb8())
}

pub fn rgb8_to_buffer(rgb: &image::RgbImage) -> ImageBuffer {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.pixels().map(|p| p.0.map(|v| v as f32 / 255.0)).collect();
    ImageBuffer::from_pixels(w, h, data).expect("raster dimensions match")
}

/// Loads an 8-bit image as unit-interval RGB. Gray is replicated to three
/// channels and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    Ok(rgb8_to_buffer(&load_rgb8(path)?))
}

/// Quantizes a unit-interval sample to 8 bits, rounding half away from zero.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.pixels().iter().flat_map(|p| p.map(quantize)).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|e| image_error(path, e))
}

/// Masks are grayscale PNGs, 255 for valid and 0 for invalid.
pub fn save_mask(mask: &ValidityMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = mask.flags().iter().map(|&v| if v { 255 } else { 0 }).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        mask.width() as u32,
        mask.height() as u32,
        image::ExtendedColorType::L8,
        ImageFormat::Png,
    )
    .map_err(|e| image_error(path, e))
}

/// Any nonzero luma counts as valid.
pub fn load_mask(path: impl AsRef<Path>) -> Result<ValidityMask> {
    let path = path.as_ref();
    let luma = open_8bit(path)?.into_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    ValidityMask::from_flags(w, h, luma.pixels().map(|p| p.0[0] != 0).collect())
}
