//! Dataset generation, oracle rectification and the synthesis-mode comparison.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::buffer::{ImageBuffer, ValidityMask};
use crate::dataio::{self, DatasetRecord};
use crate::error::{Error, Result};
use crate::geometry::{matched_inverse_model, sample_params, DistortionParams, Intrinsics, SamplingRanges};
use crate::metrics::{psnr, sharpness};
use crate::warp::{
    apply_backward_flow, backward_flow, fill_scale, fill_scale_inverse_model, flow_validity,
    synthesize_distorted, SynthesisMode,
};

/// Fraction of each side kept when scoring round trips.
pub const SCORING_CROP: f64 = 0.8;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalPolicy {
    /// Focal length as a fraction of the frame side.
    Ratio(f64),
    Pixels(f64),
}

impl FocalPolicy {
    pub fn focal_for(&self, size: usize) -> f64 {
        match *self {
            FocalPolicy::Ratio(r) => r * size as f64,
            FocalPolicy::Pixels(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Scale the distorted radius so frame corners map onto each other.
    Corner,
    /// `s = 1`.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub target_size: usize,
    pub ranges: SamplingRanges,
    pub focal: FocalPolicy,
    pub mode: SynthesisMode,
    pub fill: FillPolicy,
    pub base_seed: u64,
    pub count: Option<usize>,
}

impl SynthesisConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            target_size: 256,
            ranges: SamplingRanges::default(),
            focal: FocalPolicy::Ratio(0.8),
            mode: SynthesisMode::Forward,
            fill: FillPolicy::Corner,
            base_seed: 0,
            count: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_size < 16 {
            return Err(Error::InvalidConfig(format!(
                "target size must be at least 16, got {}",
                self.target_size
            )));
        }
        let f = self.focal.focal_for(self.target_size);
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidConfig(format!("focal length must be > 0, got {f}")));
        }
        self.ranges.validate()
    }
}

/// Sorted image files of `dir`, optionally limited to the first `count`.
pub fn list_images(dir: &Path, count: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if let Some(n) = count {
        files.truncate(n);
    }
    if files.is_empty() {
        return Err(Error::EmptyInput {
            dir: dir.to_path_buf(),
        });
    }
    Ok(files)
}

/// Center-crops to a square and resizes to `size x size` in 8-bit space, so
/// the returned buffer survives a PNG round trip unchanged.
pub fn prepare_image(path: &Path, size: usize) -> Result<ImageBuffer> {
    let rgb = dataio::load_rgb8(path)?;
    let (w, h) = rgb.dimensions();
    let side = w.min(h);
    let cropped = imageops::crop_imm(&rgb, (w - side) / 2, (h - side) / 2, side, side).to_image();
    let resized = if side as usize == size {
        cropped
    } else {
        imageops::resize(&cropped, size as u32, size as u32, FilterType::CatmullRom)
    };
    Ok(dataio::rgb8_to_buffer(&resized))
}

/// Everything needed to distort one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleParams {
    pub params: DistortionParams,
    pub mode: SynthesisMode,
    pub k_inv: Option<Vec<f64>>,
    pub seed: u64,
}

/// Draws the parameters for sample `index`; the seed is `base_seed + index`.
///
/// Inverse-model samples get coefficients `(1, c)` matched to the drawn
/// forward coefficients at the frame corner.
pub fn sample_for_index(cfg: &SynthesisConfig, index: usize, mode: SynthesisMode) -> Result<SampleParams> {
    let size = cfg.target_size;
    let seed = cfg.base_seed.wrapping_add(index as u64);
    let intr = Intrinsics::centered(cfg.focal.focal_for(size), size, size)?;
    let mut params = sample_params(seed, &cfg.ranges, size, size, intr)?;
    let k_inv = match mode {
        SynthesisMode::Forward => None,
        SynthesisMode::InverseModel => {
            Some(matched_inverse_model(&params.k, intr.corner_angle(size, size)))
        }
    };
    params.s = match (cfg.fill, &k_inv) {
        (FillPolicy::None, _) => 1.0,
        (FillPolicy::Corner, None) => fill_scale(&params, size, size),
        (FillPolicy::Corner, Some(k)) => fill_scale_inverse_model(&params, k, size, size)?,
    };
    Ok(SampleParams {
        params,
        mode,
        k_inv,
        seed,
    })
}

/// Rectifies with the analytic forward-model flow.
pub fn oracle_rectify(distorted: &ImageBuffer, params: &DistortionParams) -> Result<(ImageBuffer, ValidityMask)> {
    oracle_rectify_with(distorted, params, SynthesisMode::Forward, None)
}

pub fn oracle_rectify_with(
    distorted: &ImageBuffer,
    params: &DistortionParams,
    mode: SynthesisMode,
    k_inv: Option<&[f64]>,
) -> Result<(ImageBuffer, ValidityMask)> {
    let (w, h) = distorted.dims();
    let flow = backward_flow(params, mode, k_inv, w, h)?;
    Ok(apply_backward_flow(distorted, &flow))
}

/// PSNR over the central crop, restricted to valid pixels.
pub fn central_psnr(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&ValidityMask>) -> Result<f64> {
    let crop_mask = mask.map(|m| m.central_crop(SCORING_CROP));
    psnr(
        &a.central_crop(SCORING_CROP),
        &b.central_crop(SCORING_CROP),
        crop_mask.as_ref(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub source: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub records: Vec<DatasetRecord>,
    pub failures: Vec<Failure>,
    pub manifest_path: PathBuf,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";
const SUBDIRS: [&str; 4] = ["gt", "distorted", "flow", "mask"];

/// Writes `gt/`, `distorted/`, `flow/`, `mask/` and `manifest.jsonl` under the
/// output directory. Images that fail are reported and skipped.
pub fn generate_dataset(cfg: &SynthesisConfig) -> Result<DatasetSummary> {
    cfg.validate()?;
    let inputs = list_images(&cfg.input_dir, cfg.count)?;
    for sub in SUBDIRS {
        let dir = cfg.output_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let total = inputs.len();
    let results: Vec<Result<DatasetRecord>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let r = synthesize_one(cfg, i, path);
            match &r {
                Ok(_) => eprintln!("[{}/{}] {}: ok", i + 1, total, path.display()),
                Err(e) => eprintln!("[{}/{}] {}: skipped ({e})", i + 1, total, path.display()),
            }
            r
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in inputs.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(Failure {
                source: path.clone(),
                error: e.to_string(),
            }),
        }
    }
    let manifest_path = cfg.output_dir.join(MANIFEST_NAME);
    dataio::write_manifest(&records, &manifest_path)?;
    Ok(DatasetSummary {
        records,
        failures,
        manifest_path,
    })
}

fn synthesize_one(cfg: &SynthesisConfig, index: usize, path: &Path) -> Result<DatasetRecord> {
    let size = cfg.target_size;
    let gt = prepare_image(path, size)?;
    let sample = sample_for_index(cfg, index, cfg.mode)?;
    let k_inv = sample.k_inv.as_deref();
    let (distorted, _) = synthesize_distorted(&gt, &sample.params, sample.mode, k_inv)?;
    let flow = backward_flow(&sample.params, sample.mode, k_inv, size, size)?;
    let mask = flow_validity(&flow, size, size);

    let stem = format!("{index:06}");
    let rel = |sub: &str, ext: &str| format!("{sub}/{stem}.{ext}");
    let record = DatasetRecord {
        gt_path: rel("gt", "png"),
        distorted_path: rel("distorted", "png"),
        flow_path: rel("flow", "fdbw"),
        mask_path: rel("mask", "png"),
        width: size,
        height: size,
        k1: sample.params.k[0],
        k2: sample.params.k[1],
        k3: sample.params.k[2],
        k4: sample.params.k[3],
        f: sample.params.intr.f,
        cx: sample.params.intr.cx,
        cy: sample.params.intr.cy,
        s: sample.params.s,
        mode: sample.mode,
        k_inv: sample.k_inv.clone(),
        seed: sample.seed,
        extra: provenance(cfg, path),
    };
    let out = &cfg.output_dir;
    dataio::save_image(&gt, out.join(&record.gt_path))?;
    dataio::save_image(&distorted, out.join(&record.distorted_path))?;
    dataio::write_flow(&flow, out.join(&record.flow_path))?;
    dataio::save_mask(&mask, out.join(&record.mask_path))?;
    Ok(record)
}

/// Source file name and sampling ranges, stored alongside each record.
fn provenance(cfg: &SynthesisConfig, path: &Path) -> Map<String, Value> {
    let mut extra = Map::new();
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    extra.insert("source".into(), Value::from(name));
    extra.insert(
        "k_ranges".into(),
        serde_json::to_value(cfg.ranges.k).expect("ranges serialize"),
    );
    extra.insert("fill".into(), serde_json::to_value(cfg.fill).expect("fill serializes"));
    extra
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    /// Laplacian-variance sharpness of the distorted image.
    pub sharpness: f64,
    /// Distorted vs ground truth over the central crop.
    pub distorted_psnr: f64,
    /// Oracle-rectified vs ground truth over the valid central crop.
    pub round_trip_psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageComparison {
    pub source: String,
    pub seed: u64,
    pub k: [f64; 4],
    pub k_inv: Vec<f64>,
    pub forward: ModeScores,
    pub inverse_model: ModeScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub images: Vec<ImageComparison>,
    pub mean_forward_psnr: f64,
    pub mean_inverse_model_psnr: f64,
    pub mean_forward_sharpness: f64,
    pub mean_inverse_model_sharpness: f64,
}

/// Distorts every input under both models with matched corner displacement
/// and scores sharpness and oracle round trips. Writes nothing.
pub fn compare_synthesis_modes(cfg: &SynthesisConfig) -> Result<ModeComparison> {
    cfg.validate()?;
    let inputs = list_images(&cfg.input_dir, cfg.count)?;
    let images = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| compare_one(cfg, i, path))
        .collect::<Result<Vec<_>>>()?;
    let n = images.len() as f64;
    let mean = |f: &dyn Fn(&ImageComparison) -> f64| images.iter().map(f).sum::<f64>() / n;
    Ok(ModeComparison {
        mean_forward_psnr: mean(&|c| c.forward.round_trip_psnr),
        mean_inverse_model_psnr: mean(&|c| c.inverse_model.round_trip_psnr),
        mean_forward_sharpness: mean(&|c| c.forward.sharpness),
        mean_inverse_model_sharpness: mean(&|c| c.inverse_model.sharpness),
        images,
    })
}

fn compare_one(cfg: &SynthesisConfig, index: usize, path: &Path) -> Result<ImageComparison> {
    let gt = prepare_image(path, cfg.target_size)?;
    let fwd = sample_for_index(cfg, index, SynthesisMode::Forward)?;
    let inv = sample_for_index(cfg, index, SynthesisMode::InverseModel)?;
    let score = |s: &SampleParams| -> Result<ModeScores> {
        let k_inv = s.k_inv.as_deref();
        let (distorted, _) = synthesize_distorted(&gt, &s.params, s.mode, k_inv)?;
        let (rectified, mask) = oracle_rectify_with(&distorted, &s.params, s.mode, k_inv)?;
        Ok(ModeScores {
            sharpness: sharpness(&distorted)?,
            distorted_psnr: central_psnr(&distorted, &gt, None)?,
            round_trip_psnr: central_psnr(&rectified, &gt, Some(&mask))?,
        })
    };
    Ok(ImageComparison {
        source: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        seed: fwd.seed,
        k: fwd.params.k,
        forward: score(&fwd)?,
        inverse_model: score(&inv)?,
        k_inv: inv.k_inv.unwrap_or_default(),
    })
}
