//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::dataio;
use crate::error::{Error, Result};
use crate::geometry::{DistortionParams, Intrinsics, SamplingRanges};
use crate::metrics::{epe, psnr, sharpness, ssim, MetricReport};
use crate::pipeline::{self, FillPolicy, FocalPolicy, SynthesisConfig};
use crate::warp::{backward_flow, fill_scale, fill_scale_inverse_model, SynthesisMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdbw", version, about = "Barrel distortion synthesis, analytic flows and oracle rectification")]
pub struct Cli {
    /// Worker threads for per-image and per-row parallelism (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a distorted dataset (images, flows, masks, manifest) from an image folder
    Synthesize(SynthesizeArgs),
    /// Rectify a distorted image with the analytic backward flow
    Rectify(RectifyArgs),
    /// Write the analytic backward flow as an .fdbw file
    Flow(FlowArgs),
    /// Score two images (and optionally two flows); prints one JSON object
    Metrics(MetricsArgs),
    /// Render an .fdbw flow as a color-wheel PNG
    VizFlow(VizFlowArgs),
    /// Compare forward and inverse-model synthesis on an image folder; prints a JSON report
    CompareModes(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Forward,
    Inverse,
}

impl From<ModeArg> for SynthesisMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Forward => SynthesisMode::Forward,
            ModeArg::Inverse => SynthesisMode::InverseModel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FillArg {
    Corner,
    None,
}

impl From<FillArg> for FillPolicy {
    fn from(f: FillArg) -> Self {
        match f {
            FillArg::Corner => FillPolicy::Corner,
            FillArg::None => FillPolicy::None,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("range must satisfy lo <= hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn parse_coefficients(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad coefficient `{v}`: {e}")))
        .collect()
}

/// Sampling flags shared by `synthesize` and `compare-modes`.
#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Square output side in pixels
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value = "0,0.5", value_parser = parse_range, allow_hyphen_values = true)]
    pub k1_range: (f64, f64),
    #[arg(long, default_value = "-0.05,0.05", value_parser = parse_range, allow_hyphen_values = true)]
    pub k2_range: (f64, f64),
    #[arg(long, default_value = "-0.05,0.05", value_parser = parse_range, allow_hyphen_values = true)]
    pub k3_range: (f64, f64),
    #[arg(long, default_value = "-0.05,0.05", value_parser = parse_range, allow_hyphen_values = true)]
    pub k4_range: (f64, f64),
    /// Focal length as a fraction of the output side
    #[arg(long, default_value_t = 0.8)]
    pub focal_ratio: f64,
    /// Focal length in pixels; overrides --focal-ratio (default: unset)
    #[arg(long)]
    pub focal_px: Option<f64>,
    #[arg(long, value_enum, default_value_t = FillArg::Corner)]
    pub fill: FillArg,
    /// Base seed; image i uses seed + i
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Process only the first N images in name order (default: all)
    #[arg(long)]
    pub count: Option<usize>,
}

impl SamplingArgs {
    fn config(&self, input: &Path, output: &Path, mode: SynthesisMode) -> SynthesisConfig {
        SynthesisConfig {
            input_dir: input.to_path_buf(),
            output_dir: output.to_path_buf(),
            target_size: self.size,
            ranges: SamplingRanges {
                k: [self.k1_range, self.k2_range, self.k3_range, self.k4_range],
            },
            focal: match self.focal_px {
                Some(f) => FocalPolicy::Pixels(f),
                None => FocalPolicy::Ratio(self.focal_ratio),
            },
            mode,
            fill: self.fill.into(),
            base_seed: self.seed,
            count: self.count,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Forward)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

/// Explicit distortion parameters.
#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k2: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k3: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k4: f64,
    /// Focal length in pixels (default: 0.8 x shorter side)
    #[arg(long)]
    pub focal: Option<f64>,
    /// Principal point column (default: frame center)
    #[arg(long, allow_hyphen_values = true)]
    pub cx: Option<f64>,
    /// Principal point row (default: frame center)
    #[arg(long, allow_hyphen_values = true)]
    pub cy: Option<f64>,
    #[arg(long, value_enum, default_value_t = FillArg::Corner)]
    pub fill: FillArg,
    /// Explicit fill scale; overrides --fill (default: unset)
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Forward)]
    pub mode: ModeArg,
    /// Inverse-model coefficients `c1,c2,...` for --mode inverse
    #[arg(long, value_parser = parse_coefficients, allow_hyphen_values = true)]
    pub k_inv: Option<Vec<f64>>,
}

impl ParamArgs {
    fn resolve(&self, width: usize, height: usize) -> Result<(DistortionParams, SynthesisMode, Option<Vec<f64>>)> {
        let f = self.focal.unwrap_or(0.8 * width.min(height) as f64);
        let centered = Intrinsics::centered(f, width, height)?;
        let intr = Intrinsics::new(f, self.cx.unwrap_or(centered.cx), self.cy.unwrap_or(centered.cy))?;
        let mut params = DistortionParams::new([self.k1, self.k2, self.k3, self.k4], intr);
        let mode: SynthesisMode = self.mode.into();
        let k_inv = match mode {
            SynthesisMode::Forward => None,
            SynthesisMode::InverseModel => Some(self.k_inv.clone().ok_or_else(|| {
                Error::InvalidConfig("--mode inverse needs --k-inv".into())
            })?),
        };
        params.s = match (self.scale, self.fill, &k_inv) {
            (Some(s), _, _) => s,
            (None, FillArg::None, _) => 1.0,
            (None, FillArg::Corner, None) => fill_scale(&params, width, height),
            (None, FillArg::Corner, Some(k)) => fill_scale_inverse_model(&params, k, width, height)?,
        };
        Ok((params, mode, k_inv))
    }
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the validity mask PNG here (default: unset)
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Take parameters and frame size from this manifest
    #[arg(long)]
    pub params_from: Option<PathBuf>,
    /// Zero-based record index within --params-from
    #[arg(long, default_value_t = 0)]
    pub record: usize,
    /// Frame width when parameters come from flags
    #[arg(long, required_unless_present = "params_from")]
    pub width: Option<usize>,
    /// Frame height when parameters come from flags
    #[arg(long, required_unless_present = "params_from")]
    pub height: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, requires = "flow_b")]
    pub flow_a: Option<PathBuf>,
    #[arg(long, requires = "flow_a")]
    pub flow_b: Option<PathBuf>,
    /// Validity mask PNG restricting PSNR and EPE (default: all pixels)
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Score only the central fraction of each side
    #[arg(long, default_value_t = 1.0)]
    pub crop: f64,
}

#[derive(Debug, Args)]
pub struct VizFlowArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Magnitude mapped to full saturation (default: largest magnitude in the flow, at least 10)
    #[arg(long)]
    pub max_mag: Option<f32>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let _ = e.print();
            if !matches!(e.kind(), ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                eprintln!();
                let _ = Cli::command().write_help(&mut std::io::stderr());
            }
            return EXIT_USAGE;
        }
    };

    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(Error::InvalidConfig(format!("cannot build thread pool: {e}"))),
        },
        None => execute(cli.command),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synthesize(a) => synthesize(a),
        Command::Rectify(a) => rectify(a),
        Command::Flow(a) => flow(a),
        Command::Metrics(a) => metrics(a),
        Command::VizFlow(a) => viz_flow(a),
        Command::CompareModes(a) => compare_modes(a),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let line = serde_json::to_string(value).expect("report serializes");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn synthesize(a: SynthesizeArgs) -> Result<()> {
    let cfg = a.sampling.config(&a.input, &a.output, a.mode.into());
    let summary = pipeline::generate_dataset(&cfg)?;
    eprintln!(
        "wrote {} records to {} ({} skipped)",
        summary.records.len(),
        summary.manifest_path.display(),
        summary.failures.len()
    );
    if summary.records.is_empty() {
        return Err(Error::EmptyInput { dir: cfg.input_dir });
    }
    Ok(())
}

fn rectify(a: RectifyArgs) -> Result<()> {
    let distorted = dataio::load_image(&a.image)?;
    let (w, h) = distorted.dims();
    let (params, mode, k_inv) = a.params.resolve(w, h)?;
    let (rectified, mask) = pipeline::oracle_rectify_with(&distorted, &params, mode, k_inv.as_deref())?;
    dataio::save_image(&rectified, &a.out)?;
    if let Some(p) = &a.mask_out {
        dataio::save_mask(&mask, p)?;
    }
    Ok(())
}

fn flow(a: FlowArgs) -> Result<()> {
    let field = match &a.params_from {
        Some(manifest) => {
            let records = dataio::read_manifest(manifest)?;
            let record = records.get(a.record).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "record {} out of range ({} records)",
                    a.record,
                    records.len()
                ))
            })?;
            record.regenerate_flow()?
        }
        None => {
            let (w, h) = (a.width.unwrap_or(0), a.height.unwrap_or(0));
            if w == 0 || h == 0 {
                return Err(Error::InvalidConfig("--width and --height must be positive".into()));
            }
            let (params, mode, k_inv) = a.params.resolve(w, h)?;
            backward_flow(&params, mode, k_inv.as_deref(), w, h)?
        }
    };
    dataio::write_flow(&field, &a.out)
}

fn metrics(a: MetricsArgs) -> Result<()> {
    if !(a.crop > 0.0 && a.crop <= 1.0) {
        return Err(Error::InvalidConfig(format!("--crop must be in (0, 1], got {}", a.crop)));
    }
    let img_a = dataio::load_image(&a.a)?.central_crop(a.crop);
    let img_b = dataio::load_image(&a.b)?.central_crop(a.crop);
    let mask = a
        .mask
        .as_ref()
        .map(|p| dataio::load_mask(p).map(|m| m.central_crop(a.crop)))
        .transpose()?;
    let mut report = MetricReport::new(psnr(&img_a, &img_b, mask.as_ref())?, ssim(&img_a, &img_b)?);
    report.sharpness = Some(sharpness(&img_a)?);
    if let (Some(fa), Some(fb)) = (&a.flow_a, &a.flow_b) {
        let fa = dataio::read_flow(fa)?;
        let fb = dataio::read_flow(fb)?;
        let (w, h) = fa.dims();
        let (x0, y0, cw, ch) = crate::buffer::central_window(w, h, a.crop);
        let (fa, fb) = (fa.crop(x0, y0, cw, ch), fb.crop(x0, y0, cw.min(fb.width()), ch.min(fb.height())));
        report.epe = Some(epe(&fa, &fb, mask.as_ref())?);
    }
    print_json(&report)
}

fn viz_flow(a: VizFlowArgs) -> Result<()> {
    let field = dataio::read_flow(&a.input)?;
    if !field.is_finite() {
        return Err(Error::InvalidConfig("flow contains non-finite values".into()));
    }
    dataio::save_image(&dataio::flow_to_color(&field, a.max_mag), &a.out)
}

fn compare_modes(a: CompareArgs) -> Result<()> {
    let cfg = a.sampling.config(&a.input, Path::new(""), SynthesisMode::Forward);
    let report = pipeline::compare_synthesis_modes(&cfg)?;
    eprintln!(
        "mean round-trip PSNR: forward {:.2} dB, inverse model {:.2} dB",
        report.mean_forward_psnr, report.mean_inverse_model_psnr
    );
    print_json(&report)
}
