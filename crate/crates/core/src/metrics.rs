//! Image and flow scores: PSNR, SSIM, endpoint error and a Laplacian sharpness proxy.
//!
//! All image metrics work on unit-interval samples with a dynamic range of 1.

use serde::{Deserialize, Serialize};

use crate::buffer::{FlowField, ImageBuffer, ValidityMask};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Per-pair scores as emitted on standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `None` together with `psnr_infinite` when the inputs are identical.
    pub psnr: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sharpness: Option<f64>,
}

impl MetricReport {
    pub fn new(psnr: f64, ssim: f64) -> Self {
        let infinite = psnr.is_infinite();
        Self {
            psnr: (!infinite).then_some(psnr),
            psnr_infinite: infinite,
            ssim,
            epe: None,
            sharpness: None,
        }
    }

    pub fn psnr_value(&self) -> f64 {
        self.psnr.unwrap_or(f64::INFINITY)
    }
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { a, b });
    }
    Ok(())
}

/// `10 log10(1 / MSE)` over the masked pixels; `+inf` when they are identical.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&ValidityMask>) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    if let Some(m) = mask {
        check_dims(a.dims(), m.dims())?;
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if mask.is_some_and(|m| !m.flags()[i]) {
            continue;
        }
        for c in 0..3 {
            let d = pa[c] as f64 - pb[c] as f64;
            sum += d * d;
        }
        count += 3;
    }
    if count == 0 {
        return Err(Error::InvalidConfig("mask selects no pixels".into()));
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Normalized 1-D Gaussian taps; their outer product is the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Mean local SSIM over every full 11x11 window, averaged across channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);

    let mut total = 0.0;
    for c in 0..3 {
        let xa: Vec<f64> = a.pixels().iter().map(|p| p[c] as f64).collect();
        let xb: Vec<f64> = b.pixels().iter().map(|p| p[c] as f64).collect();
        let aa: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();

        let mu_a = filter_valid(&xa, w, h, &taps);
        let mu_b = filter_valid(&xb, w, h, &taps);
        let e_aa = filter_valid(&aa, w, h, &taps);
        let e_bb = filter_valid(&bb, w, h, &taps);
        let e_ab = filter_valid(&ab, w, h, &taps);

        let mut sum = 0.0;
        for i in 0..ow * oh {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
        total += sum / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

/// Separable "valid" correlation with the symmetric taps.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[(y + j) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean endpoint error over the masked pixels.
pub fn epe(pred: &FlowField, gt: &FlowField, mask: Option<&ValidityMask>) -> Result<f64> {
    check_dims(pred.dims(), gt.dims())?;
    if let Some(m) = mask {
        check_dims(pred.dims(), m.dims())?;
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (i, (p, g)) in pred.vectors().iter().zip(gt.vectors()).enumerate() {
        if mask.is_some_and(|m| !m.flags()[i]) {
            continue;
        }
        let du = p[0] as f64 - g[0] as f64;
        let dv = p[1] as f64 - g[1] as f64;
        sum += du.hypot(dv);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidConfig("mask selects no pixels".into()));
    }
    Ok(sum / count as f64)
}

/// Rec. 601 luma.
#[inline]
pub fn luminance(p: [f32; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Variance of the 4-neighbour Laplacian of the luma over interior pixels.
pub fn sharpness(img: &ImageBuffer) -> Result<f64> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let y: Vec<f64> = img.pixels().iter().map(|&p| luminance(p)).collect();
    let at = |x: usize, r: usize| y[r * w + x];
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for x in 1..w - 1 {
            responses.push(at(x - 1, r) + at(x + 1, r) + at(x, r - 1) + at(x, r + 1) - 4.0 * at(x, r));
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    Ok(responses.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()])
    }

    fn box_blur(img: &ImageBuffer) -> ImageBuffer {
        let (w, h) = img.dims();
        ImageBuffer::from_fn(w, h, |x, y| {
            let mut acc = [0.0f32; 3];
            let mut n = 0.0;
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let p = img.get(xx, yy);
                    for c in 0..3 {
                        acc[c] += p[c];
                    }
                    n += 1.0;
                }
            }
            acc.map(|v| v / n)
        })
    }

    /// Direct 2-D window evaluation, independent of the separable path.
    fn ssim_reference(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
        let (w, h) = a.dims();
        let g: Vec<f64> = {
            let raw: Vec<f64> = (0..11)
                .flat_map(|j| (0..11).map(move |i| (j, i)))
                .map(|(j, i)| {
                    let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
                    (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        };
        let (c1, c2) = (0.0001, 0.0009);
        let mut total = 0.0;
        for c in 0..3 {
            let mut sum = 0.0;
            let mut n = 0.0;
            for y0 in 0..=h - 11 {
                for x0 in 0..=w - 11 {
                    let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for j in 0..11 {
                        for i in 0..11 {
                            let wt = g[j * 11 + i];
                            let va = a.get(x0 + i, y0 + j)[c] as f64;
                            let vb = b.get(x0 + i, y0 + j)[c] as f64;
                            ma += wt * va;
                            mb += wt * vb;
                            saa += wt * va * va;
                            sbb += wt * vb * vb;
                            sab += wt * va * vb;
                        }
                    }
                    let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                    sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    n += 1.0;
                }
            }
            total += sum / n;
        }
        total / 3.0
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = noise(8, 8, 1);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
        let r = MetricReport::new(f64::INFINITY, 1.0);
        assert!(r.psnr_infinite && r.psnr.is_none());
    }

    #[test]
    fn psnr_closed_forms() {
        let a = ImageBuffer::filled(4, 4, [0.5; 3]);
        let b = ImageBuffer::filled(4, 4, [0.5 + 0.001f32.sqrt(); 3]);
        assert!((psnr(&a, &b, None).unwrap() - 30.0).abs() < 1e-4);
        let zero = ImageBuffer::filled(4, 4, [0.0; 3]);
        let one = ImageBuffer::filled(4, 4, [1.0; 3]);
        assert_eq!(psnr(&zero, &one, None).unwrap(), 0.0);
    }

    #[test]
    fn psnr_respects_mask() {
        let a = ImageBuffer::filled(2, 1, [0.0; 3]);
        let b = ImageBuffer::from_fn(2, 1, |x, _| [x as f32; 3]);
        let m = ValidityMask::from_flags(2, 1, vec![true, false]).unwrap();
        assert_eq!(psnr(&a, &b, Some(&m)).unwrap(), f64::INFINITY);
        let none = ValidityMask::filled(2, 1, false);
        assert!(psnr(&a, &b, Some(&none)).is_err());
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let err = psnr(&noise(4, 4, 0), &noise(4, 5, 0), None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn psnr_is_symmetric_and_drops_with_noise() {
        let a = noise(32, 32, 2);
        let n = noise(32, 32, 3);
        let mut last = f64::INFINITY;
        for amp in [0.01f32, 0.02, 0.05, 0.1] {
            let b = ImageBuffer::from_fn(32, 32, |x, y| {
                let (p, q) = (a.get(x, y), n.get(x, y));
                [0, 1, 2].map(|c| p[c] + amp * (q[c] - 0.5))
            });
            let v = psnr(&a, &b, None).unwrap();
            assert_eq!(v, psnr(&b, &a, None).unwrap());
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn ssim_identity() {
        let a = noise(24, 19, 4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_closed_form() {
        let a = ImageBuffer::filled(16, 16, [0.2; 3]);
        let b = ImageBuffer::filled(16, 16, [0.4; 3]);
        let c1 = 1e-4;
        let expected = (2.0 * 0.2 * 0.4 + c1) / (0.2f64.powi(2) + 0.4f64.powi(2) + c1);
        let got = ssim(&a, &b).unwrap();
        // f32 storage of 0.2 and 0.4 limits agreement
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        assert!((got - 0.8001).abs() < 1e-4);
    }

    #[test]
    fn ssim_matches_direct_reference() {
        let a = noise(23, 17, 5);
        let b = box_blur(&noise(23, 17, 6));
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_reference(&a, &b);
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        assert!((fast - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_inputs() {
        let a = noise(10, 40, 1);
        assert!(matches!(ssim(&a, &a), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn epe_cases() {
        let a = FlowField::uniform(5, 4, [1.0, -2.0]);
        assert_eq!(epe(&a, &a, None).unwrap(), 0.0);
        let b = FlowField::uniform(5, 4, [4.0, 2.0]);
        assert_eq!(epe(&a, &b, None).unwrap(), 5.0);
        assert_eq!(epe(&b, &a, None).unwrap(), 5.0);
    }

    #[test]
    fn epe_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut gen = || FlowField::from_fn(31, 7, |_, _| [rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)]);
        let (a, b) = (gen(), gen());
        let mut sum = 0.0f64;
        for y in 0..7 {
            for x in 0..31 {
                let (p, q) = (a.get(x, y), b.get(x, y));
                sum += (((p[0] - q[0]) as f64).powi(2) + ((p[1] - q[1]) as f64).powi(2)).sqrt();
            }
        }
        assert!((epe(&a, &b, None).unwrap() - sum / 217.0).abs() < 1e-6);
    }

    #[test]
    fn sharpness_cases() {
        assert_eq!(sharpness(&ImageBuffer::filled(9, 9, [0.3; 3])).unwrap(), 0.0);
        let img = noise(40, 40, 8);
        let blurred = box_blur(&box_blur(&img));
        assert!(sharpness(&blurred).unwrap() < sharpness(&img).unwrap());
        assert!(sharpness(&ImageBuffer::filled(2, 9, [0.0; 3])).is_err());
    }
}
