mod common;

use std::f64::consts::PI;

use common::*;
use fdbw_core::dataio::flow_to_color;
use fdbw_core::geometry::{validate_inverse_model, DistortionParams, Intrinsics};
use fdbw_core::metrics::{epe, sharpness};
use fdbw_core::pipeline::{central_psnr, oracle_rectify, prepare_image};
use fdbw_core::pyramid::downsample_flow;
use fdbw_core::warp::{fill_scale, gt_backward_flow, synthesize_distorted, SynthesisMode};
use fdbw_core::ImageBuffer;

#[test]
fn round_trip_on_photos() {
    let intr = Intrinsics::centered(0.8 * 256.0, 256, 256).unwrap();
    for (name, k1) in [("chelsea.jpg", 0.1), ("coins.jpg", 0.2), ("rocket.jpg", 0.3)] {
        let gt = prepare_image(&photo(name), 256).unwrap();
        let mut params = DistortionParams::new([k1, 0.01, -0.01, 0.0], intr);
        params.s = fill_scale(&params, 256, 256);
        let (distorted, valid) = synthesize_distorted(&gt, &params, SynthesisMode::Forward, None).unwrap();
        assert!(valid.all_valid(), "{name}");
        let (rectified, mask) = oracle_rectify(&distorted, &params).unwrap();
        let before = central_psnr(&distorted, &gt, None).unwrap();
        let after = central_psnr(&rectified, &gt, Some(&mask)).unwrap();
        assert!(after >= 28.0 && after >= before + 6.0, "{name}: {before} -> {after}");
    }
}

#[test]
fn downsampled_flow_matches_native_half_resolution() {
    let k = [0.3, 0.02, -0.01, 0.005];
    let fine_intr = Intrinsics::centered(0.8 * 512.0, 512, 512).unwrap();
    let mut fine = DistortionParams::new(k, fine_intr);
    fine.s = fill_scale(&fine, 512, 512);
    // coarse pixel i covers fine pixels 2i and 2i+1, centered at 2i + 0.5
    let coarse_intr = Intrinsics::new(
        fine_intr.f / 2.0,
        (fine_intr.cx - 0.5) / 2.0,
        (fine_intr.cy - 0.5) / 2.0,
    )
    .unwrap();
    let coarse = DistortionParams::new(k, coarse_intr).with_scale(fine.s);

    let down = downsample_flow(&gt_backward_flow(&fine, 512, 512).unwrap());
    let native = gt_backward_flow(&coarse, 256, 256).unwrap();
    assert_eq!(down.dims(), native.dims());
    let e = epe(&down, &native, None).unwrap();
    assert!(e < 0.25, "EPE {e}");
}

#[test]
fn radial_flow_colors_are_rotationally_symmetric() {
    let n = 201;
    let intr = Intrinsics::centered(160.0, n, n).unwrap();
    let params = DistortionParams::new([0.4, 0.0, 0.0, 0.0], intr);
    let img = flow_to_color(&gt_backward_flow(&params, n, n).unwrap(), None);
    let c = (n / 2) as i64;
    let at = |dx: i64, dy: i64| img.get((c + dx) as usize, (c + dy) as usize);
    let close = |a: [f32; 3], b: [f32; 3]| (0..3).all(|i| (a[i] - b[i]).abs() < 1e-5);

    // rotating a pixel by 90 degrees about the center keeps its saturation and
    // moves its hue by 90 degrees
    let rotate_hue = |p: [f32; 3]| rgb_to_hue_sat(p);
    for (dx, dy) in [(30, 0), (17, 41), (63, -22), (5, 90)] {
        let (h0, s0) = rotate_hue(at(dx, dy));
        let (h1, s1) = rotate_hue(at(-dy, dx));
        assert!((s0 - s1).abs() < 1e-5);
        let turn = (h1 - h0).rem_euclid(360.0);
        assert!((turn - 90.0).abs() < 1e-2, "hue turned by {turn}");
        // point reflection flips direction
        let (h2, _) = rotate_hue(at(-dx, -dy));
        assert!(((h2 - h0).rem_euclid(360.0) - 180.0).abs() < 1e-2);
    }
    // equal radius, saturation equal along a ring
    let ring: Vec<f64> = (0..16)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / 16.0;
            let (dx, dy) = ((60.0 * a.cos()).round() as i64, (60.0 * a.sin()).round() as i64);
            let r = ((dx * dx + dy * dy) as f64).sqrt();
            rgb_to_hue_sat(at(dx, dy)).1 / r
        })
        .collect();
    let (lo, hi) = ring.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 1.05, "{lo} {hi}");
    assert!(close(at(0, 0), [1.0; 3]));
}

/// Hue in degrees and saturation of an HSV color with value 1.
fn rgb_to_hue_sat(p: [f32; 3]) -> (f64, f64) {
    let [r, g, b] = p.map(|v| v as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let hue = if c == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / c + 2.0)
    } else {
        60.0 * ((r - g) / c + 4.0)
    };
    (hue, c / max)
}

fn checkerboard(n: usize, cell: usize) -> ImageBuffer {
    ImageBuffer::from_fn(n, n, |x, y| [((x / cell + y / cell) % 2) as f32; 3])
}

fn box_blur(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = img.dims();
    ImageBuffer::from_fn(w, h, |x, y| {
        let mut acc = [0.0f32; 3];
        let mut n = 0.0;
        for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                let p = img.get(xx, yy);
                (0..3).for_each(|c| acc[c] += p[c]);
                n += 1.0;
            }
        }
        acc.map(|v| v / n)
    })
}

#[test]
fn sharpness_orders_checkerboard_photo_blur() {
    let photo = prepare_image(&photo("astronaut.jpg"), 128).unwrap();
    let blurred = box_blur(&box_blur(&photo));
    let board = sharpness(&checkerboard(128, 1)).unwrap();
    let sharp = sharpness(&photo).unwrap();
    let soft = sharpness(&blurred).unwrap();
    assert!(board > sharp && sharp > soft, "{board} {sharp} {soft}");
}

#[test]
fn equivalent_models_have_equal_sharpness() {
    // atan series in theta_d inverts the tan series in theta_u
    let k_inv: Vec<f64> = (0..8)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (2 * i + 1) as f64)
        .collect();
    let size = 256;
    let intr = Intrinsics::centered(300.0, size, size).unwrap();
    assert!(validate_inverse_model(&k_inv, 0.7));
    let params = DistortionParams::new(TAN_SERIES, intr);
    for name in ["astronaut.jpg", "gravel.jpg", "coffee.jpg"] {
        let gt = prepare_image(&photo(name), size).unwrap();
        let (fwd, _) = synthesize_distorted(&gt, &params, SynthesisMode::Forward, None).unwrap();
        let (inv, _) =
            synthesize_distorted(&gt, &params, SynthesisMode::InverseModel, Some(&k_inv)).unwrap();
        let ratio = sharpness(&inv).unwrap() / sharpness(&fwd).unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "{name}: ratio {ratio}");
        assert!(mean_abs_diff(&fwd, &inv) < 2e-3);
    }
}
