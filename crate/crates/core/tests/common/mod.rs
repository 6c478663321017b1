#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fdbw_core::ImageBuffer;

pub fn photo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/photos")
}

pub fn photo(name: &str) -> PathBuf {
    photo_dir().join(name)
}

/// Copies the first `n` fixture photos (name order) into `dir`.
pub fn copy_photos(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    let mut names: Vec<_> = fs::read_dir(photo_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    for p in names.into_iter().take(n) {
        fs::copy(&p, dir.join(p.file_name().unwrap())).unwrap();
    }
}

/// Relative path to contents for every file below `root`.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub const TAN_SERIES: [f64; 4] = [1.0 / 3.0, 2.0 / 15.0, 17.0 / 315.0, 62.0 / 2835.0];

/// Direct odd-polynomial evaluation, kept separate from the library's Horner form.
pub fn poly_distort(theta: f64, k: &[f64; 4]) -> f64 {
    theta + k[0] * theta.powi(3) + k[1] * theta.powi(5) + k[2] * theta.powi(7) + k[3] * theta.powi(9)
}

/// Plain bisection for an increasing `g` on `[lo, hi]`.
pub fn bisect(mut lo: f64, mut hi: f64, target: f64, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let n = a.pixels().len() as f64 * 3.0;
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs() as f64))
        .sum::<f64>()
        / n
}
