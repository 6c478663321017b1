//! Multi-scale stacks built with a 2x2 box filter.
//!
//! An output pixel `i` averages source pixels `2i` and `2i+1` (fewer at an odd
//! border), so its center sits at source coordinate `2i + 0.5`.

use crate::buffer::{FlowField, ImageBuffer};
use crate::error::{Error, Result};

/// Levels ordered finest first; each level is half (rounded up) the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevels<T> {
    levels: Vec<T>,
}

impl<T> PyramidLevels<T> {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `i`, where 0 is the input resolution.
    pub fn get(&self, i: usize) -> Option<&T> {
        self.levels.get(i)
    }

    pub fn finest(&self) -> &T {
        &self.levels[0]
    }

    pub fn coarsest(&self) -> &T {
        self.levels.last().expect("pyramid has at least one level")
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.levels.iter()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.levels
    }
}

/// Averages the `≤ 2x2` block of source pixels that feed output pixel `(x, y)`.
fn box_average<const N: usize>(
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    get: impl Fn(usize, usize) -> [f32; N],
) -> [f32; N] {
    let xs = [2 * x, (2 * x + 1).min(w - 1)];
    let ys = [2 * y, (2 * y + 1).min(h - 1)];
    let nx = if xs[0] == xs[1] { 1 } else { 2 };
    let ny = if ys[0] == ys[1] { 1 } else { 2 };
    let mut acc = [0.0f32; N];
    for &sy in &ys[..ny] {
        for &sx in &xs[..nx] {
            let p = get(sx, sy);
            for c in 0..N {
                acc[c] += p[c];
            }
        }
    }
    let n = (nx * ny) as f32;
    acc.map(|v| v / n)
}

/// Half-resolution image, `ceil(W/2) x ceil(H/2)`.
pub fn downsample_image(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = img.dims();
    ImageBuffer::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        box_average(w, h, x, y, |sx, sy| img.get(sx, sy))
    })
}

/// Half-resolution flow: 2x2 average of the vectors, then halved so the
/// displacement is expressed in coarse-grid pixels.
pub fn downsample_flow(flow: &FlowField) -> FlowField {
    let (w, h) = flow.dims();
    FlowField::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        box_average(w, h, x, y, |sx, sy| flow.get(sx, sy)).map(|v| 0.5 * v)
    })
}

/// `levels` images, the first being `img` itself.
pub fn image_pyramid(img: &ImageBuffer, levels: usize) -> Result<PyramidLevels<ImageBuffer>> {
    check_size(img.dims(), levels)?;
    Ok(build(img.clone(), levels, downsample_image))
}

/// `levels` flows, the first being `flow` itself.
pub fn flow_pyramid(flow: &FlowField, levels: usize) -> Result<PyramidLevels<FlowField>> {
    check_size(flow.dims(), levels)?;
    Ok(build(flow.clone(), levels, downsample_flow))
}

fn check_size((w, h): (usize, usize), levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidConfig("pyramid needs at least one level".into()));
    }
    let min = 1usize
        .checked_shl((levels - 1) as u32)
        .unwrap_or(usize::MAX);
    if w.min(h) < min {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min,
        });
    }
    Ok(())
}

fn build<T>(base: T, levels: usize, down: impl Fn(&T) -> T) -> PyramidLevels<T> {
    let mut out = Vec::with_capacity(levels);
    out.push(base);
    while out.len() < levels {
        let next = down(out.last().expect("non-empty"));
        out.push(next);
    }
    PyramidLevels { levels: out }
}
