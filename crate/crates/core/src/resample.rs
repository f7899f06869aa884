//! Interpolation strategies and inverse warping of raster planes.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{Homography, Point2};
use crate::registry::Registry;

/// Borrowed interleaved raster (`channels` samples per pixel, row-major).
#[derive(Clone, Copy, Debug)]
pub struct Plane<'a> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: &'a [f64],
}

impl Plane<'_> {
    #[inline]
    fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Whether `(x, y)` lies in `[0, w−1] × [0, h−1]`.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }
}

/// Reads a continuous location of a plane. Pixel `(i, j)` (row, column)
/// sits at continuous coordinates `(j, i)`.
pub trait Resampler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Writes all channels at `(x, y)` into `out`. The location must satisfy
    /// [`Plane::contains`].
    fn sample(&self, plane: &Plane<'_>, x: f64, y: f64, out: &mut [f64]);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Bilinear;

impl Resampler for Bilinear {
    fn name(&self) -> &'static str {
        "bilinear"
    }

    fn sample(&self, plane: &Plane<'_>, x: f64, y: f64, out: &mut [f64]) {
        let x0 = (x.floor() as usize).min(plane.width - 1);
        let y0 = (y.floor() as usize).min(plane.height - 1);
        let x1 = (x0 + 1).min(plane.width - 1);
        let y1 = (y0 + 1).min(plane.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        for (c, o) in out.iter_mut().enumerate() {
            let top = plane.at(x0, y0, c) * (1.0 - fx) + plane.at(x1, y0, c) * fx;
            let bottom = plane.at(x0, y1, c) * (1.0 - fx) + plane.at(x1, y1, c) * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
    }
}

/// Nearest pixel, ties rounding up.
#[derive(Clone, Copy, Debug, Default)]
pub struct Nearest;

impl Resampler for Nearest {
    fn name(&self) -> &'static str {
        "nearest"
    }

    fn sample(&self, plane: &Plane<'_>, x: f64, y: f64, out: &mut [f64]) {
        let xi = ((x + 0.5).floor() as usize).min(plane.width - 1);
        let yi = ((y + 0.5).floor() as usize).min(plane.height - 1);
        for (c, o) in out.iter_mut().enumerate() {
            *o = plane.at(xi, yi, c);
        }
    }
}

pub fn resamplers() -> Registry<dyn Resampler> {
    let mut r: Registry<dyn Resampler> = Registry::new("resampler");
    r.register("bilinear", Arc::new(Bilinear));
    r.register("nearest", Arc::new(Nearest));
    r
}

/// Inverse warp: output pixel `q` reads `plane` at `h⁻¹(q)`. Locations that
/// fall outside the source (or map to infinity) produce zeros.
pub fn warp_plane(
    plane: &Plane<'_>,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    resampler: &dyn Resampler,
) -> Result<Vec<f64>> {
    let inv = h.inverse()?;
    let ch = plane.channels;
    let mut out = vec![0.0; out_w * out_h * ch];
    if plane.width == 0 || plane.height == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(out_w * ch.max(1))
        .enumerate()
        .for_each(|(row, line)| {
            for col in 0..out_w {
                let Ok(src) = inv.apply(Point2::new(col as f64, row as f64)) else {
                    continue;
                };
                if plane.contains(src.x, src.y) {
                    resampler.sample(plane, src.x, src.y, &mut line[col * ch..(col + 1) * ch]);
                }
            }
        });
    Ok(out)
}
