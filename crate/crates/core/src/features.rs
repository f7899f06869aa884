//! Stand-in image encoder producing a three-level pyramid.
//!
//! Each level average-pools the image over stride×stride cells (partial
//! cells at the border average what they cover), then maps the pixel
//! channels plus normalized coordinates to `C` channels through a seeded
//! linear projection and `tanh`. It has no learned content; it only gives
//! the lifting stage deterministic, spatially varying features.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lifting::pyramid::{FeatureMap, FeaturePyramid};
use crate::raster::ImageBuffer;
use crate::seeded;
use crate::vpsampler::LEVEL_STRIDES;

/// Inputs per cell: up to 3 colour channels, x, y and a constant.
const INPUTS: usize = 6;

pub fn encode_pyramid(img: &ImageBuffer, channels: usize, seed: u64) -> Result<FeaturePyramid> {
    if channels == 0 {
        return Err(Error::InvalidArgument("feature channels must be positive".into()));
    }
    let rgb = img.to_rgb();
    let dims = FeaturePyramid::level_dims_for(img.width(), img.height());
    let mut levels = Vec::with_capacity(3);
    for (l, (&stride, (lw, lh))) in LEVEL_STRIDES.iter().zip(dims).enumerate() {
        let proj = seeded::uniform(seed, 200 + l as u64, INPUTS * channels, 1.0);
        let mut data = vec![0.0; lw * lh * channels];
        data.par_chunks_mut(lw * channels).enumerate().for_each(|(y, row)| {
            for x in 0..lw {
                let mut input = [0.0; INPUTS];
                let (x0, y0) = (x * stride, y * stride);
                let (x1, y1) = ((x0 + stride).min(rgb.width()), (y0 + stride).min(rgb.height()));
                let n = ((x1 - x0) * (y1 - y0)) as f64;
                for py in y0..y1 {
                    for px in x0..x1 {
                        for (c, v) in input.iter_mut().take(3).enumerate() {
                            *v += rgb.get(px, py, c);
                        }
                    }
                }
                for v in input.iter_mut().take(3) {
                    *v /= n;
                }
                input[3] = (x as f64 + 0.5) / lw as f64 - 0.5;
                input[4] = (y as f64 + 0.5) / lh as f64 - 0.5;
                input[5] = 1.0;
                let out = &mut row[x * channels..(x + 1) * channels];
                for (k, o) in out.iter_mut().enumerate() {
                    let s: f64 = input.iter().enumerate().map(|(i, v)| v * proj[i * channels + k]).sum();
                    *o = s.tanh();
                }
            }
        });
        levels.push(FeatureMap::new(lw, lh, channels, data)?);
    }
    let levels: [FeatureMap; 3] = levels.try_into().expect("three levels");
    FeaturePyramid::new(levels)
}
