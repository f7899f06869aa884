//! Multi-scale 2D feature maps.
//!
//! File layout (little-endian), repeated for the three levels in stride
//! order 4, 8, 16: `h w C` as three `u32`, then `h·w·C` `f32` samples in
//! row-major order with channel fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::resample::{Bilinear, Plane, Resampler};
use crate::vpsampler::{clamp_to, LEVEL_STRIDES};
use crate::volume::LeReader;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::DimensionMismatch(format!(
                "empty feature map {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} feature map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn plane(&self) -> Plane<'_> {
        Plane {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: &self.data,
        }
    }
}

/// Bilinear feature at `p`, after clamping `p` onto the map.
pub fn bilinear_sample(map: &FeatureMap, p: Point2) -> Vec<f64> {
    let mut out = vec![0.0; map.channels];
    bilinear_sample_into(map, p, &mut out);
    out
}

pub(crate) fn bilinear_sample_into(map: &FeatureMap, p: Point2, out: &mut [f64]) {
    let q = clamp_to(p, map.width, map.height);
    Bilinear.sample(&map.plane(), q.x, q.y, out);
}

/// Three feature maps at strides 4, 8 and 16 sharing one channel width.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    levels: [FeatureMap; 3],
}

impl FeaturePyramid {
    pub fn new(levels: [FeatureMap; 3]) -> Result<Self> {
        let c = levels[0].channels;
        if levels.iter().any(|l| l.channels != c) {
            return Err(Error::DimensionMismatch(format!(
                "pyramid channel widths differ: {:?}",
                levels.iter().map(|l| l.channels).collect::<Vec<_>>()
            )));
        }
        Ok(Self { levels })
    }

    /// Level sizes for a `width`×`height` image (ceiling division by stride).
    pub fn level_dims_for(width: usize, height: usize) -> [(usize, usize); 3] {
        LEVEL_STRIDES.map(|s| (width.div_ceil(s), height.div_ceil(s)))
    }

    pub fn level(&self, i: usize) -> &FeatureMap {
        &self.levels[i]
    }

    pub fn levels(&self) -> &[FeatureMap; 3] {
        &self.levels
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels
    }

    pub fn level_dims(&self) -> [(usize, usize); 3] {
        [0, 1, 2].map(|i| (self.levels[i].width, self.levels[i].height))
    }

    /// Checks that each level is the stride-reduced size of a
    /// `width`×`height` image, allowing either rounding direction.
    pub fn check_image_dims(&self, width: usize, height: usize) -> Result<()> {
        for (l, &s) in self.levels.iter().zip(&LEVEL_STRIDES) {
            let ok = |n: usize, full: usize| n == full / s || n == full.div_ceil(s);
            if !ok(l.width, width) || !ok(l.height, height) {
                return Err(Error::DimensionMismatch(format!(
                    "stride-{s} level is {}x{}, image is {width}x{height}",
                    l.width, l.height
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for l in &self.levels {
            for d in [l.height, l.width, l.channels] {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &l.data {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new(bytes, "feature pyramid");
        let mut levels = Vec::with_capacity(3);
        for _ in 0..3 {
            let h = r.u32()? as usize;
            let w = r.u32()? as usize;
            let c = r.u32()? as usize;
            let n = h
                .checked_mul(w)
                .and_then(|v| v.checked_mul(c))
                .ok_or_else(|| Error::format("feature pyramid", "header dimensions overflow"))?;
            levels.push(FeatureMap::new(w, h, c, r.f32s(n)?)?);
        }
        r.finish()?;
        Self::new(levels.try_into().expect("three levels"))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_examples() {
        let m = FeatureMap::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&m, Point2::new(0.25, 0.0)), vec![0.25]);
        assert_eq!(bilinear_sample(&m, Point2::new(1.0, 0.0)), vec![1.0]);
        // Clamped onto the map.
        assert_eq!(bilinear_sample(&m, Point2::new(-3.0, 9.0)), vec![0.0]);
        let flat = FeatureMap::new(3, 1, 2, vec![2.0, 5.0, 2.0, 5.0, 9.0, 9.0]).unwrap();
        assert_eq!(bilinear_sample(&flat, Point2::new(0.5, 0.0)), vec![2.0, 5.0]);
    }

    #[test]
    fn pyramid_bytes_round_trip() {
        let lv = |w, h| FeatureMap::from_fn(w, h, 2, |x, y, c| (x + 10 * y) as f64 + 0.5 * c as f64).unwrap();
        let p = FeaturePyramid::new([lv(4, 3), lv(2, 2), lv(1, 1)]).unwrap();
        let b = p.to_bytes();
        assert_eq!(&b[..12], &[3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(FeaturePyramid::from_bytes(&b).unwrap(), p);
        assert!(FeaturePyramid::from_bytes(&b[..20]).is_err());
    }

    #[test]
    fn mismatched_channels_rejected() {
        let a = FeatureMap::new(1, 1, 2, vec![0.0; 2]).unwrap();
        let b = FeatureMap::new(1, 1, 3, vec![0.0; 3]).unwrap();
        assert!(FeaturePyramid::new([a.clone(), a, b]).is_err());
    }

    #[test]
    fn image_dims_check() {
        let dims = FeaturePyramid::level_dims_for(1226, 370);
        assert_eq!(dims, [(307, 93), (154, 47), (77, 24)]);
        let lv = |(w, h): (usize, usize)| FeatureMap::new(w, h, 1, vec![0.0; w * h]).unwrap();
        let p = FeaturePyramid::new(dims.map(lv)).unwrap();
        assert!(p.check_image_dims(1226, 370).is_ok());
        assert!(p.check_image_dims(1226, 740).is_err());
    }
}
