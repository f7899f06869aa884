//! Image and depth rasters and their file formats.
//!
//! Colour images are 8-bit PNG or binary PPM/PGM, held in memory as reals in
//! `[0, 1]`. Depth maps are 16-bit PNG where `meters = raw / 256` and a raw
//! value of 0 marks a pixel without depth.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};

/// Upper bound (exclusive) on a usable depth, in meters.
pub const MAX_DEPTH: f64 = 200.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite image sample".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
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

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

/// `[0, 1]` real to 8-bit with round-half-up.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let img = image::ImageReader::open(path.as_ref())?
        .with_guessed_format()?
        .decode()?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) => {
            (1, img.to_luma8().into_raw())
        }
        _ => (3, img.to_rgb8().into_raw()),
    };
    let data = bytes.into_iter().map(|b| f64::from(b) / 255.0).collect();
    ImageBuffer::new(width, height, channels, data)
}

/// Writes PNG, or binary PPM/PGM when the extension is `.ppm`, `.pgm` or `.pnm`.
pub fn write_image(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let color = if img.channels == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let (w, h) = (img.width as u32, img.height as u32);
    let bytes = img.to_bytes();
    match ImageFormat::from_path(path).ok() {
        Some(ImageFormat::Pnm) => {
            let subtype = if img.channels == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            let out = BufWriter::new(File::create(path)?);
            PnmEncoder::new(out)
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)?;
        }
        _ => image::save_buffer_with_format(path, &bytes, w, h, color, ImageFormat::Png)?,
    }
    Ok(())
}

/// Metric depth with a per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Values outside `(0, MAX_DEPTH)` (or non-finite) are marked invalid and
    /// stored as 0.
    pub fn from_meters(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} depth values for a {width}x{height} map",
                values.len()
            )));
        }
        let valid: Vec<bool> = values.iter().map(|&d| is_valid_depth(d)).collect();
        let values = values
            .into_iter()
            .zip(&valid)
            .map(|(d, &ok)| if ok { d } else { 0.0 })
            .collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Depth at `(x, y)` if the pixel is valid.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterates `(x, y, depth)` over valid pixels in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.values.len())
            .filter(|&i| self.valid[i])
            .map(|i| (i % self.width, i / self.width, self.values[i]))
    }
}

pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0 && d < MAX_DEPTH
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthMap> {
    let img = image::ImageReader::open(path.as_ref())?
        .with_guessed_format()?
        .decode()?;
    let raw = match img {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::format(
                "depth image",
                format!("expected 16-bit grayscale, got {:?}", other.color()),
            ))
        }
    };
    let (w, h) = (raw.width() as usize, raw.height() as usize);
    let values = raw
        .into_raw()
        .into_iter()
        .map(|r| if r == 0 { 0.0 } else { f64::from(r) / 256.0 })
        .collect();
    DepthMap::from_meters(w, h, values)
}

pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let raw: Vec<u16> = depth
        .values
        .iter()
        .zip(&depth.valid)
        .map(|(&d, &ok)| {
            if ok {
                (d * 256.0).round().clamp(1.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        depth.width as u32,
        depth.height as u32,
        raw,
    )
    .ok_or_else(|| Error::DimensionMismatch("depth buffer size".into()))?;
    buf.save_with_format(path.as_ref(), ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 -> 128
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.3), 255);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageBuffer::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(ImageBuffer::new(1, 1, 2, vec![0.0; 2]).is_err());
        assert!(ImageBuffer::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(DepthMap::from_meters(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn depth_validity() {
        let d = DepthMap::from_meters(4, 1, vec![0.0, 5.0, 250.0, f64::NAN]).unwrap();
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.get(1, 0), Some(5.0));
        assert_eq!(d.get(2, 0), None);
    }

    #[test]
    fn png_and_pnm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(5, 3, 3, |x, y, c| ((x + 2 * y + c) % 4) as f64 / 3.0).unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            write_image(&p, &img).unwrap();
            let back = read_image(&p).unwrap();
            assert_eq!(back.channels(), 3);
            for (a, b) in img.data().iter().zip(back.data()) {
                assert_eq!(quantize(*a), quantize(*b));
            }
        }
        let gray = ImageBuffer::from_fn(4, 4, 1, |x, _, _| x as f64 / 3.0).unwrap();
        let p = dir.path().join("g.pgm");
        write_image(&p, &gray).unwrap();
        assert_eq!(read_image(&p).unwrap().channels(), 1);
    }

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = DepthMap::from_meters(3, 2, vec![0.0, 1.5, 10.25, 50.0, 0.0, 199.0]).unwrap();
        let p = dir.path().join("d.png");
        write_depth_png(&p, &d).unwrap();
        let back = read_depth_png(&p).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn eight_bit_depth_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d8.png");
        write_image(&p, &ImageBuffer::zeros(2, 2, 1).unwrap()).unwrap();
        assert!(read_depth_png(&p).unwrap_err().is_input_error());
    }
}
