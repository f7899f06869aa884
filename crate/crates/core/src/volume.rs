//! Dense voxel feature volumes and their binary file format.
//!
//! File layout (little-endian): `X Y Z C` as four `u32`, followed by
//! `X·Y·Z·C` `f32` samples with x slowest and channel fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    dims: [usize; 3],
    channels: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn new(dims: [usize; 3], channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {:?}x{channels} volume",
                data.len(),
                dims
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite volume sample".into()));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Self {
            dims,
            channels,
            data: vec![0.0; dims.iter().product::<usize>() * channels],
        }
    }

    pub fn from_fn(dims: [usize; 3], channels: usize, mut f: impl FnMut([usize; 3], usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product::<usize>() * channels);
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    for c in 0..channels {
                        data.push(f([x, y, z], c));
                    }
                }
            }
        }
        Self::new(dims, channels, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    pub fn voxel(&self, idx: [usize; 3]) -> &[f64] {
        let i = self.linear_index(idx) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn voxel_mut(&mut self, idx: [usize; 3]) -> &mut [f64] {
        let i = self.linear_index(idx) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn get(&self, idx: [usize; 3], c: usize) -> f64 {
        self.voxel(idx)[c]
    }

    pub fn same_shape(&self, other: &FeatureVolume) -> bool {
        self.dims == other.dims && self.channels == other.channels
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        for d in self.dims.iter().chain(std::iter::once(&self.channels)) {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new(bytes, "feature volume");
        let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let channels = r.u32()? as usize;
        let n = dims.iter().product::<usize>() * channels;
        let data = r.f32s(n)?;
        r.finish()?;
        Self::new(dims, channels, data)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Cursor over little-endian binary input.
pub(crate) struct LeReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> LeReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.what, format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.what, "header dimensions overflow"))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect())
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(Error::format(
                self.what,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ))
        }
    }
}
