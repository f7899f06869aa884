//! Segmentation head and the semantic grid file format.
//!
//! Grid file: magic `VPOC`, then `X Y Z` as little-endian `u32`, then
//! `X·Y·Z` class ids (`u8`) with x slowest and z fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::FeatureVolume;

use super::conv::Conv3dKernel;

pub const FEATURE_DIMS: [usize; 3] = [128, 128, 8];
pub const SCENE_DIMS: [usize; 3] = [256, 256, 32];
const MAGIC: &[u8; 4] = b"VPOC";

/// Per-voxel class ids; class 0 is empty space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticGrid {
    dims: [usize; 3],
    classes: Vec<u8>,
}

impl SemanticGrid {
    pub fn new(dims: [usize; 3], classes: Vec<u8>) -> Result<Self> {
        if classes.len() != dims.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {dims:?} grid",
                classes.len()
            )));
        }
        Ok(Self { dims, classes })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn get(&self, [x, y, z]: [usize; 3]) -> u8 {
        self.classes[(x * self.dims[1] + y) * self.dims[2] + z]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.classes.len());
        out.extend_from_slice(MAGIC);
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.classes);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::format("semantic grid", "missing VPOC header"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let dims = [dim(0), dim(1), dim(2)];
        let body = &bytes[16..];
        if body.len() != dims.iter().product::<usize>() {
            return Err(Error::format(
                "semantic grid",
                format!("{} label bytes for dims {dims:?}", body.len()),
            ));
        }
        Self::new(dims, body.to_vec())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Index of the largest logit; ties go to the smaller index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Nearest-neighbour upsampling by `factors` followed by a 1×1×1 class head
/// and argmax. The head is pointwise, so it runs at input resolution and
/// each label is copied into its output block.
pub fn upsample_labels(vol: &FeatureVolume, head: &Conv3dKernel, factors: [usize; 3]) -> Result<SemanticGrid> {
    if head.size != [1, 1, 1] || head.c_in != vol.channels() {
        return Err(Error::DimensionMismatch(format!(
            "head {:?} {}->{} for a {}-channel volume",
            head.size,
            head.c_in,
            head.c_out,
            vol.channels()
        )));
    }
    if head.c_out == 0 || head.c_out > 256 {
        return Err(Error::InvalidArgument(format!("{} classes do not fit in u8", head.c_out)));
    }
    let [nx, ny, nz] = vol.dims();
    let out_dims = [nx * factors[0], ny * factors[1], nz * factors[2]];
    let (ci, co) = (head.c_in, head.c_out);
    let mut low = vec![0u8; nx * ny * nz];
    let mut logits = vec![0.0; co];
    for (li, label) in low.iter_mut().enumerate() {
        logits.copy_from_slice(&head.bias);
        let f = &vol.data()[li * ci..(li + 1) * ci];
        for (i, &v) in f.iter().enumerate() {
            for (l, &w) in logits.iter_mut().zip(&head.weights[i * co..(i + 1) * co]) {
                *l += w * v;
            }
        }
        *label = argmax(&logits) as u8;
    }
    let mut classes = vec![0u8; out_dims.iter().product()];
    for ox in 0..out_dims[0] {
        for oy in 0..out_dims[1] {
            let row = (ox * out_dims[1] + oy) * out_dims[2];
            let src_row = ((ox / factors[0]) * ny + oy / factors[1]) * nz;
            for oz in 0..out_dims[2] {
                classes[row + oz] = low[src_row + oz / factors[2]];
            }
        }
    }
    SemanticGrid::new(out_dims, classes)
}

/// Feature volume at 128×128×8 to a 256×256×32 class grid.
pub fn upsample_head(vol: &FeatureVolume, head: &Conv3dKernel) -> Result<SemanticGrid> {
    if vol.dims() != FEATURE_DIMS {
        return Err(Error::DimensionMismatch(format!(
            "segmentation head expects {FEATURE_DIMS:?}, got {:?}",
            vol.dims()
        )));
    }
    upsample_labels(vol, head, [2, 2, 4])
}
