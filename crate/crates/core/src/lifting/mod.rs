//! Depth-proposed voxel queries and attention lifting into a voxel volume.

pub mod attention;
pub mod pyramid;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Point2, Point3};
use crate::raster::DepthMap;
use crate::seeded;
use crate::volume::FeatureVolume;
use crate::vpzoomer::ZoomGeometry;

pub use attention::{
    attend_with_logits, dca, lifter_registry, softmax, vpca, AttentionLifter, AttentionOutput,
    AttentionWeights, Deformable, LifterParams, Sample, VpGuided,
};
pub use pyramid::{bilinear_sample, FeatureMap, FeaturePyramid};

/// Axis-aligned voxel grid in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGridSpec {
    pub dims: [usize; 3],
    pub origin: Point3,
    pub voxel_size: [f64; 3],
}

impl VoxelGridSpec {
    pub fn new(dims: [usize; 3], origin: Point3, voxel_size: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("grid dims must be positive: {dims:?}")));
        }
        if voxel_size.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "voxel size must be positive: {voxel_size:?}"
            )));
        }
        Ok(Self {
            dims,
            origin,
            voxel_size,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let z = i % self.dims[2];
        let y = (i / self.dims[2]) % self.dims[1];
        [i / (self.dims[1] * self.dims[2]), y, z]
    }

    /// Voxel containing `p`; each cell owns `[origin + i·size, origin + (i+1)·size)`.
    pub fn locate(&self, p: Point3) -> Option<[usize; 3]> {
        let o = [self.origin.x, self.origin.y, self.origin.z];
        let v = [p.x, p.y, p.z];
        let mut idx = [0; 3];
        for a in 0..3 {
            let f = ((v[a] - o[a]) / self.voxel_size[a]).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    pub fn center(&self, [x, y, z]: [usize; 3]) -> Point3 {
        Point3::new(
            self.origin.x + (x as f64 + 0.5) * self.voxel_size[0],
            self.origin.y + (y as f64 + 0.5) * self.voxel_size[1],
            self.origin.z + (z as f64 + 0.5) * self.voxel_size[2],
        )
    }
}

/// How occupied voxels get their initial query vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryInit {
    pub seed: u64,
    pub channels: usize,
}

impl QueryInit {
    /// Query for the voxel at `linear_index`: ChaCha8 seeded with `seed` on
    /// stream `linear_index`, `channels` draws uniform in `[−0.1, 0.1]`.
    pub fn query(&self, linear_index: usize) -> Vec<f64> {
        seeded::uniform(self.seed, linear_index as u64, self.channels, 0.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelQueryGrid {
    pub spec: VoxelGridSpec,
    pub channels: usize,
    occupancy: Vec<bool>,
    /// Linear indices of occupied voxels, ascending.
    occupied: Vec<usize>,
    /// Query vectors aligned with `occupied`.
    queries: Vec<f64>,
}

impl VoxelQueryGrid {
    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn is_occupied(&self, idx: [usize; 3]) -> bool {
        self.occupancy[self.spec.linear_index(idx)]
    }

    pub fn occupied_indices(&self) -> &[usize] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn query(&self, idx: [usize; 3]) -> Option<&[f64]> {
        let li = self.spec.linear_index(idx);
        self.occupied
            .binary_search(&li)
            .ok()
            .map(|k| &self.queries[k * self.channels..(k + 1) * self.channels])
    }

    /// `(linear index, query)` pairs in ascending index order.
    pub fn iter_queries(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.occupied
            .iter()
            .copied()
            .zip(self.queries.chunks_exact(self.channels.max(1)))
    }
}

/// Marks every voxel that receives at least one back-projected valid depth
/// pixel and gives it a seeded query. An empty result is reported as
/// [`Error::EmptyProposal`].
pub fn propose_voxel_queries(
    depth: &DepthMap,
    cam: &CameraModel,
    spec: &VoxelGridSpec,
    init: &QueryInit,
) -> Result<VoxelQueryGrid> {
    let mut occupancy = vec![false; spec.voxel_count()];
    for (u, v, d) in depth.iter_valid() {
        let p = cam.back_project(Point2::new(u as f64, v as f64), d)?;
        if let Some(idx) = spec.locate(p) {
            occupancy[spec.linear_index(idx)] = true;
        }
    }
    let occupied: Vec<usize> = (0..occupancy.len()).filter(|&i| occupancy[i]).collect();
    if occupied.is_empty() {
        return Err(Error::EmptyProposal);
    }
    let queries = occupied.iter().flat_map(|&i| init.query(i)).collect();
    Ok(VoxelQueryGrid {
        spec: spec.clone(),
        channels: init.channels,
        occupancy,
        occupied,
        queries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VoxelProjection {
    InView(Point2),
    /// In front of the camera but outside the image.
    OutOfImage(Point2),
    BehindCamera,
}

/// Projects the centre of voxel `idx` into a `width`×`height` image.
pub fn project_voxel_center(
    spec: &VoxelGridSpec,
    idx: [usize; 3],
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> VoxelProjection {
    match cam.project(spec.center(idx)) {
        None => VoxelProjection::BehindCamera,
        Some(p) if p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64 => {
            VoxelProjection::InView(p)
        }
        Some(p) => VoxelProjection::OutOfImage(p),
    }
}

/// Inputs shared by every voxel during lifting.
pub struct LiftInputs<'a> {
    pub pyramid: &'a FeaturePyramid,
    pub vp: Point2,
    pub cam: &'a CameraModel,
    pub image_width: usize,
    pub image_height: usize,
    /// Set for the zoom branch: reference points are carried into the zoom
    /// image before sampling.
    pub zoom: Option<&'a ZoomGeometry>,
}

/// Fills occupied, in-view voxels with attention outputs; all other voxels
/// are zero.
pub fn lift_volume(
    queries: &VoxelQueryGrid,
    inputs: &LiftInputs<'_>,
    lifter: &dyn AttentionLifter,
    w: &AttentionWeights,
) -> Result<FeatureVolume> {
    let c = queries.channels;
    if inputs.pyramid.channels() != c || w.channels != c {
        return Err(Error::DimensionMismatch(format!(
            "queries have {c} channels, pyramid {}, weights {}",
            inputs.pyramid.channels(),
            w.channels
        )));
    }
    let spec = &queries.spec;
    let pairs: Vec<(usize, &[f64])> = queries.iter_queries().collect();
    let outputs: Vec<Option<Vec<f64>>> = pairs
        .par_iter()
        .map(|&(li, q)| {
            let idx = spec.unravel(li);
            match project_voxel_center(spec, idx, inputs.cam, inputs.image_width, inputs.image_height) {
                VoxelProjection::InView(r) => {
                    let r = match inputs.zoom {
                        Some(g) => g.map_to_zoom(r)?,
                        None => r,
                    };
                    let (w_f, h_f) = (inputs.image_width as f64, inputs.image_height as f64);
                    if !(r.x >= 0.0 && r.y >= 0.0 && r.x < w_f && r.y < h_f) {
                        return Ok(None);
                    }
                    lifter.attend(q, r, inputs.vp, inputs.pyramid, w).map(|o| Some(o.value))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<_>>()?;

    let mut vol = FeatureVolume::zeros(spec.dims, c);
    for ((li, _), out) in pairs.iter().zip(outputs) {
        if let Some(v) = out {
            let idx = spec.unravel(*li);
            vol.voxel_mut(idx).copy_from_slice(&v);
        }
    }
    Ok(vol)
}
