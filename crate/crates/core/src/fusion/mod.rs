//! Fusion of the original-image and zoom-image voxel volumes.
//!
//! Two non-negative masks are predicted from the concatenated volumes
//! (3×3×3 conv, axis-wise conv stack, 1×1×1 head, ReLU). Each volume is
//! scaled by its mask, the results are concatenated and merged by another
//! 3×3×3 conv, then refined by a small two-level encoder-decoder.

pub mod conv;
pub mod head;

use crate::error::{Error, Result};
use crate::volume::FeatureVolume;

pub use conv::{anisotropic_conv, conv3d, AnisotropicWeights, Conv3dKernel};
pub use head::{argmax, upsample_head, upsample_labels, SemanticGrid, FEATURE_DIMS, SCENE_DIMS};

pub const DEFAULT_NUM_CLASSES: usize = 20;

/// Kernels of the refinement encoder-decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementWeights {
    pub encoder_full: Conv3dKernel,
    pub encoder_half: Conv3dKernel,
    pub decoder: Conv3dKernel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionWeights {
    pub channels: usize,
    pub num_classes: usize,
    pub concat_conv: Conv3dKernel,
    pub anisotropic: AnisotropicWeights,
    pub mask_head: Conv3dKernel,
    pub aggregation: Conv3dKernel,
    pub refinement: RefinementWeights,
    pub head: Conv3dKernel,
    pub seed: u64,
}

impl FusionWeights {
    /// Every kernel drawn from its own stream of `seed` (see
    /// [`Conv3dKernel::seeded`]).
    pub fn seeded(seed: u64, channels: usize, num_classes: usize) -> Self {
        let c = channels;
        Self {
            channels,
            num_classes,
            concat_conv: Conv3dKernel::seeded([3, 3, 3], 2 * c, c, seed, 100),
            anisotropic: AnisotropicWeights::seeded(c, seed, 101),
            mask_head: Conv3dKernel::seeded([1, 1, 1], c, 2, seed, 104),
            aggregation: Conv3dKernel::seeded([3, 3, 3], 2 * c, c, seed, 105),
            refinement: RefinementWeights {
                encoder_full: Conv3dKernel::seeded([3, 3, 3], c, c, seed, 106),
                encoder_half: Conv3dKernel::seeded([3, 3, 3], c, c, seed, 107),
                decoder: Conv3dKernel::seeded([3, 3, 3], c, c, seed, 108),
            },
            head: Conv3dKernel::seeded([1, 1, 1], c, num_classes, seed, 109),
            seed,
        }
    }
}

fn check_pair(a: &FeatureVolume, b: &FeatureVolume) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "volumes {:?}x{} and {:?}x{}",
            a.dims(),
            a.channels(),
            b.dims(),
            b.channels()
        )));
    }
    Ok(())
}

/// Per-voxel channel concatenation `[a, b]`.
pub fn concat_channels(a: &FeatureVolume, b: &FeatureVolume) -> Result<FeatureVolume> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "cannot concatenate {:?} with {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (ca, cb) = (a.channels(), b.channels());
    let data = a
        .data()
        .chunks_exact(ca.max(1))
        .zip(b.data().chunks_exact(cb.max(1)))
        .flat_map(|(x, y)| x.iter().chain(y).copied())
        .collect();
    FeatureVolume::new(a.dims(), ca + cb, data)
}

pub fn relu(mut vol: FeatureVolume) -> FeatureVolume {
    for v in vol.data_mut() {
        *v = v.max(0.0);
    }
    vol
}

/// Multiplies every channel of `vol` by the single-channel `mask`.
pub fn apply_mask(vol: &FeatureVolume, mask: &FeatureVolume) -> Result<FeatureVolume> {
    if mask.dims() != vol.dims() || mask.channels() != 1 {
        return Err(Error::DimensionMismatch("mask shape".into()));
    }
    let c = vol.channels();
    let data = vol
        .data()
        .chunks_exact(c.max(1))
        .zip(mask.data())
        .flat_map(|(f, &m)| f.iter().map(move |v| v * m))
        .collect();
    FeatureVolume::new(vol.dims(), c, data)
}

fn split_channel(vol: &FeatureVolume, c: usize) -> FeatureVolume {
    let n = vol.channels();
    let data = vol.data().chunks_exact(n).map(|v| v[c]).collect();
    FeatureVolume::new(vol.dims(), 1, data).expect("shape preserved")
}

/// Masks `(m_o, m_z)` for the original and zoom volumes.
pub fn attention_masks(
    f_o: &FeatureVolume,
    f_z: &FeatureVolume,
    w: &FusionWeights,
) -> Result<(FeatureVolume, FeatureVolume)> {
    check_pair(f_o, f_z)?;
    let x = concat_channels(f_o, f_z)?;
    let x = conv3d(&x, &w.concat_conv)?;
    let x = anisotropic_conv(&x, &w.anisotropic)?;
    let m = relu(conv3d(&x, &w.mask_head)?);
    Ok((split_channel(&m, 0), split_channel(&m, 1)))
}

/// 2×2×2 max pooling; odd extents keep a partial last cell.
pub fn max_pool2(vol: &FeatureVolume) -> FeatureVolume {
    let [nx, ny, nz] = vol.dims();
    let out_dims = [nx.div_ceil(2), ny.div_ceil(2), nz.div_ceil(2)];
    let c = vol.channels();
    let mut data = vec![f64::NEG_INFINITY; out_dims.iter().product::<usize>() * c];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let o = ((x / 2 * out_dims[1] + y / 2) * out_dims[2] + z / 2) * c;
                for (d, &v) in data[o..o + c].iter_mut().zip(vol.voxel([x, y, z])) {
                    *d = d.max(v);
                }
            }
        }
    }
    FeatureVolume::new(out_dims, c, data).expect("every cell covered")
}

/// Nearest-neighbour upsampling ×2 on every axis, cropped to `dims`.
pub fn upsample2_to(vol: &FeatureVolume, dims: [usize; 3]) -> FeatureVolume {
    FeatureVolume::from_fn(dims, vol.channels(), |[x, y, z], c| vol.get([x / 2, y / 2, z / 2], c))
        .expect("finite input")
}

fn add(a: &FeatureVolume, b: &FeatureVolume) -> FeatureVolume {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    FeatureVolume::new(a.dims(), a.channels(), data).expect("same shape")
}

/// Two-level encoder-decoder with additive skips:
/// `e0 = relu(conv(x))`, `e1 = relu(conv(pool(e0)))`,
/// `out = conv(up(e1) + e0) + x`.
pub fn refine(x: &FeatureVolume, w: &RefinementWeights) -> Result<FeatureVolume> {
    let e0 = relu(conv3d(x, &w.encoder_full)?);
    let e1 = relu(conv3d(&max_pool2(&e0), &w.encoder_half)?);
    let up = upsample2_to(&e1, e0.dims());
    let dec = conv3d(&add(&up, &e0), &w.decoder)?;
    if dec.channels() != x.channels() {
        return Err(Error::DimensionMismatch("decoder must preserve channels".into()));
    }
    Ok(add(&dec, x))
}

/// Fused and refined volume with the inputs' shape.
pub fn bfvf(f_o: &FeatureVolume, f_z: &FeatureVolume, w: &FusionWeights) -> Result<FeatureVolume> {
    check_pair(f_o, f_z)?;
    if f_o.channels() != w.channels {
        return Err(Error::DimensionMismatch(format!(
            "volumes have {} channels, fusion weights {}",
            f_o.channels(),
            w.channels
        )));
    }
    let (m_o, m_z) = attention_masks(f_o, f_z, w)?;
    let weighted = concat_channels(&apply_mask(f_o, &m_o)?, &apply_mask(f_z, &m_z)?)?;
    let fused = conv3d(&weighted, &w.aggregation)?;
    refine(&fused, &w.refinement)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: [usize; 3], c: usize, k: f64) -> FeatureVolume {
        FeatureVolume::from_fn(dims, c, |[x, y, z], ch| ((x * 13 + y * 7 + z * 3 + ch) as f64 * k).sin())
            .unwrap()
    }

    #[test]
    fn masks_are_nonnegative_and_zero_on_zero_input() {
        let w = FusionWeights::seeded(42, 4, 20);
        let (mo, mz) = attention_masks(&vol([4, 4, 2], 4, 0.7), &vol([4, 4, 2], 4, 1.3), &w).unwrap();
        assert!(mo.data().iter().chain(mz.data()).all(|&v| v >= 0.0));
        assert!(mo.data().iter().chain(mz.data()).any(|&v| v > 0.0));
        let z = FeatureVolume::zeros([4, 4, 2], 4);
        let (mo, mz) = attention_masks(&z, &z, &w).unwrap();
        assert!(mo.data().iter().chain(mz.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn bfvf_preserves_shape_and_is_deterministic() {
        let w = FusionWeights::seeded(42, 4, 20);
        let (a, b) = (vol([5, 4, 3], 4, 0.3), vol([5, 4, 3], 4, 0.9));
        let out = bfvf(&a, &b, &w).unwrap();
        assert!(out.same_shape(&a));
        assert_eq!(out, bfvf(&a, &b, &w).unwrap());
        assert!(bfvf(&a, &vol([5, 4, 2], 4, 0.9), &w).is_err());
    }

    #[test]
    fn zero_zoom_branch_contributes_nothing() {
        let w = FusionWeights::seeded(3, 2, 20);
        let a = vol([4, 4, 2], 2, 0.5);
        let z = FeatureVolume::zeros([4, 4, 2], 2);
        let out = bfvf(&a, &z, &w).unwrap();
        // Only the original-branch half of the aggregation kernel can matter.
        let mut w2 = w.clone();
        for tap in 0..27 {
            for i in 2..4 {
                for o in 0..2 {
                    w2.aggregation.weights[(tap * 4 + i) * 2 + o] = 123.0;
                }
            }
        }
        assert_eq!(out, bfvf(&a, &z, &w2).unwrap());
    }

    #[test]
    fn pooling_and_upsampling() {
        let v = vol([3, 2, 1], 1, 1.0);
        let p = max_pool2(&v);
        assert_eq!(p.dims(), [2, 1, 1]);
        let vr = &v;
        let expected = (0..2).flat_map(|x| (0..2).map(move |y| vr.get([x, y, 0], 0))).fold(f64::MIN, f64::max);
        assert_eq!(p.get([0, 0, 0], 0), expected);
        assert_eq!(p.get([1, 0, 0], 0), v.get([2, 0, 0], 0).max(v.get([2, 1, 0], 0)));
        let u = upsample2_to(&p, [3, 2, 1]);
        assert_eq!(u.get([2, 1, 0], 0), p.get([1, 0, 0], 0));
    }
}
