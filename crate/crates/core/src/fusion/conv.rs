use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeded;
use crate::volume::FeatureVolume;

/// 3D convolution kernel with odd extents.
///
/// `weights` is laid out `[kx][ky][kz][c_in][c_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3dKernel {
    pub size: [usize; 3],
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv3dKernel {
    pub fn new(size: [usize; 3], c_in: usize, c_out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if size.iter().any(|&k| k % 2 == 0) {
            return Err(Error::InvalidArgument(format!("kernel extents must be odd: {size:?}")));
        }
        let taps: usize = size.iter().product();
        if weights.len() != taps * c_in * c_out || bias.len() != c_out {
            return Err(Error::DimensionMismatch(format!(
                "kernel {size:?} {c_in}->{c_out} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            size,
            c_in,
            c_out,
            weights,
            bias,
        })
    }

    /// Weights uniform in `±1/√fan_in`, zero bias.
    pub fn seeded(size: [usize; 3], c_in: usize, c_out: usize, seed: u64, stream: u64) -> Self {
        let taps: usize = size.iter().product();
        let bound = 1.0 / ((taps * c_in).max(1) as f64).sqrt();
        Self {
            size,
            c_in,
            c_out,
            weights: seeded::uniform(seed, stream, taps * c_in * c_out, bound),
            bias: vec![0.0; c_out],
        }
    }

    /// Kernel that passes channel `i` to channel `i` through the centre tap.
    pub fn identity(size: [usize; 3], channels: usize) -> Self {
        let taps: usize = size.iter().product();
        let mut weights = vec![0.0; taps * channels * channels];
        let centre = ((size[0] / 2) * size[1] + size[1] / 2) * size[2] + size[2] / 2;
        for c in 0..channels {
            weights[(centre * channels + c) * channels + c] = 1.0;
        }
        Self {
            size,
            c_in: channels,
            c_out: channels,
            weights,
            bias: vec![0.0; channels],
        }
    }

    /// Weight for tap `(kx, ky, kz)` from input channel `i` to output `o`.
    pub fn weight(&self, [kx, ky, kz]: [usize; 3], i: usize, o: usize) -> f64 {
        let tap = (kx * self.size[1] + ky) * self.size[2] + kz;
        self.weights[(tap * self.c_in + i) * self.c_out + o]
    }

    pub fn set_weight(&mut self, [kx, ky, kz]: [usize; 3], i: usize, o: usize, v: f64) {
        let tap = (kx * self.size[1] + ky) * self.size[2] + kz;
        self.weights[(tap * self.c_in + i) * self.c_out + o] = v;
    }
}

/// Cross-correlation with zero padding; output has the input's extent.
pub fn conv3d(vol: &FeatureVolume, kernel: &Conv3dKernel) -> Result<FeatureVolume> {
    if vol.channels() != kernel.c_in {
        return Err(Error::DimensionMismatch(format!(
            "volume has {} channels, kernel expects {}",
            vol.channels(),
            kernel.c_in
        )));
    }
    let [nx, ny, nz] = vol.dims();
    let (ci, co) = (kernel.c_in, kernel.c_out);
    let [kx, ky, kz] = kernel.size;
    let (px, py, pz) = (kx / 2, ky / 2, kz / 2);
    let input = vol.data();
    let mut out = vec![0.0; nx * ny * nz * co];
    let slab = ny * nz * co;
    if slab > 0 {
        out.par_chunks_mut(slab).enumerate().for_each(|(x, plane)| {
            for y in 0..ny {
                for z in 0..nz {
                    let acc = &mut plane[(y * nz + z) * co..(y * nz + z + 1) * co];
                    acc.copy_from_slice(&kernel.bias);
                    for dx in 0..kx {
                        let Some(sx) = (x + dx).checked_sub(px).filter(|&s| s < nx) else {
                            continue;
                        };
                        for dy in 0..ky {
                            let Some(sy) = (y + dy).checked_sub(py).filter(|&s| s < ny) else {
                                continue;
                            };
                            for dz in 0..kz {
                                let Some(sz) = (z + dz).checked_sub(pz).filter(|&s| s < nz) else {
                                    continue;
                                };
                                let src = ((sx * ny + sy) * nz + sz) * ci;
                                let tap = (dx * ky + dy) * kz + dz;
                                let wblock = &kernel.weights[tap * ci * co..(tap + 1) * ci * co];
                                for (i, &v) in input[src..src + ci].iter().enumerate() {
                                    if v == 0.0 {
                                        continue;
                                    }
                                    for (a, &w) in acc.iter_mut().zip(&wblock[i * co..(i + 1) * co]) {
                                        *a += w * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    FeatureVolume::new([nx, ny, nz], co, out)
}

/// Three length-3 convolutions along x, then y, then z.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisotropicWeights {
    pub along_x: Conv3dKernel,
    pub along_y: Conv3dKernel,
    pub along_z: Conv3dKernel,
}

impl AnisotropicWeights {
    pub fn new(along_x: Conv3dKernel, along_y: Conv3dKernel, along_z: Conv3dKernel) -> Result<Self> {
        let shapes = [
            (&along_x, [3, 1, 1]),
            (&along_y, [1, 3, 1]),
            (&along_z, [1, 1, 3]),
        ];
        for (k, expected) in shapes {
            if k.size != expected || k.c_in != k.c_out {
                return Err(Error::DimensionMismatch(format!(
                    "anisotropic kernel {:?} {}->{}, expected {expected:?} C->C",
                    k.size, k.c_in, k.c_out
                )));
            }
        }
        Ok(Self {
            along_x,
            along_y,
            along_z,
        })
    }

    pub fn seeded(channels: usize, seed: u64, first_stream: u64) -> Self {
        Self {
            along_x: Conv3dKernel::seeded([3, 1, 1], channels, channels, seed, first_stream),
            along_y: Conv3dKernel::seeded([1, 3, 1], channels, channels, seed, first_stream + 1),
            along_z: Conv3dKernel::seeded([1, 1, 3], channels, channels, seed, first_stream + 2),
        }
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            along_x: Conv3dKernel::identity([3, 1, 1], channels),
            along_y: Conv3dKernel::identity([1, 3, 1], channels),
            along_z: Conv3dKernel::identity([1, 1, 3], channels),
        }
    }
}

pub fn anisotropic_conv(vol: &FeatureVolume, w: &AnisotropicWeights) -> Result<FeatureVolume> {
    let v = conv3d(vol, &w.along_x)?;
    let v = conv3d(&v, &w.along_y)?;
    conv3d(&v, &w.along_z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_passes_through() {
        let v = FeatureVolume::from_fn([3, 4, 2], 2, |[x, y, z], c| (x * 7 + y * 3 + z + c) as f64 * 0.1).unwrap();
        let out = conv3d(&v, &Conv3dKernel::identity([3, 3, 3], 2)).unwrap();
        assert_eq!(out, v);
        assert_eq!(anisotropic_conv(&v, &AnisotropicWeights::identity(2)).unwrap(), v);
    }

    #[test]
    fn ones_kernel_on_constant_volume() {
        let v = FeatureVolume::from_fn([5, 5, 5], 1, |_, _| 2.0).unwrap();
        let k = Conv3dKernel::new([3, 3, 3], 1, 1, vec![1.0; 27], vec![0.0]).unwrap();
        let out = conv3d(&v, &k).unwrap();
        assert_eq!(out.get([2, 2, 2], 0), 54.0);
        assert_eq!(out.get([0, 0, 0], 0), 16.0); // corner sees 2×2×2 taps
    }

    #[test]
    fn x_shift_kernel() {
        let v = FeatureVolume::from_fn([4, 2, 2], 1, |[x, y, z], _| (1 + x + 10 * y + 100 * z) as f64).unwrap();
        let mut w = AnisotropicWeights::identity(1);
        w.along_x = Conv3dKernel::new([3, 1, 1], 1, 1, vec![1.0, 0.0, 0.0], vec![0.0]).unwrap();
        let out = anisotropic_conv(&v, &w).unwrap();
        for x in 0..4 {
            for y in 0..2 {
                for z in 0..2 {
                    let expected = if x == 0 { 0.0 } else { v.get([x - 1, y, z], 0) };
                    assert_eq!(out.get([x, y, z], 0), expected);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let v = FeatureVolume::zeros([2, 2, 2], 3);
        assert!(conv3d(&v, &Conv3dKernel::identity([3, 3, 3], 2)).is_err());
        assert!(Conv3dKernel::new([2, 3, 3], 1, 1, vec![0.0; 18], vec![0.0]).is_err());
        let bad = Conv3dKernel::identity([3, 3, 3], 1);
        assert!(AnisotropicWeights::new(bad.clone(), bad.clone(), bad).is_err());
    }
}
