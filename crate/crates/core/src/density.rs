//! Pixel counts per depth band before and after the zoom warp.
//!
//! The depth map goes through the same two-homography composite as the
//! image, but with nearest-neighbour sampling so no new depths are invented.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::DepthMap;
use crate::resample::{Nearest, Plane};
use crate::vpzoomer::{composite_zoom, ZoomGeometry};

/// Half-open depth interval `(lo, hi]` in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthBand {
    pub lo: f64,
    pub hi: f64,
}

impl DepthBand {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, d: f64) -> bool {
        d > self.lo && d <= self.hi
    }
}

pub const DEFAULT_BANDS: [DepthBand; 3] = [
    DepthBand::new(0.0, 17.0),
    DepthBand::new(17.0, 34.0),
    DepthBand::new(34.0, 51.2),
];

fn check_bands(bands: &[DepthBand]) -> Result<()> {
    for b in bands {
        if !(b.lo < b.hi) || b.lo < 0.0 {
            return Err(Error::InvalidArgument(format!("bad depth band ({}, {}]", b.lo, b.hi)));
        }
    }
    if bands.windows(2).any(|w| w[1].lo < w[0].hi) {
        return Err(Error::InvalidArgument("depth bands must be sorted and disjoint".into()));
    }
    Ok(())
}

/// Valid-pixel count in each band.
pub fn band_counts(depth: &DepthMap, bands: &[DepthBand]) -> Result<Vec<usize>> {
    check_bands(bands)?;
    let mut counts = vec![0; bands.len()];
    for (_, _, d) in depth.iter_valid() {
        if let Some(i) = bands.iter().position(|b| b.contains(d)) {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// The depth map as it appears in the zoomed image.
pub fn warp_depth(depth: &DepthMap, geom: &ZoomGeometry) -> Result<DepthMap> {
    let plane = Plane {
        width: depth.width(),
        height: depth.height(),
        channels: 1,
        data: depth.values(),
    };
    let warped = composite_zoom(&plane, geom, &Nearest)?;
    DepthMap::from_meters(depth.width(), depth.height(), warped)
}

pub fn zoom_band_counts(depth: &DepthMap, geom: &ZoomGeometry, bands: &[DepthBand]) -> Result<Vec<usize>> {
    band_counts(&warp_depth(depth, geom)?, bands)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandStats {
    pub band: DepthBand,
    pub count_original: usize,
    pub count_zoom: usize,
    /// `count_zoom / count_original`; 1 when both are 0 and +∞ when only
    /// the original count is 0.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityReport {
    pub bands: Vec<BandStats>,
}

pub fn count_ratio(original: usize, zoom: usize) -> f64 {
    match (original, zoom) {
        (0, 0) => 1.0,
        (0, _) => f64::INFINITY,
        (o, z) => z as f64 / o as f64,
    }
}

pub fn rebalancing_report(depth: &DepthMap, geom: &ZoomGeometry, bands: &[DepthBand]) -> Result<DensityReport> {
    let original = band_counts(depth, bands)?;
    let zoom = zoom_band_counts(depth, geom, bands)?;
    Ok(DensityReport {
        bands: bands
            .iter()
            .zip(original.into_iter().zip(zoom))
            .map(|(&band, (o, z))| BandStats {
                band,
                count_original: o,
                count_zoom: z,
                ratio: count_ratio(o, z),
            })
            .collect(),
    })
}

impl DensityReport {
    /// `band_lo,band_hi,count_orig,count_zoom,ratio`, reals to 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("band_lo,band_hi,count_orig,count_zoom,ratio\n");
        for b in &self.bands {
            let ratio = if b.ratio.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.4}", b.ratio)
            };
            let _ = writeln!(
                s,
                "{:.4},{:.4},{},{},{}",
                b.band.lo, b.band.hi, b.count_original, b.count_zoom, ratio
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> DepthMap {
        let values = (0..10).flat_map(|_| (1..=50).map(f64::from)).collect();
        DepthMap::from_meters(50, 10, values).unwrap()
    }

    #[test]
    fn ramp_counts() {
        assert_eq!(band_counts(&ramp(), &DEFAULT_BANDS).unwrap(), vec![170, 170, 160]);
    }

    #[test]
    fn constant_and_empty() {
        let d = DepthMap::from_meters(4, 3, vec![5.0; 12]).unwrap();
        assert_eq!(band_counts(&d, &[DepthBand::new(0.0, 17.0)]).unwrap(), vec![12]);
        assert_eq!(band_counts(&DepthMap::empty(4, 3), &DEFAULT_BANDS).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn identity_geometry_gives_unit_ratios() {
        let d = ramp();
        let g = ZoomGeometry::identity(50, 10).unwrap();
        assert_eq!(zoom_band_counts(&d, &g, &DEFAULT_BANDS).unwrap(), band_counts(&d, &DEFAULT_BANDS).unwrap());
        let r = rebalancing_report(&d, &g, &DEFAULT_BANDS).unwrap();
        assert!(r.bands.iter().all(|b| b.ratio == 1.0));
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(count_ratio(0, 0), 1.0);
        assert_eq!(count_ratio(0, 3), f64::INFINITY);
        assert_eq!(count_ratio(4, 2), 0.5);
    }

    #[test]
    fn rejects_overlapping_bands() {
        let bands = [DepthBand::new(0.0, 10.0), DepthBand::new(5.0, 20.0)];
        assert!(band_counts(&ramp(), &bands).is_err());
    }

    #[test]
    fn csv_format() {
        let report = DensityReport {
            bands: vec![
                BandStats {
                    band: DepthBand::new(0.0, 17.0),
                    count_original: 3,
                    count_zoom: 1,
                    ratio: count_ratio(3, 1),
                },
                BandStats {
                    band: DepthBand::new(34.0, 51.2),
                    count_original: 0,
                    count_zoom: 2,
                    ratio: count_ratio(0, 2),
                },
            ],
        };
        assert_eq!(
            report.to_csv(),
            "band_lo,band_hi,count_orig,count_zoom,ratio\n0.0000,17.0000,3,1,0.3333\n34.0000,51.2000,0,2,inf\n"
        );
    }
}
