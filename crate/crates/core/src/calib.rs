//! KITTI calibration files.
//!
//! Only the left colour camera projection `P2:` is read. Intrinsics come
//! straight from the 3×4 matrix; its fourth column (stereo baseline offset)
//! is ignored.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::CameraModel;

/// Row-major 3×4 projection matrix.
pub type Projection = [f64; 12];

pub fn parse_p2(text: &str) -> Result<Projection> {
    let line = text
        .lines()
        .map(str::trim_start)
        .find(|l| l.starts_with("P2:"))
        .ok_or_else(|| Error::format("calibration", "no line starting with `P2:`"))?;
    let values: Vec<f64> = line["P2:".len()..]
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::format("calibration", format!("bad number `{tok}`: {e}")))
        })
        .collect::<Result<_>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| Error::format("calibration", format!("P2 has {} values, expected 12", v.len())))
}

/// Camera with intrinsics from `P2` and the given extrinsics.
pub fn camera_from_p2(
    p: &Projection,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
) -> Result<CameraModel> {
    CameraModel::new(p[0], p[5], p[2], p[6], rotation, translation)
}

/// World axes x forward, y left, z up with the camera at the origin; the
/// camera frame is x right, y down, z forward.
pub fn forward_left_up_rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

/// [`camera_from_p2`] with [`forward_left_up_rotation`] and no translation.
pub fn forward_left_up_camera(p: &Projection) -> Result<CameraModel> {
    camera_from_p2(p, forward_left_up_rotation(), Vector3::zeros())
}

pub fn read_p2(path: impl AsRef<Path>) -> Result<Projection> {
    parse_p2(&fs::read_to_string(path)?)
}
