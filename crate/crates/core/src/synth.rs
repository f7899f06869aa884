//! Ray-cast road scenes with exact depth and a known vanishing point.
//!
//! Camera frame: x right, y down, z forward. The camera sits `camera_height`
//! above a flat ground plane and looks along the road, so the road
//! direction `(0, 0, 1)` images at the principal point.

use crate::error::Result;
use crate::geometry::{CameraModel, Point2};
use crate::raster::{DepthMap, ImageBuffer};

/// Axis-aligned box standing on the ground.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBox {
    /// Lateral position of the box centre (m, +x right).
    pub center_x: f64,
    /// Depth of the front face (m).
    pub near_z: f64,
    pub width: f64,
    pub height: f64,
    pub length: f64,
    pub color: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadScene {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub camera_height: f64,
    /// Ground beyond this depth is rendered as horizon haze without depth.
    pub far_plane: f64,
    pub road_half_width: f64,
    pub boxes: Vec<SceneBox>,
}

impl Default for RoadScene {
    fn default() -> Self {
        Self {
            width: 1226,
            height: 370,
            fx: 707.0,
            fy: 707.0,
            cx: 613.0,
            cy: 185.0,
            camera_height: 1.65,
            far_plane: 100.0,
            road_half_width: 3.5,
            boxes: vec![
                SceneBox {
                    center_x: -2.0,
                    near_z: 9.0,
                    width: 1.8,
                    height: 1.5,
                    length: 4.2,
                    color: [0.75, 0.15, 0.12],
                },
                SceneBox {
                    center_x: 2.2,
                    near_z: 22.0,
                    width: 1.8,
                    height: 1.6,
                    length: 4.5,
                    color: [0.15, 0.3, 0.7],
                },
                SceneBox {
                    center_x: -1.8,
                    near_z: 40.0,
                    width: 2.5,
                    height: 3.2,
                    length: 8.0,
                    color: [0.85, 0.8, 0.2],
                },
            ],
        }
    }
}

/// What a pixel sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Sky,
    Ground,
    Box(usize),
}

#[derive(Clone, Debug)]
pub struct RenderedScene {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub surfaces: Vec<Surface>,
    pub vp: Point2,
    pub camera: CameraModel,
}

impl RenderedScene {
    pub fn footprint(&self, surface: Surface) -> usize {
        self.surfaces.iter().filter(|&&s| s == surface).count()
    }
}

impl RoadScene {
    pub fn camera(&self) -> Result<CameraModel> {
        CameraModel::with_identity_extrinsics(self.fx, self.fy, self.cx, self.cy)
    }

    /// Image of the road direction.
    pub fn vanishing_point(&self) -> Point2 {
        // Direction (0, 0, 1) projects to (fx·0/1 + cx, fy·0/1 + cy).
        Point2::new(self.cx, self.cy)
    }

    /// Nearest hit along the ray with direction `(dx, dy, 1)`; the ray
    /// parameter equals camera-frame depth.
    fn trace(&self, dx: f64, dy: f64) -> (Surface, f64) {
        let mut best = (Surface::Sky, f64::INFINITY);
        if dy > 0.0 {
            let t = self.camera_height / dy;
            if t <= self.far_plane {
                best = (Surface::Ground, t);
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            let lo = [b.center_x - b.width / 2.0, self.camera_height - b.height, b.near_z];
            let hi = [b.center_x + b.width / 2.0, self.camera_height, b.near_z + b.length];
            let dir = [dx, dy, 1.0];
            let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
            let mut hit = true;
            for a in 0..3 {
                if dir[a] == 0.0 {
                    if 0.0 < lo[a] || 0.0 > hi[a] {
                        hit = false;
                        break;
                    }
                    continue;
                }
                let (ta, tb) = (lo[a] / dir[a], hi[a] / dir[a]);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            if hit && t0 <= t1 && t0 > 0.0 && t0 < best.1 {
                best = (Surface::Box(i), t0);
            }
        }
        best
    }

    fn shade(&self, surface: Surface, dx: f64, dy: f64, t: f64) -> [f64; 3] {
        match surface {
            Surface::Sky => {
                let k = (-dy).clamp(0.0, 1.0);
                [0.62 - 0.2 * k, 0.74 - 0.1 * k, 0.92]
            }
            Surface::Ground => {
                let (x, z) = (dx * t, t);
                let tile = ((x.floor() as i64 + z.floor() as i64).rem_euclid(2)) as f64;
                if x.abs() < 0.12 && (z / 3.0).floor() as i64 % 2 == 0 {
                    [0.92, 0.92, 0.9]
                } else if x.abs() < self.road_half_width {
                    let g = 0.33 + 0.06 * tile;
                    [g, g, g + 0.01]
                } else {
                    [0.22 + 0.05 * tile, 0.42 + 0.06 * tile, 0.18]
                }
            }
            Surface::Box(i) => {
                let b = &self.boxes[i];
                // Front faces lit, sides darker.
                let front = (t - b.near_z).abs() < 1e-9;
                let k = if front { 1.0 } else { 0.7 };
                b.color.map(|c| c * k)
            }
        }
    }

    pub fn render(&self) -> Result<RenderedScene> {
        let (w, h) = (self.width, self.height);
        let mut rgb = Vec::with_capacity(w * h * 3);
        let mut depth = Vec::with_capacity(w * h);
        let mut surfaces = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let dx = (u as f64 - self.cx) / self.fx;
                let dy = (v as f64 - self.cy) / self.fy;
                let (s, t) = self.trace(dx, dy);
                rgb.extend(self.shade(s, dx, dy, t));
                depth.push(if s == Surface::Sky { 0.0 } else { t });
                surfaces.push(s);
            }
        }
        Ok(RenderedScene {
            image: ImageBuffer::new(w, h, 3, rgb)?,
            depth: DepthMap::from_meters(w, h, depth)?,
            surfaces,
            vp: self.vanishing_point(),
            camera: self.camera()?,
        })
    }

    /// KITTI-style calibration text whose `P2` carries this camera.
    pub fn calibration_text(&self) -> String {
        let p = format!(
            "{:e} 0.0 {:e} 0.0 0.0 {:e} {:e} 0.0 0.0 0.0 1.0 0.0",
            self.fx, self.cx, self.fy, self.cy
        );
        format!("P0: {p}\nP1: {p}\nP2: {p}\nP3: {p}\n")
    }
}
