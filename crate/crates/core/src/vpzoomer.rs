//! Vanishing-point zoom.
//!
//! A vertical segment of length `α·H` centred on the vanishing point is the
//! shared edge of two trapezoids reaching out to the left and right image
//! borders. Each one is mapped by a homography onto a
//! half-width rectangle whose shared edge is stretched vertically, which
//! magnifies the region around the vanishing point. The zoomed image is the
//! left warp on columns `x < W/2` and the right warp elsewhere.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{homography_from_quads, Homography, Point2, Quad};
use crate::raster::ImageBuffer;
use crate::resample::{warp_plane, Bilinear, Plane, Resampler};

/// Endpoints `(top, bottom)` of the shared vertical segment through `vp`.
pub fn shared_vertical_line(vp: Point2, height: f64, alpha: f64) -> (Point2, Point2) {
    let half = alpha * height / 2.0;
    (
        Point2::new(vp.x, vp.y - half),
        Point2::new(vp.x, vp.y + half),
    )
}

fn check_inputs(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<(Point2, Point2)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let (w, h) = (width as f64, height as f64);
    let (top, bottom) = shared_vertical_line(vp, h, alpha);
    let inside = vp.is_finite() && vp.x >= 0.0 && vp.x <= w && top.y >= 0.0 && bottom.y <= h;
    if !inside {
        return Err(Error::VpOutOfBounds {
            x: vp.x,
            y: vp.y,
            width,
            height,
        });
    }
    Ok((top, bottom))
}

/// Left and right source trapezoids sharing the segment through `vp`.
pub fn source_trapezoids(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<(Quad, Quad)> {
    let (s_t, s_b) = check_inputs(vp, width, height, alpha)?;
    let (w, h) = (width as f64, height as f64);
    let left = Quad::new([Point2::new(0.0, 0.0), s_t, s_b, Point2::new(0.0, h)])?;
    let right = Quad::new([s_t, Point2::new(w, 0.0), Point2::new(w, h), s_b])?;
    Ok((left, right))
}

/// Endpoints `(top, bottom)` of the target segment on the image centre line.
pub fn target_segment(vp: Point2, height: f64, width: f64, alpha: f64) -> (Point2, Point2) {
    let (s_t, s_b) = shared_vertical_line(vp, height, alpha);
    (
        Point2::new(width / 2.0, s_t.y / 2.0),
        Point2::new(width / 2.0, (height + s_b.y) / 2.0),
    )
}

/// Left and right half-width target rectangles.
pub fn target_rectangles(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<(Quad, Quad)> {
    check_inputs(vp, width, height, alpha)?;
    let (w, h) = (width as f64, height as f64);
    let (t_t, t_b) = target_segment(vp, h, w, alpha);
    let left = Quad::new([
        Point2::new(0.0, t_t.y),
        t_t,
        t_b,
        Point2::new(0.0, t_b.y),
    ])?;
    let right = Quad::new([
        t_t,
        Point2::new(w, t_t.y),
        Point2::new(w, t_b.y),
        t_b,
    ])?;
    Ok((left, right))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoomGeometry {
    pub vp: Point2,
    pub alpha: f64,
    pub width: usize,
    pub height: usize,
    pub src_left: Quad,
    pub src_right: Quad,
    pub dst_left: Quad,
    pub dst_right: Quad,
    pub h_left: Homography,
    pub h_right: Homography,
}

impl ZoomGeometry {
    pub fn new(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<Self> {
        let (src_left, src_right) = source_trapezoids(vp, width, height, alpha)?;
        let (dst_left, dst_right) = target_rectangles(vp, width, height, alpha)?;
        let h_left = homography_from_quads(&src_left, &dst_left)?;
        let h_right = homography_from_quads(&src_right, &dst_right)?;
        Ok(Self {
            vp,
            alpha,
            width,
            height,
            src_left,
            src_right,
            dst_left,
            dst_right,
            h_left,
            h_right,
        })
    }

    /// Pass-through geometry: both halves use the identity map.
    pub fn identity(width: usize, height: usize) -> Result<Self> {
        let (w, h) = (width as f64, height as f64);
        let left = Quad::new([
            Point2::new(0.0, 0.0),
            Point2::new(w / 2.0, 0.0),
            Point2::new(w / 2.0, h),
            Point2::new(0.0, h),
        ])?;
        let right = Quad::new([
            Point2::new(w / 2.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(w / 2.0, h),
        ])?;
        Ok(Self {
            vp: Point2::new(w / 2.0, h / 2.0),
            alpha: 0.0,
            width,
            height,
            src_left: left,
            src_right: right,
            dst_left: left,
            dst_right: right,
            h_left: Homography::identity(),
            h_right: Homography::identity(),
        })
    }

    /// Position of an original-image point in the zoom image: `h_left` for
    /// points left of the vanishing point's column, `h_right` otherwise.
    pub fn map_to_zoom(&self, p: Point2) -> Result<Point2> {
        if p.x < self.vp.x {
            self.h_left.apply(p)
        } else {
            self.h_right.apply(p)
        }
    }

    /// True when output column `col` takes its value from the left warp.
    pub fn is_left_column(&self, col: usize) -> bool {
        (col as f64) < self.width as f64 / 2.0
    }

    /// Largest vertex residual of the eight source/target correspondences.
    pub fn max_vertex_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (h, src, dst) in [
            (&self.h_left, &self.src_left, &self.dst_left),
            (&self.h_right, &self.src_right, &self.dst_right),
        ] {
            for (s, d) in src.vertices().iter().zip(dst.vertices()) {
                worst = worst.max(h.apply(*s)?.distance(*d));
            }
        }
        Ok(worst)
    }
}

/// Convenience wrapper for [`ZoomGeometry::new`].
pub fn build_zoom_geometry(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<ZoomGeometry> {
    ZoomGeometry::new(vp, width, height, alpha)
}

/// Inverse-warps `img` through `h` with bilinear sampling; samples from
/// outside the source are 0.
pub fn warp_image(img: &ImageBuffer, h: &Homography, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::InvalidArgument("cannot warp an empty image".into()));
    }
    let plane = Plane {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        data: img.data(),
    };
    let data = warp_plane(&plane, h, out_w, out_h, &Bilinear)?;
    ImageBuffer::new(out_w, out_h, img.channels(), data)
}

/// Composites the two half warps of `plane` on the plane's own canvas.
pub fn composite_zoom(
    plane: &Plane<'_>,
    geom: &ZoomGeometry,
    resampler: &dyn Resampler,
) -> Result<Vec<f64>> {
    if plane.width != geom.width || plane.height != geom.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} raster for a {}x{} zoom geometry",
            plane.width, plane.height, geom.width, geom.height
        )));
    }
    let inv_left = geom.h_left.inverse()?;
    let inv_right = geom.h_right.inverse()?;
    let (w, ch) = (plane.width, plane.channels);
    let mut out = vec![0.0; w * plane.height * ch];
    if w == 0 || plane.height == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(w * ch).enumerate().for_each(|(row, line)| {
        for col in 0..w {
            let inv = if geom.is_left_column(col) {
                &inv_left
            } else {
                &inv_right
            };
            let Ok(src) = inv.apply(Point2::new(col as f64, row as f64)) else {
                continue;
            };
            if plane.contains(src.x, src.y) {
                resampler.sample(plane, src.x, src.y, &mut line[col * ch..(col + 1) * ch]);
            }
        }
    });
    Ok(out)
}

/// The zoomed image: left warp on columns `x < W/2`, right warp elsewhere.
pub fn synthesize_zoom(img: &ImageBuffer, geom: &ZoomGeometry) -> Result<ImageBuffer> {
    let plane = Plane {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        data: img.data(),
    };
    let data = composite_zoom(&plane, geom, &Bilinear)?;
    ImageBuffer::new(img.width(), img.height(), img.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: usize = 1226;
    const H: usize = 370;

    fn centered() -> ZoomGeometry {
        ZoomGeometry::new(Point2::new(613.0, 185.0), W, H, 0.2).unwrap()
    }

    #[test]
    fn shared_segment_examples() {
        let (t, b) = shared_vertical_line(Point2::new(613.0, 185.0), 370.0, 0.2);
        assert_eq!((t, b), (Point2::new(613.0, 148.0), Point2::new(613.0, 222.0)));
        let (t, b) = shared_vertical_line(Point2::new(400.0, 100.0), 370.0, 0.2);
        assert_eq!((t, b), (Point2::new(400.0, 63.0), Point2::new(400.0, 137.0)));
        let vp = Point2::new(10.0, 20.0);
        assert_eq!(shared_vertical_line(vp, 370.0, 0.0), (vp, vp));
    }

    #[test]
    fn trapezoid_vertices_and_area() {
        let (l, r) = source_trapezoids(Point2::new(613.0, 185.0), W, H, 0.2).unwrap();
        assert_eq!(
            l.vertices(),
            &[
                Point2::new(0.0, 0.0),
                Point2::new(613.0, 148.0),
                Point2::new(613.0, 222.0),
                Point2::new(0.0, 370.0)
            ]
        );
        // The ribbon leaves the triangles above s_t and below s_b uncovered;
        // what remains has the same area as the two target rectangles.
        let expected = (W as f64) * (H as f64 + 0.2 * H as f64) / 2.0;
        assert_eq!(l.area() + r.area(), expected);
        let (tl, tr) = target_rectangles(Point2::new(613.0, 185.0), W, H, 0.2).unwrap();
        assert_eq!(tl.area() + tr.area(), expected);
    }

    #[test]
    fn out_of_bounds_vp() {
        let err = source_trapezoids(Point2::new(613.0, 5.0), W, H, 0.2).unwrap_err();
        assert!(matches!(err, Error::VpOutOfBounds { .. }));
        assert!(matches!(
            ZoomGeometry::new(Point2::new(613.0, 185.0), W, H, 0.0),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn target_examples() {
        let (t, b) = target_segment(Point2::new(613.0, 185.0), 370.0, 1226.0, 0.2);
        assert_eq!((t, b), (Point2::new(613.0, 74.0), Point2::new(613.0, 296.0)));
        let (t, b) = target_segment(Point2::new(400.0, 100.0), 370.0, 1226.0, 0.2);
        assert_eq!((t, b), (Point2::new(613.0, 31.5), Point2::new(613.0, 253.5)));
        let (l, r) = target_rectangles(Point2::new(400.0, 100.0), W, H, 0.2).unwrap();
        for q in [l, r] {
            let v = q.vertices();
            assert_eq!((v[1].x - v[0].x).abs(), W as f64 / 2.0);
        }
    }

    #[test]
    fn homographies_hit_vertices() {
        let g = centered();
        let p = g.h_left.apply(Point2::new(0.0, 0.0)).unwrap();
        assert!(p.distance(Point2::new(0.0, 74.0)) < 1e-6);
        let p = g.h_left.apply(Point2::new(613.0, 222.0)).unwrap();
        assert!(p.distance(Point2::new(613.0, 296.0)) < 1e-6);
        assert!(g.max_vertex_residual().unwrap() < 1e-6);
    }

    #[test]
    fn symmetric_vp_gives_mirrored_maps() {
        let g = centered();
        let flip = Homography::from_rows([[-1.0, 0.0, W as f64], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        let mirrored = flip.compose(&g.h_left).unwrap().compose(&flip).unwrap();
        let diff = (mirrored.matrix() - g.h_right.matrix()).abs().max();
        assert!(diff < 1e-6, "max entry difference {diff}");
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = ImageBuffer::from_fn(7, 5, 3, |x, y, c| ((x * 31 + y * 17 + c * 7) % 13) as f64 / 12.0)
            .unwrap();
        let out = warp_image(&img, &Homography::identity(), 7, 5).unwrap();
        assert_eq!(out, img);
        let geom = ZoomGeometry::identity(7, 5).unwrap();
        assert_eq!(synthesize_zoom(&img, &geom).unwrap(), img);
    }

    #[test]
    fn translation_warp() {
        let img = ImageBuffer::from_fn(20, 4, 1, |x, y, _| ((x + 3 * y) % 7) as f64 / 6.0).unwrap();
        let shift = Homography::from_rows([[1.0, 0.0, 10.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let out = warp_image(&img, &shift, 20, 4).unwrap();
        for y in 0..4 {
            for x in 0..20 {
                let expected = if x < 10 { 0.0 } else { img.get(x - 10, y, 0) };
                assert!((out.get(x, y, 0) - expected).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn scaled_checkerboard_hits_integer_preimage() {
        let img = ImageBuffer::from_fn(2, 2, 1, |x, y, _| ((x + y) % 2) as f64).unwrap();
        let s = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let out = warp_image(&img, &s, 4, 4).unwrap();
        assert_eq!(out.get(2, 2, 0), img.get(1, 1, 0));
        assert_eq!(out.get(0, 0, 0), img.get(0, 0, 0));
        // (1, 0) reads the midpoint of (0,0) and (1,0).
        assert_eq!(out.get(1, 0, 0), 0.5);
    }

    #[test]
    fn composite_matches_mask_definition() {
        let g = ZoomGeometry::new(Point2::new(30.0, 12.0), 64, 24, 0.2).unwrap();
        let img = ImageBuffer::from_fn(64, 24, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f64 / 10.0)
            .unwrap();
        let zoom = synthesize_zoom(&img, &g).unwrap();
        let left = warp_image(&img, &g.h_left, 64, 24).unwrap();
        let right = warp_image(&img, &g.h_right, 64, 24).unwrap();
        for y in 0..24 {
            for x in 0..64 {
                let src = if x < 32 { &left } else { &right };
                for c in 0..3 {
                    assert_eq!(zoom.get(x, y, c), src.get(x, y, c));
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let img = ImageBuffer::zeros(10, 10, 1).unwrap();
        assert!(matches!(
            synthesize_zoom(&img, &centered()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
