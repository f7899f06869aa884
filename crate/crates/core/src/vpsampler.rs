//! Vanishing-point guided sampling grids.
//!
//! Around a reference point `r` a cross of four points at offset `d` is
//! rotated so its horizontal arm points at the vanishing point `v`. Lines
//! from `v` through the top and bottom arms, crossed with lines through the
//! left and right arms parallel to the vertical arm, give four more corners
//! that form a trapezoid opening away from `v`. Together with `r` itself that
//! is nine points per pyramid level.

use crate::error::{Error, Result};
use crate::geometry::{intersect_lines, line_through, HomogeneousLine, Point2};

/// Strides of the three feature-pyramid levels relative to the full image.
pub const LEVEL_STRIDES: [usize; 3] = [4, 8, 16];
pub const POINTS_PER_LEVEL: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Offset scale for each pyramid level.
    pub scale_factors: [f64; 3],
    /// Upper bound on the offset, in feature-map pixels.
    pub beta: f64,
    /// Exponent applied to the VP distance before scaling.
    pub exponent: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            scale_factors: [1.0, 1.5, 2.0],
            beta: 30.0,
            exponent: 2.0,
        }
    }
}

/// Nine sampling points for one reference point on one pyramid level, in
/// the order: rotated left, right, top, bottom; corners top-left,
/// top-right, bottom-left, bottom-right; the reference point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub reference: Point2,
    pub level: usize,
    pub scale_c: f64,
    pub offset_d: f64,
    pub points: [Point2; POINTS_PER_LEVEL],
}

/// `clamp(c · ‖v − r‖^e, 0, β)`.
pub fn sampling_offset(vp: Point2, r: Point2, c: f64, beta: f64, exponent: f64) -> f64 {
    (c * vp.distance(r).powf(exponent)).clamp(0.0, beta)
}

/// Axis-aligned cross `[left, right, top, bottom]` at distance `d` from `r`.
pub fn initial_grid(r: Point2, d: f64) -> [Point2; 4] {
    [
        Point2::new(r.x - d, r.y),
        Point2::new(r.x + d, r.y),
        Point2::new(r.x, r.y - d),
        Point2::new(r.x, r.y + d),
    ]
}

/// Rotates the grid about `r` by the angle of `vp − r`.
pub fn rotate_grid(grid: &[Point2; 4], r: Point2, vp: Point2) -> Result<[Point2; 4]> {
    if vp.distance(r) < 1e-9 {
        return Err(Error::CoincidentVpRef);
    }
    let theta = (vp.y - r.y).atan2(vp.x - r.x);
    let (sin, cos) = theta.sin_cos();
    Ok(grid.map(|o| {
        let (dx, dy) = (o.x - r.x, o.y - r.y);
        Point2::new(r.x + cos * dx - sin * dy, r.y + sin * dx + cos * dy)
    }))
}

/// Trapezoid corners `[tl, tr, bl, br]` from the rotated cross
/// `[left, right, top, bottom]`.
pub fn intersection_grid(rotated: &[Point2; 4], vp: Point2) -> Result<[Point2; 4]> {
    let [left, right, top, bottom] = *rotated;
    let l_t = line_through(vp, top)?;
    let l_b = line_through(vp, bottom)?;
    let dir = Point2::new(top.x - bottom.x, top.y - bottom.y);
    let l_l = HomogeneousLine::through_with_direction(left, dir)?;
    let l_r = HomogeneousLine::through_with_direction(right, dir)?;
    Ok([
        intersect_lines(&l_l, &l_t)?,
        intersect_lines(&l_r, &l_t)?,
        intersect_lines(&l_l, &l_b)?,
        intersect_lines(&l_r, &l_b)?,
    ])
}

/// Nine-point set for `r` on `level`; `vp` and `r` are in that level's
/// coordinates. When `r` sits on the vanishing point all nine points
/// collapse onto it.
pub fn sample_points(vp: Point2, r: Point2, level: usize, config: &SamplerConfig) -> Result<SampleSet> {
    let c = *config.scale_factors.get(level).ok_or_else(|| {
        Error::InvalidArgument(format!("pyramid level {level} out of range"))
    })?;
    let d = sampling_offset(vp, r, c, config.beta, config.exponent);
    let mut points = [r; POINTS_PER_LEVEL];
    if d > 0.0 && vp.distance(r) >= 1e-9 {
        let rotated = rotate_grid(&initial_grid(r, d), r, vp)?;
        let corners = intersection_grid(&rotated, vp)?;
        points[..4].copy_from_slice(&rotated);
        points[4..8].copy_from_slice(&corners);
    }
    Ok(SampleSet {
        reference: r,
        level,
        scale_c: c,
        offset_d: d,
        points,
    })
}

/// Samples for all three levels. `vp_full` and `r_full` are in full-image
/// pixels; `level_dims` holds `(width, height)` of each feature map. Every
/// returned point is clamped into its level's `[0, w−1] × [0, h−1]`.
pub fn multi_scale_samples(
    vp_full: Point2,
    r_full: Point2,
    level_dims: &[(usize, usize); 3],
    config: &SamplerConfig,
) -> Result<[SampleSet; 3]> {
    let mut sets = Vec::with_capacity(3);
    for (level, (&stride, &(w, h))) in LEVEL_STRIDES.iter().zip(level_dims).enumerate() {
        let s = 1.0 / stride as f64;
        let mut set = sample_points(vp_full.scale(s), r_full.scale(s), level, config)?;
        for p in &mut set.points {
            *p = clamp_to(*p, w, h);
        }
        sets.push(set);
    }
    Ok(sets.try_into().expect("three levels"))
}

pub(crate) fn clamp_to(p: Point2, w: usize, h: usize) -> Point2 {
    Point2::new(
        p.x.clamp(0.0, w.saturating_sub(1) as f64),
        p.y.clamp(0.0, h.saturating_sub(1) as f64),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::collinearity;

    #[test]
    fn offset_examples() {
        let v = Point2::new(10.0, 0.0);
        assert_eq!(sampling_offset(v, Point2::new(7.0, 4.0), 1.0, 30.0, 2.0), 25.0);
        assert_eq!(sampling_offset(v, v, 1.0, 30.0, 2.0), 0.0);
        let far = sampling_offset(Point2::new(20.0, 0.0), Point2::new(0.0, 0.0), 1.0, 30.0, 2.0);
        assert_eq!(far, 30.0);
    }

    #[test]
    fn initial_grid_examples() {
        let g = initial_grid(Point2::new(5.0, 5.0), 2.0);
        assert_eq!(
            g,
            [
                Point2::new(3.0, 5.0),
                Point2::new(7.0, 5.0),
                Point2::new(5.0, 3.0),
                Point2::new(5.0, 7.0)
            ]
        );
        let r = Point2::new(1.0, 2.0);
        assert_eq!(initial_grid(r, 0.0), [r; 4]);
        assert_eq!(
            initial_grid(Point2::new(0.0, 0.0), 1.0),
            [
                Point2::new(-1.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, -1.0),
                Point2::new(0.0, 1.0)
            ]
        );
    }

    #[test]
    fn rotation_examples() {
        let r = Point2::new(0.0, 0.0);
        let d = 3.0;
        let rot = rotate_grid(&initial_grid(r, d), r, Point2::new(1.0, 1.0)).unwrap();
        let s = d / 2f64.sqrt();
        assert!(rot[1].distance(Point2::new(s, s)) < 1e-12);

        let g = initial_grid(r, d);
        let same = rotate_grid(&g, r, Point2::new(5.0, 0.0)).unwrap();
        assert_eq!(same, g);

        let r = Point2::new(100.0, 50.0);
        let rot = rotate_grid(&initial_grid(r, 7.5), r, Point2::new(613.0, 185.0)).unwrap();
        for p in rot {
            assert!((p.distance(r) - 7.5).abs() < 1e-9 * 7.5);
        }
        assert!(matches!(rotate_grid(&g, r, r), Err(Error::CoincidentVpRef)));
    }

    #[test]
    fn intersection_example() {
        let rotated = [
            Point2::new(1.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(2.0, -1.0),
        ];
        let c = intersection_grid(&rotated, Point2::new(0.0, 0.0)).unwrap();
        let expected = [
            Point2::new(1.0, 0.5),
            Point2::new(3.0, 1.5),
            Point2::new(1.0, -0.5),
            Point2::new(3.0, -1.5),
        ];
        for (a, b) in c.iter().zip(&expected) {
            assert!(a.distance(*b) < 1e-12, "{a:?} vs {b:?}");
        }
        let v = Point2::new(0.0, 0.0);
        assert!(collinearity(v, rotated[2], c[0]).abs() < 1e-9);
        assert!(collinearity(v, c[0], c[1]).abs() < 1e-9);
        // Near edge is shorter than the far edge.
        assert!(c[0].distance(c[2]) < c[1].distance(c[3]));
    }

    #[test]
    fn coincident_reference_collapses() {
        let v = Point2::new(4.0, 4.0);
        let set = sample_points(v, v, 0, &SamplerConfig::default()).unwrap();
        assert_eq!(set.points, [v; 9]);
        assert_eq!(set.offset_d, 0.0);
    }

    #[test]
    fn level_scale_factor() {
        // ‖v − r‖² = 10 at level 2 (c = 2) gives d = 20.
        let set = sample_points(Point2::new(3.0, 1.0), Point2::new(0.0, 0.0), 2, &SamplerConfig::default())
            .unwrap();
        assert!((set.offset_d - 20.0).abs() < 1e-12);
        assert_eq!(set.scale_c, 2.0);
        assert_eq!(set.points[8], Point2::new(0.0, 0.0));
    }

    #[test]
    fn multi_scale_rescales_and_counts() {
        let dims = [(64, 64), (32, 32), (16, 16)];
        let sets = multi_scale_samples(
            Point2::new(130.0, 60.0),
            Point2::new(100.0, 48.0),
            &dims,
            &SamplerConfig::default(),
        )
        .unwrap();
        assert_eq!(sets[0].reference, Point2::new(25.0, 12.0));
        assert_eq!(sets.iter().map(|s| s.points.len()).sum::<usize>(), 27);
        assert!(matches!(
            sample_points(Point2::new(1.0, 1.0), Point2::new(0.0, 0.0), 3, &SamplerConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
