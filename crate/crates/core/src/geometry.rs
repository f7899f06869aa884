//! Projective primitives: homogeneous points and lines, quad-to-quad
//! homographies, and the pinhole camera used to move between pixels and
//! world points.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};

/// A point in the image plane. `x` grows to the right, `y` grows downwards.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, 1.0)
    }

    pub fn scale(&self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// The line `a·x + b·y + c = 0`. Coefficients are only meaningful up to a
/// nonzero scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HomogeneousLine {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if a == 0.0 && b == 0.0 && c == 0.0 {
            return Err(Error::InvalidArgument(
                "line coefficients are all zero".into(),
            ));
        }
        Ok(Self { a, b, c })
    }

    /// Line through `p` with direction `dir`.
    pub fn through_with_direction(p: Point2, dir: Point2) -> Result<Self> {
        if dir.x.hypot(dir.y) < 1e-12 {
            return Err(Error::CoincidentPoints);
        }
        // Normal is the direction rotated by 90 degrees.
        let (a, b) = (-dir.y, dir.x);
        Ok(Self {
            a,
            b,
            c: -(a * p.x + b * p.y),
        })
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    /// Signed distance of `p` from the line.
    pub fn distance(&self, p: Point2) -> f64 {
        self.eval(p) / self.a.hypot(self.b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }
}

/// Line through two points via the homogeneous cross product.
pub fn line_through(p: Point2, q: Point2) -> Result<HomogeneousLine> {
    if p.distance(q) < 1e-12 {
        return Err(Error::CoincidentPoints);
    }
    let l = p.homogeneous().cross(&q.homogeneous());
    Ok(HomogeneousLine {
        a: l.x,
        b: l.y,
        c: l.z,
    })
}

/// Meeting point of two lines via the homogeneous cross product.
pub fn intersect_lines(l1: &HomogeneousLine, l2: &HomogeneousLine) -> Result<Point2> {
    let p = l1.vector().cross(&l2.vector());
    if p.z.abs() < 1e-12 * l1.max_abs() * l2.max_abs() {
        return Err(Error::ParallelLines);
    }
    Ok(Point2::new(p.x / p.z, p.y / p.z))
}

/// Normalized area of the triangle (p, q, r); zero when collinear.
///
/// The homogeneous triple product `det[p q r]` divided by the product of the
/// two edge lengths leaving `q`, so the value is the sine of the angle at `q`.
pub fn collinearity(p: Point2, q: Point2, r: Point2) -> f64 {
    let u = Point2::new(p.x - q.x, p.y - q.y);
    let v = Point2::new(r.x - q.x, r.y - q.y);
    let norm = u.x.hypot(u.y) * v.x.hypot(v.y);
    if norm == 0.0 {
        return 0.0;
    }
    (u.x * v.y - u.y * v.x) / norm
}

/// Four vertices in the order top-left, top-right, bottom-right, bottom-left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    vertices: [Point2; 4],
}

impl Quad {
    pub fn new(vertices: [Point2; 4]) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateQuad(format!(
                "non-finite vertex ({}, {})",
                v.x, v.y
            )));
        }
        for i in 0..4 {
            let (p, q, r) = (vertices[i], vertices[(i + 1) % 4], vertices[(i + 2) % 4]);
            if p.distance(q) < 1e-12 || q.distance(r) < 1e-12 || collinearity(p, q, r).abs() < 1e-12
            {
                return Err(Error::DegenerateQuad(format!(
                    "vertices {i}, {}, {} are collinear",
                    (i + 1) % 4,
                    (i + 2) % 4
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2; 4] {
        &self.vertices
    }

    /// Shoelace area (absolute value).
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let twice: f64 = (0..4)
            .map(|i| {
                let (p, q) = (v[i], v[(i + 1) % 4]);
                p.x * q.y - q.x * p.y
            })
            .sum();
        twice.abs() / 2.0
    }
}

/// Projective map of the plane.
///
/// Stored normalized: bottom-right entry is 1 when it is not tiny, otherwise
/// the matrix has unit Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite homography entry".into()));
        }
        let m = normalize(m);
        let cond = condition_number(&m);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::NearSingular(cond));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let q = self.m * p.homogeneous();
        if q.z.abs() < 1e-12 {
            return Err(Error::PointAtInfinity);
        }
        Ok(Point2::new(q.x / q.z, q.y / q.z))
    }

    pub fn inverse(&self) -> Result<Self> {
        let cond = condition_number(&self.m);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::NearSingular(cond));
        }
        let inv = self.m.try_inverse().ok_or(Error::NearSingular(f64::INFINITY))?;
        Ok(Self { m: normalize(inv) })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::from_matrix(self.m * other.m)
    }

    /// Determinant of the Jacobian of the map at `p`, i.e. the local area
    /// magnification. For `x' = M·x / w` this is `det(M) / w³`.
    pub fn jacobian_det(&self, p: Point2) -> Result<f64> {
        let w = (self.m * p.homogeneous()).z;
        if w.abs() < 1e-12 {
            return Err(Error::PointAtInfinity);
        }
        Ok(self.m.determinant() / (w * w * w))
    }
}

fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let h33 = m[(2, 2)];
    if h33.abs() > 1e-9 {
        m / h33
    } else {
        let n = m.norm();
        if n > 0.0 {
            m / n
        } else {
            m
        }
    }
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Similarity that moves the centroid to the origin and makes the mean
/// distance from it √2.
fn conditioning_transform(pts: &[Point2; 4]) -> Matrix3<f64> {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / 4.0;
    let s = if mean > 1e-12 {
        std::f64::consts::SQRT_2 / mean
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: Point2) -> Point2 {
    let q = t * p.homogeneous();
    Point2::new(q.x / q.z, q.y / q.z)
}

/// Homography taking each vertex of `src` to the matching vertex of `dst`.
///
/// Normalized DLT: both quads are conditioned, the 8×9 system is solved for
/// its null vector by SVD, and the result is mapped back to pixel units.
pub fn homography_from_quads(src: &Quad, dst: &Quad) -> Result<Homography> {
    let t_src = conditioning_transform(src.vertices());
    let t_dst = conditioning_transform(dst.vertices());

    // Padded with a zero row to 9×9 so the thin SVD exposes the full V.
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for (k, (s, d)) in src.vertices().iter().zip(dst.vertices()).enumerate() {
        let s = transform(&t_src, *s);
        let d = transform(&t_dst, *d);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for c in 0..9 {
            a[(2 * k, c)] = r0[c];
            a[(2 * k + 1, c)] = r1[c];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateQuad("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let largest = svd.singular_values[order[0]];
    let second_smallest = svd.singular_values[order[7]];
    if largest == 0.0 || second_smallest / largest < 1e-10 {
        return Err(Error::DegenerateQuad(format!(
            "correspondence system has more than one null direction (σ8/σ1 = {:.3e})",
            if largest == 0.0 { 0.0 } else { second_smallest / largest }
        )));
    }
    let h = v_t.row(order[8]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::DegenerateQuad("target conditioning failed".into()))?;
    Homography::from_matrix(t_dst_inv * hn * t_src)
}

/// Pinhole camera. `rotation` and `translation` take world points into the
/// camera frame: `p_cam = R·p_world + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() || translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite parameter".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= 1e-6) {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {err:.3e})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        })
    }

    /// Camera whose frame coincides with the world frame.
    pub fn with_identity_extrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(fx, fy, cx, cy, Matrix3::identity(), Vector3::zeros())
    }

    pub fn with_extrinsics(&self, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(self.fx, self.fy, self.cx, self.cy, rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn world_to_camera(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation * p.to_vector() + self.translation)
    }

    pub fn camera_to_world(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation.transpose() * (p.to_vector() - self.translation))
    }

    /// Pixel at which a world point images, or `None` when it is on or
    /// behind the image plane.
    pub fn project(&self, p: Point3) -> Option<Point2> {
        let c = self.world_to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        Some(Point2::new(
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
        ))
    }

    /// World point seen at `pixel` with camera-frame depth `depth`.
    pub fn back_project(&self, pixel: Point2, depth: f64) -> Result<Point3> {
        if !(depth > 0.0) {
            return Err(Error::NonPositiveDepth(depth));
        }
        let cam = Point3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        );
        Ok(self.camera_to_world(cam))
    }
}
