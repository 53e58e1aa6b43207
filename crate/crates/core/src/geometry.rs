//! Planar primitives: points, triangles, affine maps and the closed-form
//! integral of a power of an affine weight over a triangle.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Relative area threshold below which a source triangle counts as degenerate.
const DEGENERATE_REL_AREA: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn checked(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Point { x, y })
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        Point::new(self * rhs.x, self * rhs.y)
    }
}

/// Twice the signed area of `(a, b, c)`; positive for counterclockwise order.
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * orient2d(a, b, c)
}

/// A nondegenerate triangle with counterclockwise vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    v: [Point; 3],
}

impl Triangle {
    pub fn new(v0: Point, v1: Point, v2: Point) -> Result<Self> {
        for p in [v0, v1, v2] {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let area = signed_area(v0, v1, v2);
        if area > 0.0 {
            Ok(Triangle { v: [v0, v1, v2] })
        } else {
            Err(Error::DegenerateTriangle { area })
        }
    }

    /// Builds a triangle without the orientation check. Used for the
    /// vertex-indexed cell triangles whose orientation is checked separately.
    pub(crate) fn from_vertices_unchecked(v: [Point; 3]) -> Self {
        Triangle { v }
    }

    pub fn vertices(&self) -> [Point; 3] {
        self.v
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(self.v[0], self.v[1], self.v[2])
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = self.v;
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn max_edge(&self) -> f64 {
        let [a, b, c] = self.v;
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// Barycentric coordinates of `p` relative to `(v0, v1, v2)`.
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let [a, b, c] = self.v;
        let d = orient2d(a, b, c);
        let l1 = orient2d(a, p, c) / d;
        let l2 = orient2d(a, b, p) / d;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Point containment with a barycentric slack of `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.barycentric(p).iter().all(|&l| l >= -tol)
    }

    /// Splits into four congruent children through the edge midpoints.
    pub fn subdivide(&self) -> [Triangle; 4] {
        let [a, b, c] = self.v;
        let (ab, bc, ca) = (a.midpoint(b), b.midpoint(c), c.midpoint(a));
        [
            Triangle { v: [a, ab, ca] },
            Triangle { v: [ab, b, bc] },
            Triangle { v: [ca, bc, c] },
            Triangle { v: [bc, ca, ab] },
        ]
    }
}

/// Whether two triangles overlap in their interiors, decided by a separating
/// axis test over the six edge normals. Touching along an edge or at a vertex
/// does not count; `tol` is an absolute slack on the projected gap.
pub fn triangles_overlap(t1: &Triangle, t2: &Triangle, tol: f64) -> bool {
    let (a, b) = (t1.vertices(), t2.vertices());
    for verts in [&a, &b] {
        for i in 0..3 {
            let e = verts[(i + 1) % 3] - verts[i];
            let len = e.norm();
            if len == 0.0 {
                continue;
            }
            let n = Point::new(-e.y / len, e.x / len);
            let (min1, max1) = project(&a, n);
            let (min2, max2) = project(&b, n);
            if max1 <= min2 + tol || max2 <= min1 + tol {
                return false;
            }
        }
    }
    true
}

fn project(v: &[Point; 3], n: Point) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(n);
        (lo.min(d), hi.max(d))
    })
}

/// `z ↦ linear · z + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: [[f64; 2]; 2],
    pub offset: Point,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        linear: [[1.0, 0.0], [0.0, 1.0]],
        offset: Point::new(0.0, 0.0),
    };

    pub fn apply(&self, p: Point) -> Point {
        let m = &self.linear;
        Point::new(
            m[0][0] * p.x + m[0][1] * p.y + self.offset.x,
            m[1][0] * p.x + m[1][1] * p.y + self.offset.y,
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.linear;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let (a, b) = (&self.linear, &inner.linear);
        let mut linear = [[0.0; 2]; 2];
        for (i, row) in linear.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        AffineMap {
            linear,
            offset: self.apply(inner.offset),
        }
    }

    /// Coefficients as the 2×3 row-major matrix `[[a, b, tx], [c, d, ty]]`.
    pub fn coefficients(&self) -> [[f64; 3]; 2] {
        let m = &self.linear;
        [
            [m[0][0], m[0][1], self.offset.x],
            [m[1][0], m[1][1], self.offset.y],
        ]
    }
}

/// The unique affine map sending `src.v[i]` to `dst.v[i]` for each `i`.
pub fn affine_from_triangles(src: &Triangle, dst: &Triangle) -> Result<AffineMap> {
    affine_from_vertices(src.vertices(), dst.vertices())
}

pub(crate) fn affine_from_vertices(src: [Point; 3], dst: [Point; 3]) -> Result<AffineMap> {
    let (e1, e2) = (src[1] - src[0], src[2] - src[0]);
    let det = e1.cross(e2);
    let scale = e1.dot(e1).max(e2.dot(e2)).max((src[2] - src[1]).dot(src[2] - src[1]));
    if !(det.abs() > DEGENERATE_REL_AREA * scale) {
        return Err(Error::DegenerateSource { area: 0.5 * det });
    }
    let (f1, f2) = (dst[1] - dst[0], dst[2] - dst[0]);
    // linear = [f1 f2] · [e1 e2]^{-1}
    let inv = [[e2.y / det, -e2.x / det], [-e1.y / det, e1.x / det]];
    let linear = [
        [
            f1.x * inv[0][0] + f2.x * inv[1][0],
            f1.x * inv[0][1] + f2.x * inv[1][1],
        ],
        [
            f1.y * inv[0][0] + f2.y * inv[1][0],
            f1.y * inv[0][1] + f2.y * inv[1][1],
        ],
    ];
    let partial = AffineMap {
        linear,
        offset: Point::default(),
    };
    let offset = dst[0] - partial.apply(src[0]);
    Ok(AffineMap { linear, offset })
}

/// Largest singular value of the linear part.
pub fn operator_norm(map: &AffineMap) -> f64 {
    let m = &map.linear;
    // Largest eigenvalue of MᵀM = [[p, r], [r, q]].
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let q = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let r = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let disc = ((p - q) * (p - q) + 4.0 * r * r).sqrt();
    (0.5 * (p + q + disc)).sqrt()
}

/// `w(x, y) = constant + cx·x + cy·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFunctional {
    pub constant: f64,
    pub cx: f64,
    pub cy: f64,
}

impl AffineFunctional {
    pub const fn new(constant: f64, cx: f64, cy: f64) -> Self {
        AffineFunctional { constant, cx, cy }
    }

    pub const fn one() -> Self {
        AffineFunctional::new(1.0, 0.0, 0.0)
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.constant + self.cx * p.x + self.cy * p.y
    }
}

/// Exact value of `∫_Δ w^{-s} dA` for an affine weight `w ≥ 0` on `Δ`.
pub fn weighted_triangle_integral(tri: &Triangle, w: &AffineFunctional, s: f64) -> Result<f64> {
    let v = tri.vertices();
    weighted_integral_from_values(tri.area(), [w.eval(v[0]), w.eval(v[1]), w.eval(v[2])], s)
}

/// `∫_Δ w^{-s} dA` given the area of `Δ` and the values of the affine weight
/// at its three vertices.
///
/// The pushforward of area under an affine `w` is a hat density on
/// `[w_min, w_max]` peaking at the middle value, so the integral reduces to
/// two one-dimensional power integrals.
pub fn weighted_integral_from_values(area: f64, values: [f64; 3], s: f64) -> Result<f64> {
    if !s.is_finite() || values.iter().any(|v| !v.is_finite()) || !area.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut w = values;
    w.sort_by(f64::total_cmp);
    let scale = w[2].abs().max(w[0].abs());
    if w[0] < 0.0 {
        if w[0] < -1e-14 * scale {
            return Err(Error::NegativeWeight { min: w[0] });
        }
        for v in w.iter_mut() {
            *v = v.max(0.0);
        }
    }
    if s == 0.0 || area == 0.0 {
        return Ok(area);
    }
    let [w0, w1, w2] = w;
    if w2 == 0.0 {
        return if s < 0.0 {
            Ok(0.0)
        } else {
            Err(Error::DivergentIntegral("weight vanishes identically".into()))
        };
    }
    if w0 == 0.0 {
        if w1 == 0.0 && s >= 1.0 {
            return Err(Error::DivergentIntegral(format!(
                "weight vanishes on an edge and exponent {s} >= 1"
            )));
        }
        if s >= 2.0 {
            return Err(Error::DivergentIntegral(format!(
                "weight vanishes at a vertex and exponent {s} >= 2"
            )));
        }
    }
    let spread = w2 - w0;
    if spread == 0.0 {
        return Ok(area * w0.powf(-s));
    }
    let lower = if w1 > w0 { rising_mean(w0, w1, s) } else { 0.0 };
    let upper = if w2 > w1 { falling_mean(w1, w2, s) } else { 0.0 };
    Ok(2.0 * area / spread * (lower + upper))
}

/// `∫_a^b t^{-s} (t - a) dt / (b - a)` for `0 ≤ a < b`.
fn rising_mean(a: f64, b: f64, s: f64) -> f64 {
    power_moments(a, b, s).0
}

/// `∫_a^b t^{-s} (b - t) dt / (b - a)` for `0 ≤ a < b`.
fn falling_mean(a: f64, b: f64, s: f64) -> f64 {
    power_moments(a, b, s).1
}

fn power_moments(a: f64, b: f64, s: f64) -> (f64, f64) {
    let h = (b - a) / b;
    let lead = b.powf(1.0 - s);
    if h <= 0.5 {
        // Expand (1 - v)^{-s} = Σ c_k v^k around t = b.
        let (mut rising, mut falling) = (0.0, 0.0);
        let mut ck = 1.0;
        let mut hk = h;
        for k in 0..400 {
            let kf = k as f64;
            let tr = ck * hk / ((kf + 1.0) * (kf + 2.0));
            let tf = ck * hk / (kf + 2.0);
            rising += tr;
            falling += tf;
            if k > 2 && tf.abs() <= 1e-18 * falling.abs() {
                break;
            }
            ck *= (s + kf) / (kf + 1.0);
            hk *= h;
        }
        (lead * rising, lead * falling)
    } else {
        let q = a / b;
        let g_s = tail_power(-s, q);
        let g_s1 = tail_power(1.0 - s, q);
        let rising = if q == 0.0 { g_s1 } else { g_s1 - q * g_s };
        let falling = g_s - g_s1;
        (lead * rising / h, lead * falling / h)
    }
}

/// `∫_q^1 u^e du` for `0 ≤ q < 1`; callers guarantee convergence at `q = 0`.
fn tail_power(e: f64, q: f64) -> f64 {
    if q == 0.0 {
        return if e > -1.0 { 1.0 / (e + 1.0) } else { f64::INFINITY };
    }
    let e1 = e + 1.0;
    if e1 == 0.0 {
        -q.ln()
    } else {
        -(e1 * q.ln()).exp_m1() / e1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_interval, adaptive_triangle};

    fn unit() -> Triangle {
        Triangle::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)).unwrap()
    }

    #[test]
    fn identity_and_scaling_maps() {
        let src = unit();
        let id = affine_from_triangles(&src, &src).unwrap();
        assert_eq!(id, AffineMap::IDENTITY);
        let dst =
            Triangle::new(Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 3.0)).unwrap();
        let m = affine_from_triangles(&src, &dst).unwrap();
        assert_eq!(m.linear, [[2.0, 0.0], [0.0, 3.0]]);
        assert_eq!(m.offset, Point::new(0.0, 0.0));
    }

    #[test]
    fn collinear_source_rejected() {
        let src = Triangle::from_vertices_unchecked([
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ]);
        let err = affine_from_triangles(&src, &unit()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSource { .. }));
        assert!(Triangle::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)).is_err());
    }

    #[test]
    fn operator_norms() {
        assert_eq!(operator_norm(&AffineMap::IDENTITY), 1.0);
        let d = AffineMap {
            linear: [[2.0, 0.0], [0.0, 3.0]],
            offset: Point::default(),
        };
        assert_eq!(operator_norm(&d), 3.0);
        for k in 0..16 {
            let t = 0.4 * k as f64;
            let r = AffineMap {
                linear: [[t.cos(), -t.sin()], [t.sin(), t.cos()]],
                offset: Point::new(1.0, 2.0),
            };
            assert!((operator_norm(&r) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_weight_gives_area() {
        let t = Triangle::new(Point::new(0.3, -1.0), Point::new(2.0, 0.5), Point::new(-1.0, 4.0)).unwrap();
        let v = weighted_triangle_integral(&t, &AffineFunctional::one(), 0.7).unwrap();
        assert!((v - t.area()).abs() < 1e-15 * t.area());
    }

    #[test]
    fn edge_singular_half_power() {
        // ∫₀¹ y^{-1/2} (1 - y) dy = 4/3, and the 1-D oracle agrees.
        let w = AffineFunctional::new(0.0, 0.0, 1.0);
        let v = weighted_triangle_integral(&unit(), &w, 0.5).unwrap();
        let oracle = adaptive_interval(|y| y.powf(-0.5) * (1.0 - y), 0.0, 1.0, 1e-12).value;
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
        assert!((oracle - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_and_negativity() {
        let w = AffineFunctional::new(0.0, 0.0, 1.0);
        assert!(matches!(
            weighted_triangle_integral(&unit(), &w, 1.0),
            Err(Error::DivergentIntegral(_))
        ));
        // vanishing at a single vertex: finite for s < 2
        let w = AffineFunctional::new(0.0, 1.0, 1.0);
        let v = weighted_triangle_integral(&unit(), &w, 1.5).unwrap();
        // ∫ over unit triangle of (x+y)^{-1.5}: density of x+y is t on [0,1]
        let oracle = adaptive_interval(|t| t.powf(-1.5) * t, 0.0, 1.0, 1e-12).value;
        assert!((v - oracle).abs() < 1e-8 * oracle);
        assert!(matches!(
            weighted_triangle_integral(&unit(), &w, 2.0),
            Err(Error::DivergentIntegral(_))
        ));
        let neg = AffineFunctional::new(-0.5, 0.0, 1.0);
        assert!(matches!(
            weighted_triangle_integral(&unit(), &neg, 0.5),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn near_constant_weights_are_stable() {
        let t = unit();
        for s in [-0.7, 0.3, 0.999, 1.0, 1.7] {
            let w = AffineFunctional::new(1.0, 1e-9, 3e-9);
            let v = weighted_triangle_integral(&t, &w, s).unwrap();
            let oracle = adaptive_triangle(&t, |p| w.eval(p).powf(-s), 1e-12).value;
            assert!((v - oracle).abs() <= 1e-12 * oracle, "s={s}: {v} vs {oracle}");
        }
    }

    #[test]
    fn integer_exponent_branches() {
        let t = unit();
        let w = AffineFunctional::new(0.2, 1.0, 0.5);
        for s in [1.0, 2.0, 3.0, -1.0] {
            let v = weighted_triangle_integral(&t, &w, s).unwrap();
            let oracle = adaptive_triangle(&t, |p| w.eval(p).powf(-s), 1e-11).value;
            assert!((v - oracle).abs() <= 1e-9 * oracle, "s={s}: {v} vs {oracle}");
        }
    }

    #[test]
    fn overlap_predicate() {
        let a = unit();
        let b = Triangle::new(Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)).unwrap();
        assert!(!triangles_overlap(&a, &b, 1e-12));
        let c = Triangle::new(Point::new(0.2, 0.2), Point::new(2.0, 0.2), Point::new(0.2, 2.0)).unwrap();
        assert!(triangles_overlap(&a, &c, 1e-12));
    }
}
