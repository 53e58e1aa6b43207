//! Extension of a circle homeomorphism to the closed unit disk.
//!
//! The disk is cut by the four chords of the quarter arcs into four circular
//! segments and a central square. Each segment is charted onto `T` with its
//! arc on the base, extended there by the dyadic construction, and pushed to
//! the matching image segment. The central square is filled by a Coons patch
//! of the induced chord traces, which is checked numerically for injectivity.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::CircleMap;
use crate::error::{Error, Result};
use crate::extension::{
    build_extension_with, check_homeomorphism_with, ExtensionMesh, HomeomorphismReport,
};
use crate::geometry::{orient2d, triangles_overlap, Point, Triangle};
use crate::par::{map_range, Parallelism};

/// One quarter arc with its chord.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSegment {
    pub theta0: f64,
    pub theta1: f64,
}

impl ArcSegment {
    pub fn start(&self) -> Point {
        Point::new(self.theta0.cos(), self.theta0.sin())
    }

    pub fn end(&self) -> Point {
        Point::new(self.theta1.cos(), self.theta1.sin())
    }

    pub fn chord_length(&self) -> f64 {
        self.start().dist(self.end())
    }

    /// Area between the arc and its chord.
    pub fn segment_area(&self) -> f64 {
        let a = self.theta1 - self.theta0;
        0.5 * (a - a.sin())
    }

    /// Whether `q` lies strictly on the arc side of the chord.
    pub fn on_arc_side(&self, q: Point) -> bool {
        let (p0, p1) = (self.start(), self.end());
        (p1 - p0).cross(q - p0) < 0.0
    }
}

/// The four quarter arcs and the central square they leave over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskCover {
    pub arcs: [ArcSegment; 4],
    /// Corners `(1,0), (0,1), (-1,0), (0,-1)` of the central square.
    pub square: [Point; 4],
}

impl DiskCover {
    pub fn square_area(&self) -> f64 {
        let s = &self.square;
        0.5 * (orient2d(s[0], s[1], s[2]) + orient2d(s[0], s[2], s[3]))
    }
}

pub fn cover_circle() -> DiskCover {
    let arcs = [0, 1, 2, 3].map(|q| ArcSegment {
        theta0: q as f64 * FRAC_PI_2,
        theta1: (q + 1) as f64 * FRAC_PI_2,
    });
    DiskCover {
        arcs,
        square: [
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
        ],
    }
}

/// Chart from `T` onto the circular segment of an arc: the vertical fibre of
/// `T` over `x` goes linearly onto the segment from the arc point at relative
/// arc length `(x + 1)/2` to the chord point at the same relative position.
/// The base of `T` lands on the arc and the legs on the chord.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentChart {
    pub arc: ArcSegment,
}

impl SegmentChart {
    fn arc_point(&self, x: f64) -> Point {
        let a = self.arc.theta0 + 0.5 * (x + 1.0) * (self.arc.theta1 - self.arc.theta0);
        Point::new(a.cos(), a.sin())
    }

    fn chord_point(&self, x: f64) -> Point {
        self.arc.start().lerp(self.arc.end(), 0.5 * (x + 1.0))
    }

    pub fn to_disk(&self, p: Point) -> Point {
        let x = p.x.clamp(-1.0, 1.0);
        let room = 1.0 - x.abs();
        let a = self.arc_point(x);
        if room <= 0.0 {
            return a;
        }
        a.lerp(self.chord_point(x), (p.y / room).clamp(0.0, 1.0))
    }

    /// Inverse of [`to_disk`](Self::to_disk) on the closed segment.
    pub fn from_disk(&self, q: Point) -> Point {
        let p1 = self.arc.end();
        let side = |x: f64| {
            let (a, c) = (self.arc_point(x), self.chord_point(x));
            let fibre = c - a;
            fibre.cross(q - a) * fibre.cross(p1 - a)
        };
        // Fibres sweep from the start point to the end point; `q` is on the
        // end side of every fibre left of its own.
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if side(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let (a, c) = (self.arc_point(x), self.chord_point(x));
        let fibre = c - a;
        let len2 = fibre.dot(fibre);
        let t = if len2 > 0.0 {
            ((q - a).dot(fibre) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Point::new(x, t * (1.0 - x.abs()))
    }
}

/// Numerical injectivity diagnostics of the central Coons patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralDiagnostics {
    pub grid: usize,
    /// Minimum orientation of the image grid triangles, relative to the
    /// source triangles.
    pub min_orientation_ratio: f64,
    /// Minimum finite-difference Jacobian determinant at grid-cell centres.
    pub min_jacobian: f64,
    pub overlap_pairs_tested: usize,
    pub overlaps_found: usize,
}

impl CentralDiagnostics {
    pub fn passed(&self) -> bool {
        self.min_orientation_ratio > 0.0 && self.min_jacobian > 0.0 && self.overlaps_found == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskDiagnostics {
    pub segments: Vec<HomeomorphismReport>,
    pub central: CentralDiagnostics,
}

impl DiskDiagnostics {
    pub fn passed(&self) -> bool {
        self.central.passed() && self.segments.iter().all(HomeomorphismReport::passed)
    }
}

/// Piecewise extension of a circle homeomorphism to the disk.
#[derive(Debug, Clone)]
pub struct DiskExtension {
    circle: CircleMap,
    meshes: Vec<ExtensionMesh>,
    source: [SegmentChart; 4],
    image: [SegmentChart; 4],
    corners: [Point; 4],
    diagnostics: DiskDiagnostics,
}

/// Grid resolution of the central injectivity check.
pub const CENTRAL_GRID: usize = 64;

pub fn assemble_disk_extension(circle: &CircleMap, depth: u32) -> Result<DiskExtension> {
    assemble_disk_extension_with(circle, depth, Parallelism::default())
}

pub fn assemble_disk_extension_with(
    circle: &CircleMap,
    depth: u32,
    par: Parallelism,
) -> Result<DiskExtension> {
    circle.validate()?;
    let cover = cover_circle();
    let source = cover.arcs.map(|arc| SegmentChart { arc });
    let image = [0, 1, 2, 3].map(|q| {
        let (theta0, theta1) = circle.image_arc(q);
        SegmentChart {
            arc: ArcSegment { theta0, theta1 },
        }
    });
    let meshes = (0..4)
        .map(|q| build_extension_with(circle.arc_restriction(q), depth, par))
        .collect::<Result<Vec<_>>>()?;
    let segments = meshes
        .iter()
        .map(|m| check_homeomorphism_with(m, 1000, 0x5eed, par))
        .collect();
    let mut ext = DiskExtension {
        circle: circle.clone(),
        meshes,
        source,
        image,
        corners: [0, 1, 2, 3].map(|q| image[q].arc.start()),
        diagnostics: DiskDiagnostics {
            segments,
            central: CentralDiagnostics {
                grid: CENTRAL_GRID,
                min_orientation_ratio: f64::NAN,
                min_jacobian: f64::NAN,
                overlap_pairs_tested: 0,
                overlaps_found: 0,
            },
        },
    };
    let central = ext.central_diagnostics(CENTRAL_GRID, par)?;
    ext.diagnostics.central = central;
    if !ext.diagnostics.central.passed() {
        return Err(Error::InjectivityCheckFailed(format!(
            "central patch: {:?}",
            ext.diagnostics.central
        )));
    }
    Ok(ext)
}

impl DiskExtension {
    pub fn circle(&self) -> &CircleMap {
        &self.circle
    }

    pub fn meshes(&self) -> &[ExtensionMesh] {
        &self.meshes
    }

    pub fn diagnostics(&self) -> &DiskDiagnostics {
        &self.diagnostics
    }

    /// Image of the chord point of arc `q` at relative position `u ∈ [0, 1]`.
    fn chord_trace(&self, q: usize, u: f64) -> Result<Point> {
        let x = (2.0 * u - 1.0).clamp(-1.0, 1.0);
        let h = self.meshes[q].eval(Point::new(x, 1.0 - x.abs()))?;
        Ok(self.image[q].to_disk(h))
    }

    /// Coons patch over the unit square: `s` runs along chord 0 and `t` along
    /// chord 3 reversed, matching the square `(1,0), (0,1), (-1,0), (0,-1)`.
    fn coons(&self, s: f64, t: f64) -> Result<Point> {
        let bottom = self.chord_trace(0, s)?;
        let right = self.chord_trace(1, t)?;
        let top = self.chord_trace(2, 1.0 - s)?;
        let left = self.chord_trace(3, 1.0 - t)?;
        let [c00, c10, c11, c01] = self.corners;
        let ruled = (1.0 - t) * bottom + t * top + (1.0 - s) * left + s * right;
        let bilinear = (1.0 - s) * (1.0 - t) * c00
            + s * (1.0 - t) * c10
            + s * t * c11
            + (1.0 - s) * t * c01;
        Ok(ruled - bilinear)
    }

    /// Parameters of `q` in the central square.
    fn square_params(q: Point) -> (f64, f64) {
        // q = (1,0) + s(-1,1) + t(-1,-1)
        let (dx, dy) = (q.x - 1.0, q.y);
        (0.5 * (dy - dx), -0.5 * (dx + dy))
    }

    pub fn eval(&self, q: Point) -> Result<Point> {
        if !(q.x.is_finite() && q.y.is_finite()) || q.norm() > 1.0 + 1e-12 {
            return Err(Error::OutOfDomain {
                value: q.norm(),
                domain: "closed unit disk",
            });
        }
        for (k, chart) in self.source.iter().enumerate() {
            if chart.arc.on_arc_side(q) {
                let p = chart.from_disk(q);
                let h = self.meshes[k].eval(p)?;
                return Ok(self.image[k].to_disk(h));
            }
        }
        let (s, t) = Self::square_params(q);
        self.coons(s.clamp(0.0, 1.0), t.clamp(0.0, 1.0))
    }

    fn central_diagnostics(&self, n: usize, par: Parallelism) -> Result<CentralDiagnostics> {
        let nodes = map_range((n + 1) * (n + 1), par, |idx| {
            let (i, j) = (idx % (n + 1), idx / (n + 1));
            self.coons(i as f64 / n as f64, j as f64 / n as f64)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let node = |i: usize, j: usize| nodes[j * (n + 1) + i];
        // Image orientation is measured against that of the parameter square
        // placed in the disk.
        let square_sign = {
            let a = cover_circle().square;
            orient2d(a[0], a[1], a[3]).signum()
        };
        let h = 1.0 / n as f64;
        let mut triangles = Vec::with_capacity(2 * n * n);
        let mut min_orientation_ratio = f64::INFINITY;
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                for tri in [[a, b, c], [a, c, d]] {
                    let o = orient2d(tri[0], tri[1], tri[2]) * square_sign;
                    min_orientation_ratio = min_orientation_ratio.min(o / (h * h));
                    let ccw = if square_sign > 0.0 { tri } else { [tri[0], tri[2], tri[1]] };
                    triangles.push(Triangle::from_vertices_unchecked(ccw));
                }
            }
        }
        let eps = 1e-6;
        let jac = map_range(n * n, par, |idx| {
            let (i, j) = (idx % n, idx / n);
            let (s, t) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let ds = self.coons(s + eps, t)? - self.coons(s - eps, t)?;
            let dt = self.coons(s, t + eps)? - self.coons(s, t - eps)?;
            Ok(ds.cross(dt) * square_sign / (4.0 * eps * eps))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let min_jacobian = jac.into_iter().fold(f64::INFINITY, f64::min);

        let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
        let pairs = 1000;
        let mut overlaps_found = 0;
        for _ in 0..pairs {
            let a = rng.gen_range(0..triangles.len());
            // Half of the partners are grid neighbours of `a`.
            let b = if rng.gen_bool(0.5) {
                let off = rng.gen_range(1..=2 * n + 2);
                (a + off) % triangles.len()
            } else {
                rng.gen_range(0..triangles.len())
            };
            if a == b {
                continue;
            }
            let (ta, tb) = (&triangles[a], &triangles[b]);
            let tol = 1e-9 * ta.max_edge().min(tb.max_edge());
            if triangles_overlap(ta, tb, tol) {
                overlaps_found += 1;
            }
        }
        Ok(CentralDiagnostics {
            grid: n,
            min_orientation_ratio,
            min_jacobian,
            overlap_pairs_tested: pairs,
            overlaps_found,
        })
    }
}
