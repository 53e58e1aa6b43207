//! Piecewise-affine homeomorphic extension of a boundary map of `[-1, 1]`
//! to the triangle `T = {0 ≤ y ≤ 1, y - 1 ≤ x ≤ 1 - y}`.
//!
//! Every dyadic interval `I` of generation `j` owns a cell between the apex
//! heights `2^{-j}` and `2^{-j-1}`: the parallelogram spanned by the apex of
//! `I`, the apex of its right neighbour and the apexes of the children in
//! between, cut into three triangles. The last interval of a generation owns
//! only the triangle over its own children. Each triangle is sent affinely to
//! the triangle spanned by the apexes of the corresponding image intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{Interval, MonotoneMap};
use crate::error::{Error, Result};
use crate::geometry::{affine_from_vertices, orient2d, triangles_overlap, AffineMap, Point, Triangle};
use crate::par::{map_range, pairwise_sum, Parallelism};

/// Tent diameter below which evaluation stops refining and returns the anchor.
pub const EVAL_RESOLUTION: f64 = 1e-12;

/// Deepest generation whose interval endpoints are still exact doubles with
/// room to spare for the half-steps used by a cell.
pub const MAX_GENERATION: u32 = 50;

/// Vertices of the reference triangle `T`.
pub const REFERENCE_TRIANGLE: [Point; 3] = [
    Point::new(-1.0, 0.0),
    Point::new(1.0, 0.0),
    Point::new(0.0, 1.0),
];

/// Whether `p` lies in `T` up to an absolute slack `tol`.
pub fn in_reference_triangle(p: Point, tol: f64) -> bool {
    p.y >= -tol && p.x >= p.y - 1.0 - tol && p.x <= 1.0 - p.y + tol
}

/// Apex of an interval: the right-angle vertex of the isosceles right
/// triangle with base `interval`.
pub fn apex(interval: Interval) -> Result<Point> {
    if interval.is_degenerate() || !interval.lo.is_finite() || !interval.hi.is_finite() {
        return Err(Error::DegenerateInterval {
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    Ok(apex_unchecked(interval.lo, interval.hi))
}

fn apex_unchecked(lo: f64, hi: f64) -> Point {
    Point::new(0.5 * (lo + hi), 0.5 * (hi - lo))
}

fn pow2(e: i32) -> f64 {
    2.0_f64.powi(e)
}

/// The dyadic interval `I_{k,j}` of length `2^{1-j}`, `k ∈ 1..=2^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub gen: u32,
    pub k: u64,
}

impl DyadicInterval {
    pub fn new(gen: u32, k: u64) -> Result<Self> {
        if gen > MAX_GENERATION {
            return Err(Error::InvalidParameter(format!(
                "generation {gen} exceeds {MAX_GENERATION}"
            )));
        }
        if k == 0 || k > 1u64 << gen {
            return Err(Error::InvalidParameter(format!(
                "index {k} outside 1..=2^{gen}"
            )));
        }
        Ok(DyadicInterval { gen, k })
    }

    pub fn len(&self) -> f64 {
        pow2(1 - self.gen as i32)
    }

    pub fn left(&self) -> f64 {
        -1.0 + self.len() * (self.k - 1) as f64
    }

    pub fn right(&self) -> f64 {
        -1.0 + self.len() * self.k as f64
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.left(), self.right())
    }

    pub fn is_last(&self) -> bool {
        self.k == 1u64 << self.gen
    }

    pub fn right_neighbor(&self) -> Option<DyadicInterval> {
        (!self.is_last()).then_some(DyadicInterval {
            gen: self.gen,
            k: self.k + 1,
        })
    }

    pub fn children(&self) -> (DyadicInterval, DyadicInterval) {
        let gen = self.gen + 1;
        (
            DyadicInterval { gen, k: 2 * self.k - 1 },
            DyadicInterval { gen, k: 2 * self.k },
        )
    }

    /// Position of this interval in generation-major, index-minor order.
    pub fn linear_index(&self) -> usize {
        ((1u64 << self.gen) - 1 + (self.k - 1)) as usize
    }
}

/// The five named points of a cell. The neighbour points are absent for the
/// last interval of a generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellVertices {
    /// `X`: apex of `I`.
    pub apex: Point,
    /// `Y`: apex of the right neighbour of `I`.
    pub neighbor_apex: Option<Point>,
    /// `z`: apex of the left child of the right neighbour.
    pub neighbor_child_apex: Option<Point>,
    /// `y`: apex of the right child of `I`.
    pub right_child_apex: Point,
    /// `x`: apex of the left child of `I`.
    pub left_child_apex: Point,
}

impl CellVertices {
    /// Points `[X, Y, z, y, x]` in pentagon traversal order.
    pub fn pentagon(&self) -> Vec<Point> {
        let mut out = vec![self.apex];
        out.extend(self.neighbor_apex);
        out.extend(self.neighbor_child_apex);
        out.push(self.right_child_apex);
        out.push(self.left_child_apex);
        out
    }

    fn from_endpoints(v: &[f64]) -> Self {
        // v = [a, c, b] or [a, c, b, m, e]: interval [a, b] split at c,
        // neighbour [b, e] split at m.
        let (a, c, b) = (v[0], v[1], v[2]);
        let (neighbor_apex, neighbor_child_apex) = if v.len() == 5 {
            (Some(apex_unchecked(b, v[4])), Some(apex_unchecked(b, v[3])))
        } else {
            (None, None)
        };
        CellVertices {
            apex: apex_unchecked(a, b),
            neighbor_apex,
            neighbor_child_apex,
            right_child_apex: apex_unchecked(c, b),
            left_child_apex: apex_unchecked(a, c),
        }
    }

    /// Triangles in counterclockwise vertex order: `(X, x, y)`, `(X, y, Y)`,
    /// `(Y, y, z)`.
    fn triangles(&self) -> Vec<(PieceKind, [Point; 3])> {
        let mut out = vec![(
            PieceKind::ApexChildren,
            [self.apex, self.left_child_apex, self.right_child_apex],
        )];
        if let (Some(ya), Some(z)) = (self.neighbor_apex, self.neighbor_child_apex) {
            out.push((PieceKind::ApexNeighbor, [self.apex, self.right_child_apex, ya]));
            out.push((PieceKind::NeighborChild, [ya, self.right_child_apex, z]));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceKind {
    /// `ΔXyx`
    ApexChildren,
    /// `ΔXYy`
    ApexNeighbor,
    /// `ΔYzy`
    NeighborChild,
}

/// One affine piece of the extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub kind: PieceKind,
    pub source: Triangle,
    pub image: Triangle,
    pub map: AffineMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PentagonCell {
    pub interval: DyadicInterval,
    pub source: CellVertices,
    pub image: CellVertices,
    pub pieces: Vec<AffinePiece>,
    pub image_interval: Interval,
    /// Image of the right neighbour; `None` for last cells.
    pub neighbor_image_interval: Option<Interval>,
}

impl PentagonCell {
    pub fn is_last(&self) -> bool {
        self.neighbor_image_interval.is_none()
    }

    pub fn source_area(&self) -> f64 {
        self.pieces.iter().map(|p| p.source.area()).sum()
    }

    pub fn image_area(&self) -> f64 {
        self.pieces.iter().map(|p| p.image.area()).sum()
    }

    /// The piece containing `p` (best barycentric margin), if any.
    pub fn locate(&self, p: Point, tol: f64) -> Option<&AffinePiece> {
        self.pieces
            .iter()
            .map(|piece| {
                let b = piece.source.barycentric(p);
                (piece, b[0].min(b[1]).min(b[2]))
            })
            .filter(|(_, m)| *m >= -tol)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(piece, _)| piece)
    }
}

/// Source endpoints of a cell: `[A, mid, B]` or `[A, mid, B, B + ℓ/2, B + ℓ]`.
fn source_endpoints(interval: DyadicInterval) -> Vec<f64> {
    let (a, l) = (interval.left(), interval.len());
    let mut v = vec![a, a + 0.5 * l, interval.right()];
    if !interval.is_last() {
        let b = interval.right();
        v.push(b + 0.5 * l);
        v.push(b + l);
    }
    v
}

fn cell_from_values(interval: DyadicInterval, src: &[f64], img: &[f64]) -> Result<PentagonCell> {
    if img.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!(
            "boundary map is not strictly increasing on the endpoints of {interval:?}"
        )));
    }
    let source = CellVertices::from_endpoints(src);
    let image = CellVertices::from_endpoints(img);
    let pieces = source
        .triangles()
        .into_iter()
        .zip(image.triangles())
        .map(|((kind, s), (_, t))| {
            let map = affine_from_vertices(s, t)?;
            Ok(AffinePiece {
                kind,
                source: Triangle::from_vertices_unchecked(s),
                image: Triangle::from_vertices_unchecked(t),
                map,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PentagonCell {
        interval,
        source,
        image,
        pieces,
        image_interval: Interval::new(img[0], img[2]),
        neighbor_image_interval: (img.len() == 5).then(|| Interval::new(img[2], img[4])),
    })
}

/// Builds the cell of `interval` for the boundary map `phi`.
pub fn build_cell(interval: DyadicInterval, phi: &MonotoneMap) -> Result<PentagonCell> {
    let src = source_endpoints(interval);
    let img = src.iter().map(|&t| phi.eval(t)).collect::<Result<Vec<_>>>()?;
    cell_from_values(interval, &src, &img)
}

/// All cells of generations `0..=depth` for a boundary map, with the
/// boundary values at the generation-`depth + 1` endpoints.
#[derive(Debug, Clone)]
pub struct ExtensionMesh {
    phi: MonotoneMap,
    depth: u32,
    cells: Vec<PentagonCell>,
    /// `φ(-1 + i·2^{-depth})` for `i = 0..=2^{depth+1}`.
    boundary_values: Vec<f64>,
}

/// Builds the extension mesh to `depth` with the default execution strategy.
pub fn build_extension(phi: &MonotoneMap, depth: u32) -> Result<ExtensionMesh> {
    build_extension_with(phi, depth, Parallelism::default())
}

pub fn build_extension_with(
    phi: &MonotoneMap,
    depth: u32,
    par: Parallelism,
) -> Result<ExtensionMesh> {
    if depth >= MAX_GENERATION {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} must be below {MAX_GENERATION}"
        )));
    }
    phi.validate()?;
    let n = 1usize << (depth + 1);
    let step = pow2(-(depth as i32));
    let boundary_values = map_range(n + 1, par, |i| match i {
        0 => Ok(-1.0),
        i if i == n => Ok(1.0),
        i => phi.eval(-1.0 + step * i as f64),
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let total = (1usize << (depth + 1)) - 1;
    let cells = map_range(total, par, |idx| {
        let gen = usize::BITS - 1 - (idx + 1).leading_zeros();
        let k = (idx + 1 - (1usize << gen)) as u64 + 1;
        let interval = DyadicInterval { gen, k };
        // Cell endpoints are multiples of 2^{-depth}; stride between them in
        // the table is 2^{depth - gen}.
        let stride = 1usize << (depth - gen);
        let base = 2 * stride * (k as usize - 1);
        let offsets: &[usize] = if interval.is_last() { &[0, 1, 2] } else { &[0, 1, 2, 3, 4] };
        let src = source_endpoints(interval);
        let img: Vec<f64> = offsets
            .iter()
            .map(|o| boundary_values[base + o * stride])
            .collect();
        cell_from_values(interval, &src, &img)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(ExtensionMesh {
        phi: phi.clone(),
        depth,
        cells,
        boundary_values,
    })
}

impl ExtensionMesh {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn phi(&self) -> &MonotoneMap {
        &self.phi
    }

    pub fn cells(&self) -> &[PentagonCell] {
        &self.cells
    }

    pub fn cell(&self, interval: DyadicInterval) -> Option<&PentagonCell> {
        (interval.gen <= self.depth).then(|| &self.cells[interval.linear_index()])
    }

    pub fn generation(&self, gen: u32) -> &[PentagonCell] {
        let start = (1usize << gen) - 1;
        &self.cells[start..start + (1usize << gen)]
    }

    /// Image intervals of generation `depth + 1`, left to right.
    pub fn residual_image_intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.boundary_values
            .windows(2)
            .map(|w| Interval::new(w[0], w[1]))
    }

    /// Area of `T` below the apexes of generation `depth + 1`: the
    /// `2^{J+1}` upward tents plus the `2^{J+1} - 1` inverted triangles
    /// between them, each of area `ℓ²/4` with `ℓ = 2^{-J}`.
    pub fn source_residual_area(&self) -> f64 {
        let tents = (1u64 << (self.depth + 2)) - 1;
        let quarter_sq = pow2(-2 * self.depth as i32 - 2);
        tents as f64 * quarter_sq
    }

    /// Area under the chain of generation-`depth + 1` image apexes.
    pub fn image_residual_area(&self) -> f64 {
        let mut chain = vec![Point::new(-1.0, 0.0)];
        chain.extend(self.residual_image_intervals().map(|i| apex_unchecked(i.lo, i.hi)));
        chain.push(Point::new(1.0, 0.0));
        let strips: Vec<f64> = chain
            .windows(2)
            .map(|w| 0.5 * (w[1].x - w[0].x) * (w[0].y + w[1].y))
            .collect();
        pairwise_sum(&strips)
    }

    pub fn source_cell_area(&self) -> f64 {
        let areas: Vec<f64> = self.cells.iter().map(PentagonCell::source_area).collect();
        pairwise_sum(&areas)
    }

    pub fn image_cell_area(&self) -> f64 {
        let areas: Vec<f64> = self.cells.iter().map(PentagonCell::image_area).collect();
        pairwise_sum(&areas)
    }

    /// Evaluates the extension at a point of `T`.
    ///
    /// Points below the mesh depth are resolved by building the required
    /// deeper cell on the fly (no caching, so evaluation stays pure).
    pub fn eval(&self, p: Point) -> Result<Point> {
        if !(p.x.is_finite() && p.y.is_finite()) || !in_reference_triangle(p, 1e-12) {
            return Err(Error::OutOfDomain {
                value: if p.y < 0.0 { p.y } else { p.x },
                domain: "reference triangle T",
            });
        }
        let y = p.y.clamp(0.0, 1.0);
        let x = p.x.clamp(y - 1.0, 1.0 - y);
        if y == 0.0 {
            return Ok(Point::new(self.phi.eval(x)?, 0.0));
        }
        let gen = band_generation(y);
        let interval = band_interval(gen, x - y);
        let tent_diameter = interval.len();
        let owned;
        let cell = match self.cell(interval) {
            Some(c) => c,
            None => {
                // Below the mesh: build the cell on the fly unless it is under
                // the resolution floor or its image has collapsed in floating
                // point, in which case the image apex is the answer.
                let deep = build_cell(interval, &self.phi);
                match deep {
                    Ok(c) if tent_diameter >= EVAL_RESOLUTION => {
                        owned = c;
                        &owned
                    }
                    _ => {
                        let image = self.phi.image_interval(interval.interval())?;
                        return Ok(apex_unchecked(image.lo, image.hi));
                    }
                }
            }
        };
        let q = Point::new(x, y);
        let piece = cell.locate(q, 1e-9).ok_or(Error::OutOfDomain {
            value: x,
            domain: "cell lookup",
        })?;
        Ok(piece.map.apply(q))
    }
}

/// Generation `j` with `2^{-j-1} ≤ y ≤ 2^{-j}` (the smallest such `j`).
fn band_generation(y: f64) -> u32 {
    let mut gen = (-y.log2()).floor().max(0.0) as u32;
    while gen > 0 && y >= pow2(-(gen as i32)) {
        gen -= 1;
    }
    while y < pow2(-(gen as i32) - 1) && gen < MAX_GENERATION {
        gen += 1;
    }
    gen.min(MAX_GENERATION)
}

/// The interval of generation `gen` whose cell spans `A ≤ x - y ≤ B`.
fn band_interval(gen: u32, u: f64) -> DyadicInterval {
    let len = pow2(1 - gen as i32);
    let count = 1u64 << gen;
    let k = (((u + 1.0) / len).floor().max(0.0) as u64 + 1).min(count);
    DyadicInterval { gen, k }
}

/// Diagnostics of [`check_homeomorphism`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeomorphismReport {
    pub depth: u32,
    pub cells: usize,
    pub pieces: usize,
    /// Minimum determinant of the linear parts.
    pub min_det: f64,
    /// Minimum signed area over all source and image triangles.
    pub min_signed_area: f64,
    /// Largest relative deviation between the orientation of `ΔX'x'y'` and
    /// its closed form `(b - c)(c - a)/2`.
    pub max_orientation_closed_form_error: f64,
    /// Largest distance between the images of a shared vertex under the
    /// maps of two adjacent pieces.
    pub max_edge_mismatch: f64,
    /// `1 - (cell areas + residual strip area)` on the source side.
    pub source_tiling_residual: f64,
    /// `1 - (cell areas + residual area)` on the image side.
    pub image_tiling_residual: f64,
    pub overlap_pairs_tested: usize,
    pub overlaps_found: usize,
    pub left_leg: LegTrace,
    pub right_leg: LegTrace,
}

/// Ratios `|H(P) - H(Q)| / |P - Q|` between consecutive apexes on a leg of `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegTrace {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest image displacement `|H(P) - P|` at the leg apexes.
    pub max_displacement: f64,
}

impl HomeomorphismReport {
    pub const EDGE_TOLERANCE: f64 = 1e-12;
    pub const IMAGE_AREA_TOLERANCE: f64 = 1e-9;

    pub fn passed(&self) -> bool {
        self.min_det > 0.0
            && self.min_signed_area > 0.0
            && self.max_edge_mismatch <= Self::EDGE_TOLERANCE
            && self.source_tiling_residual == 0.0
            && self.image_tiling_residual.abs() <= Self::IMAGE_AREA_TOLERANCE
            && self.overlaps_found == 0
    }
}

/// Runs the homeomorphism diagnostics with 10³ sampled overlap pairs.
pub fn check_homeomorphism(mesh: &ExtensionMesh) -> HomeomorphismReport {
    check_homeomorphism_with(mesh, 1000, 0x5eed, Parallelism::default())
}

pub fn check_homeomorphism_with(
    mesh: &ExtensionMesh,
    overlap_pairs: usize,
    seed: u64,
    par: Parallelism,
) -> HomeomorphismReport {
    let cells = mesh.cells();
    let per_cell = map_range(cells.len(), par, |i| cell_diagnostics(mesh, &cells[i]));
    let fold = |f: fn(&CellDiagnostics) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        per_cell.iter().map(f).fold(init, pick)
    };
    let min_det = fold(|d| d.min_det, f64::INFINITY, f64::min);
    let min_signed_area = fold(|d| d.min_area, f64::INFINITY, f64::min);
    let max_closed = fold(|d| d.closed_form_err, 0.0, f64::max);
    let max_edge_mismatch = fold(|d| d.mismatch, 0.0, f64::max);

    let source_tiling_residual = 1.0 - (mesh.source_cell_area() + mesh.source_residual_area());
    let image_tiling_residual = 1.0 - (mesh.image_cell_area() + mesh.image_residual_area());

    let pairs = sample_piece_pairs(mesh, overlap_pairs, seed);
    let overlaps_found = map_slice_count(&pairs, par, |&(a, b)| {
        let (ta, tb) = (&piece_at(mesh, a).image, &piece_at(mesh, b).image);
        let scale = ta.max_edge().min(tb.max_edge());
        triangles_overlap(ta, tb, 1e-9 * scale)
    });

    HomeomorphismReport {
        depth: mesh.depth(),
        cells: cells.len(),
        pieces: cells.iter().map(|c| c.pieces.len()).sum(),
        min_det,
        min_signed_area,
        max_orientation_closed_form_error: max_closed,
        max_edge_mismatch,
        source_tiling_residual,
        image_tiling_residual,
        overlap_pairs_tested: pairs.len(),
        overlaps_found,
        left_leg: leg_trace(mesh, false),
        right_leg: leg_trace(mesh, true),
    }
}

fn map_slice_count<T: Sync, F: Fn(&T) -> bool + Sync + Send>(
    items: &[T],
    par: Parallelism,
    f: F,
) -> usize {
    crate::par::map_slice(items, par, f).into_iter().filter(|&b| b).count()
}

struct CellDiagnostics {
    min_det: f64,
    min_area: f64,
    closed_form_err: f64,
    mismatch: f64,
}

fn cell_diagnostics(mesh: &ExtensionMesh, cell: &PentagonCell) -> CellDiagnostics {
    let mut min_det = f64::INFINITY;
    let mut min_area = f64::INFINITY;
    for piece in &cell.pieces {
        min_det = min_det.min(piece.map.det());
        min_area = min_area.min(piece.source.signed_area()).min(piece.image.signed_area());
    }
    let (a, b) = (cell.image_interval.lo, cell.image_interval.hi);
    let c = cell.pieces[0].image.vertices()[1].x * 2.0 - a; // x' = ((a+c)/2, ·)
    let first = cell.pieces[0].image.vertices();
    let orient = orient2d(first[0], first[1], first[2]);
    let closed = 0.5 * (b - c) * (c - a);
    let closed_form_err = (orient - closed).abs() / closed.abs().max(f64::MIN_POSITIVE);

    let mut mismatch: f64 = 0.0;
    let mut compare = |p: &AffinePiece, q: &AffinePiece, v: Point| {
        mismatch = mismatch.max(p.map.apply(v).dist(q.map.apply(v)));
    };
    let s = &cell.source;
    if cell.pieces.len() == 3 {
        let (t1, t2, t3) = (&cell.pieces[0], &cell.pieces[1], &cell.pieces[2]);
        let ya = s.neighbor_apex.expect("full cell");
        for v in [s.apex, s.right_child_apex] {
            compare(t1, t2, v);
        }
        for v in [ya, s.right_child_apex] {
            compare(t2, t3, v);
        }
        // Edge Y–z is the edge X–x of the right neighbour's cell.
        if let Some(next) = cell.interval.right_neighbor().and_then(|n| mesh.cell(n)) {
            let z = s.neighbor_child_apex.expect("full cell");
            for v in [ya, z] {
                compare(t3, &next.pieces[0], v);
            }
        }
    }
    // Bottom edges x–y and y–z are top edges X–Y of the children's cells.
    let (left, right) = cell.interval.children();
    if let Some(lc) = mesh.cell(left) {
        let target = lc.pieces.get(1).unwrap_or(&lc.pieces[0]);
        for v in [s.left_child_apex, s.right_child_apex] {
            compare(&cell.pieces[0], target, v);
        }
    }
    if let (Some(rc), Some(z)) = (mesh.cell(right), s.neighbor_child_apex) {
        if rc.pieces.len() == 3 {
            compare(&cell.pieces[2], &rc.pieces[1], s.right_child_apex);
            compare(&cell.pieces[2], &rc.pieces[1], z);
        }
    }
    CellDiagnostics {
        min_det,
        min_area,
        closed_form_err,
        mismatch,
    }
}

type PieceId = (usize, usize);

fn piece_at(mesh: &ExtensionMesh, id: PieceId) -> &AffinePiece {
    &mesh.cells()[id.0].pieces[id.1]
}

/// Pairs of image triangles for the overlap test: half drawn among
/// neighbouring cells (same cell, siblings, parent and children), half
/// uniformly.
fn sample_piece_pairs(mesh: &ExtensionMesh, count: usize, seed: u64) -> Vec<(PieceId, PieceId)> {
    let cells = mesh.cells();
    let total_pieces: usize = cells.iter().map(|c| c.pieces.len()).sum();
    if total_pieces < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count {
        attempts += 1;
        let c1 = rng.gen_range(0..cells.len());
        let p1 = rng.gen_range(0..cells[c1].pieces.len());
        let c2 = if rng.gen_bool(0.5) {
            rng.gen_range(0..cells.len())
        } else {
            let iv = cells[c1].interval;
            let mut candidates = vec![iv];
            candidates.extend(iv.right_neighbor());
            if iv.k > 1 {
                candidates.push(DyadicInterval { gen: iv.gen, k: iv.k - 1 });
            }
            let (l, r) = iv.children();
            candidates.extend([l, r]);
            candidates.extend(r.right_neighbor());
            if iv.gen > 0 {
                candidates.push(DyadicInterval { gen: iv.gen - 1, k: iv.k.div_ceil(2) });
            }
            let pick = candidates[rng.gen_range(0..candidates.len())];
            match mesh.cell(pick) {
                Some(c) => c.interval.linear_index(),
                None => continue,
            }
        };
        let p2 = rng.gen_range(0..cells[c2].pieces.len());
        if (c1, p1) != (c2, p2) {
            out.push(((c1, p1), (c2, p2)));
        }
    }
    out
}

fn leg_trace(mesh: &ExtensionMesh, right: bool) -> LegTrace {
    // Leg apexes of the first (or last) interval of generations 0..=depth+1.
    let points: Vec<(Point, Point)> = (0..=mesh.depth() + 1)
        .map(|gen| {
            let len = pow2(1 - gen as i32);
            let src = if right {
                Interval::new(1.0 - len, 1.0)
            } else {
                Interval::new(-1.0, -1.0 + len)
            };
            let img = mesh.phi.image_interval(src).expect("dyadic endpoints in domain");
            (apex_unchecked(src.lo, src.hi), apex_unchecked(img.lo, img.hi))
        })
        .collect();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for w in points.windows(2) {
        let r = w[0].1.dist(w[1].1) / w[0].0.dist(w[1].0);
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    let max_displacement = points.iter().map(|(s, i)| s.dist(*i)).fold(0.0, f64::max);
    LegTrace {
        min_ratio,
        max_ratio,
        max_displacement,
    }
}
