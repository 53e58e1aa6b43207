//! Snowflake-type curves over the unit square and their Hölder
//! parametrizations.
//!
//! Every segment of `S_n` is replaced either by a symmetric four-segment bump
//! (each child of relative length `p`) or by four collinear quarters. The
//! parameter interval of the segment is split into four equal parts in the
//! first case and into parts of relative lengths `x, 1/2 - x, 1/2 - x, x` in
//! the second. Words over `{A, B, C}` record the split history of a parameter
//! interval and determine all lengths exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orient2d, Point};
use crate::par::{map_slice, Parallelism};

/// Perimeter of the unit square; arc coordinates live in `[0, 4)`.
pub const PERIMETER: f64 = 4.0;

/// `α`, `x` and `η` derived from `p` through `(1/4)^α = p`, `x^α = 1/4` and
/// `η = (1/4) / (1/2 - x)^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub alpha: f64,
    pub x: f64,
    pub eta: f64,
}

pub fn derive_exponents(p: f64) -> Result<Exponents> {
    if !(0.25..0.5).contains(&p) {
        return Err(Error::InvalidParameter(format!("snowflake p = {p} must lie in [1/4, 1/2)")));
    }
    let alpha = p.ln() / 0.25f64.ln();
    let x = 0.25f64.powf(1.0 / alpha);
    let eta = 0.25 / (0.5 - x).powf(alpha);
    Ok(Exponents { alpha, x, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'A',
            Letter::B => 'B',
            Letter::C => 'C',
        }
    }
}

/// Letter counts `(a, b, c)` of a word.
pub fn word_counts(word: &str) -> Result<(usize, usize, usize)> {
    word.chars().try_fold((0, 0, 0), |(a, b, c), ch| match ch {
        'A' => Ok((a + 1, b, c)),
        'B' => Ok((a, b + 1, c)),
        'C' => Ok((a, b, c + 1)),
        other => Err(Error::InvalidLetter(other)),
    })
}

/// How a segment is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Four-segment bump, children of relative length `p`.
    Bump,
    /// Four collinear quarters.
    Straight,
}

/// The choice made for a segment, looked up by the word of its parameter
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoiceOracle {
    AllBump,
    AllStraight,
    /// `start` on even word lengths, the other choice on odd ones.
    Alternating { start: Choice },
    /// Bump with probability `bump_probability`, drawn from a generator
    /// seeded by `seed` and the word.
    Seeded { seed: u64, bump_probability: f64 },
}

impl ChoiceOracle {
    pub fn choose(&self, word: &str) -> Choice {
        match *self {
            ChoiceOracle::AllBump => Choice::Bump,
            ChoiceOracle::AllStraight => Choice::Straight,
            ChoiceOracle::Alternating { start } => {
                if word.len().is_multiple_of(2) {
                    start
                } else {
                    match start {
                        Choice::Bump => Choice::Straight,
                        Choice::Straight => Choice::Bump,
                    }
                }
            }
            ChoiceOracle::Seeded {
                seed,
                bump_probability,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(word.as_bytes()));
                if rng.gen_bool(bump_probability) {
                    Choice::Bump
                } else {
                    Choice::Straight
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let ChoiceOracle::Seeded { bump_probability, .. } = *self {
            if !(0.0..=1.0).contains(&bump_probability) {
                return Err(Error::InvalidParameter(format!(
                    "bump probability {bump_probability} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowflakeSpec {
    pub p: f64,
    pub oracle: ChoiceOracle,
    /// Letters of the four parameter children of a straight split; two `B`
    /// (relative length `x`) and two `C` (relative length `1/2 - x`).
    #[serde(default = "default_straight_letters")]
    pub straight_letters: [Letter; 4],
}

fn default_straight_letters() -> [Letter; 4] {
    [Letter::B, Letter::C, Letter::C, Letter::B]
}

impl SnowflakeSpec {
    pub fn new(p: f64, oracle: ChoiceOracle) -> Result<Self> {
        let spec = SnowflakeSpec {
            p,
            oracle,
            straight_letters: default_straight_letters(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        derive_exponents(self.p)?;
        self.oracle.validate()?;
        let bs = self.straight_letters.iter().filter(|&&l| l == Letter::B).count();
        let cs = self.straight_letters.iter().filter(|&&l| l == Letter::C).count();
        if bs != 2 || cs != 2 {
            return Err(Error::InvalidParameter(
                "straight split needs two B and two C children".into(),
            ));
        }
        Ok(())
    }

    pub fn exponents(&self) -> Exponents {
        derive_exponents(self.p).expect("validated spec")
    }

    /// `(1/4)^a x^b (1/2 - x)^c`.
    pub fn param_length_formula(&self, word: &str) -> Result<f64> {
        let (a, b, c) = word_counts(word)?;
        let x = self.exponents().x;
        Ok(0.25f64.powi(a as i32) * x.powi(b as i32) * (0.5 - x).powi(c as i32))
    }

    /// `p^a (1/4)^{b + c}`.
    pub fn segment_length_formula(&self, word: &str) -> Result<f64> {
        let (a, b, c) = word_counts(word)?;
        Ok(self.p.powi(a as i32) * 0.25f64.powi((b + c) as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    pub word: String,
    /// Rounding residuals of `start` and `end`. Deep segments are short next
    /// to their coordinates, so lengths taken from rounded endpoints alone
    /// lose about `eps / length` relative accuracy.
    #[serde(skip)]
    pub residual: [Point; 2],
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `base + base_lo + v` as a rounded point and its residual.
fn offset(base: Point, base_lo: Point, v: Point) -> (Point, Point) {
    let (x, ex) = two_sum(base.x, v.x);
    let (y, ey) = two_sum(base.y, v.y);
    let (x, lx) = two_sum(x, ex + base_lo.x);
    let (y, ly) = two_sum(y, ey + base_lo.y);
    (Point::new(x, y), Point::new(lx, ly))
}

impl Segment {
    pub fn new(start: Point, end: Point, word: String) -> Self {
        Segment {
            start,
            end,
            word,
            residual: [Point::default(); 2],
        }
    }

    /// `end - start`, including the endpoint residuals.
    pub fn delta(&self) -> Point {
        let [ls, le] = self.residual;
        let (dx, ex) = two_sum(self.end.x, -self.start.x);
        let (dy, ey) = two_sum(self.end.y, -self.start.y);
        Point::new(dx + (ex + (le.x - ls.x)), dy + (ey + (le.y - ls.y)))
    }

    pub fn length(&self) -> f64 {
        self.delta().norm()
    }

    /// Splits at the relative offsets `steps` (each a multiple of `delta`),
    /// ending exactly at `end`.
    fn path(&self, steps: [Point; 3]) -> [Segment; 4] {
        let [ls, le] = self.residual;
        let mut pts = [(self.start, ls); 5];
        for (i, v) in steps.into_iter().enumerate() {
            pts[i + 1] = offset(self.start, ls, v);
        }
        pts[4] = (self.end, le);
        std::array::from_fn(|i| Segment {
            start: pts[i].0,
            end: pts[i + 1].0,
            word: self.word.clone(),
            residual: [pts[i].1, pts[i + 1].1],
        })
    }

    pub fn generation(&self) -> usize {
        self.word.len()
    }
}

/// A parameter interval `[start, end]` of arc coordinates on `S_0`.
///
/// The length is carried as a product of split fractions: the difference of
/// the endpoints loses most of its digits once intervals get short.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    pub start: f64,
    pub end: f64,
    pub length: f64,
    pub word: String,
}

impl ParamInterval {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

/// A matched segment of `S_m` and its parameter interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub segment: Segment,
    pub param: ParamInterval,
}

/// Height of the bump apex relative to the base, `√(p² - (1/2 - p)²)`.
pub fn bump_height(p: f64) -> f64 {
    (p * p - (0.5 - p) * (0.5 - p)).max(0.0).sqrt()
}

/// The four children of a bump replacement of `base`, placed on the right of
/// the directed segment (outward for a counterclockwise square).
pub fn generator_bump(p: f64, base: &Segment) -> Result<[Segment; 4]> {
    derive_exponents(p)?;
    let d = base.delta();
    let normal = Point::new(d.y, -d.x);
    let h = bump_height(p);
    let mut segs = base.path([p * d, 0.5 * d + h * normal, (1.0 - p) * d]);
    for s in &mut segs {
        s.word.push('A');
    }
    Ok(segs)
}

/// The final curve and every intermediate level, level `m` holding the
/// `4^{m+1}` pieces of `S_m` in counterclockwise order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowflakeState {
    pub spec: SnowflakeSpec,
    pub levels: Vec<Vec<Piece>>,
}

impl SnowflakeState {
    /// `S_0`: the unit square from `(0,0)` counterclockwise.
    pub fn initial(spec: SnowflakeSpec) -> Result<Self> {
        spec.validate()?;
        let corners = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let level = (0..4)
            .map(|i| Piece {
                segment: Segment::new(corners[i], corners[(i + 1) % 4], String::new()),
                param: ParamInterval {
                    start: i as f64,
                    end: (i + 1) as f64,
                    length: 1.0,
                    word: String::new(),
                },
            })
            .collect();
        Ok(SnowflakeState {
            spec,
            levels: vec![level],
        })
    }

    /// `S_n` with all intermediate levels.
    pub fn build(spec: SnowflakeSpec, generation: usize) -> Result<Self> {
        Self::build_with(spec, generation, Parallelism::default())
    }

    pub fn build_with(spec: SnowflakeSpec, generation: usize, par: Parallelism) -> Result<Self> {
        if generation > 10 {
            return Err(Error::InvalidParameter(format!(
                "generation {generation} above 10"
            )));
        }
        let mut state = Self::initial(spec)?;
        for _ in 0..generation {
            state.push_level(par);
        }
        Ok(state)
    }

    fn push_level(&mut self, par: Parallelism) {
        let spec = &self.spec;
        let ex = spec.exponents();
        let last = self.levels.last().expect("level 0 exists");
        let children = map_slice(last, par, |piece| refine_piece(spec, ex, piece));
        let next = children.into_iter().flatten().collect();
        self.levels.push(next);
    }

    pub fn generation(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn pieces(&self) -> &[Piece] {
        self.levels.last().expect("level 0 exists")
    }

    /// The state cut back to `generation` (a prefix of the levels).
    pub fn truncated(&self, generation: usize) -> SnowflakeState {
        SnowflakeState {
            spec: self.spec.clone(),
            levels: self.levels[..=generation.min(self.generation())].to_vec(),
        }
    }

    /// Vertices of `S_n` as a closed polygon (first vertex not repeated).
    pub fn polygon(&self) -> Vec<Point> {
        self.pieces().iter().map(|p| p.segment.start).collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.pieces().iter().map(|p| p.segment.length()).sum()
    }
}

fn refine_piece(spec: &SnowflakeSpec, ex: Exponents, piece: &Piece) -> [Piece; 4] {
    let parent = &piece.param;
    let (segments, letters) = match spec.oracle.choose(&parent.word) {
        Choice::Bump => (
            generator_bump(spec.p, &piece.segment).expect("validated p"),
            [Letter::A; 4],
        ),
        Choice::Straight => {
            let d = piece.segment.delta();
            (piece.segment.path([0.25 * d, 0.5 * d, 0.75 * d]), spec.straight_letters)
        }
    };
    let fraction = |l: Letter| match l {
        Letter::A => 0.25,
        Letter::B => ex.x,
        Letter::C => 0.5 - ex.x,
    };
    let mut cut = 0.0;
    let mut start = parent.start;
    let mut i = 0;
    segments.map(|mut segment| {
        let word = format!("{}{}", parent.word, letters[i].as_char());
        let f = fraction(letters[i]);
        cut += f;
        let end = if i == 3 {
            parent.end
        } else {
            parent.start + cut * (parent.end - parent.start)
        };
        segment.word = word.clone();
        let child = Piece {
            segment,
            param: ParamInterval {
                start,
                end,
                length: f * parent.length,
                word,
            },
        };
        start = end;
        i += 1;
        child
    })
}

/// Returns a new state with one more generation.
pub fn refine(state: &SnowflakeState) -> SnowflakeState {
    let mut next = state.clone();
    next.push_level(Parallelism::default());
    next
}

/// Evaluates `g_n` at the arc coordinate `t` (taken modulo 4).
pub fn eval_g(state: &SnowflakeState, t: f64) -> Point {
    let t = t.rem_euclid(PERIMETER);
    let pieces = state.pieces();
    let idx = pieces
        .partition_point(|p| p.param.end <= t)
        .min(pieces.len() - 1);
    let piece = &pieces[idx];
    let f = (t - piece.param.start) / piece.param.length();
    if f == 0.0 {
        return piece.segment.start;
    }
    piece.segment.start.lerp(piece.segment.end, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthCheck {
    pub pieces: usize,
    pub max_segment_rel_error: f64,
    pub max_param_rel_error: f64,
    /// Largest gap or overlap between consecutive parameter intervals of any
    /// level, including the wrap from 4 back to 0.
    pub max_partition_defect: f64,
}

/// Compares geometric lengths with the word formulas on every level.
pub fn length_formula_check(state: &SnowflakeState) -> LengthCheck {
    let mut seg: f64 = 0.0;
    let mut par: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut pieces = 0;
    for level in &state.levels {
        for (i, piece) in level.iter().enumerate() {
            pieces += 1;
            let fs = state.spec.segment_length_formula(&piece.param.word).expect("valid word");
            let fp = state.spec.param_length_formula(&piece.param.word).expect("valid word");
            seg = seg.max((piece.segment.length() - fs).abs() / fs);
            par = par.max((piece.param.length() - fp).abs() / fp);
            let next_start = if i + 1 == level.len() {
                level[0].param.start + PERIMETER
            } else {
                level[i + 1].param.start
            };
            defect = defect.max((next_start - piece.param.end).abs());
        }
        defect = defect.max(level[0].param.start.abs());
    }
    LengthCheck {
        pieces,
        max_segment_rel_error: seg,
        max_param_rel_error: par,
        max_partition_defect: defect,
    }
}

/// Relative slack for `ℓ(s) ≤ ℓ(I)^α`, which is an equality for words
/// without `C`; segment lengths come from coordinates of size one.
pub const ETA_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCheck {
    pub pairs: usize,
    /// `max |ℓ(s)/ℓ(I)^α - η^{c}|` from geometric lengths.
    pub max_residual: f64,
    /// Pairs with `ℓ(s) > ℓ(I)^α (1 + ETA_SLACK)`.
    pub violations: usize,
}

pub fn eta_identity_check(state: &SnowflakeState) -> EtaCheck {
    let ex = state.spec.exponents();
    let mut max_residual: f64 = 0.0;
    let mut violations = 0;
    let mut pairs = 0;
    for piece in state.levels.iter().flatten() {
        pairs += 1;
        let (_, _, c) = word_counts(&piece.param.word).expect("valid word");
        let ls = piece.segment.length();
        let li = piece.param.length().powf(ex.alpha);
        max_residual = max_residual.max((ls / li - ex.eta.powi(c as i32)).abs());
        if ls > li * (1.0 + ETA_SLACK) {
            violations += 1;
        }
    }
    EtaCheck {
        pairs,
        max_residual,
        violations,
    }
}

/// Convex hull (counterclockwise, collinear points dropped).
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn hull_diameter(h: &[Point]) -> f64 {
    match h.len() {
        0 | 1 => 0.0,
        2 => h[0].dist(h[1]),
        n => {
            let mut best: f64 = 0.0;
            let mut j = 1;
            for i in 0..n {
                let ni = (i + 1) % n;
                while orient2d(h[i], h[ni], h[(j + 1) % n]).abs()
                    > orient2d(h[i], h[ni], h[j]).abs()
                {
                    j = (j + 1) % n;
                }
                best = best.max(h[i].dist(h[j])).max(h[ni].dist(h[j]));
            }
            best
        }
    }
}

/// Hulls of the images `g_n(I)` for every node of every level.
struct HullTree {
    hulls: Vec<Vec<Vec<Point>>>,
}

impl HullTree {
    fn new(state: &SnowflakeState, par: Parallelism) -> Self {
        let n = state.generation();
        let mut hulls = vec![Vec::new(); n + 1];
        hulls[n] = state.levels[n]
            .iter()
            .map(|p| {
                if p.segment.start == p.segment.end {
                    vec![p.segment.start]
                } else {
                    vec![p.segment.start, p.segment.end]
                }
            })
            .collect();
        for m in (0..n).rev() {
            let below = &hulls[m + 1];
            let idx: Vec<usize> = (0..state.levels[m].len()).collect();
            hulls[m] = map_slice(&idx, par, |&i| {
                convex_hull(below[4 * i..4 * i + 4].iter().flatten().copied().collect())
            });
        }
        HullTree { hulls }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub generation: usize,
    /// `max diam(g_n(I)) / ℓ(I)^α` over all parameter intervals.
    pub constant: f64,
    /// The same maximum restricted to each level.
    pub per_level: Vec<f64>,
    /// `max diam(g_n(J)) / ℓ(J)^α` over sampled arcs `J`.
    pub arc_constant: f64,
    /// Largest number of parameter intervals in a cover of a sampled arc by
    /// maximal intervals of length at most `cover_factor · ℓ(J)`.
    pub max_cover_size: usize,
    pub cover_factor: f64,
    pub arcs_sampled: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderOptions {
    pub arcs: usize,
    pub cover_factor: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            arcs: 1000,
            cover_factor: 4.0,
            seed: 7,
            parallelism: Parallelism::default(),
        }
    }
}

pub fn holder_estimate(state: &SnowflakeState) -> HolderEstimate {
    holder_estimate_with(state, &HolderOptions::default())
}

pub fn holder_estimate_with(state: &SnowflakeState, opts: &HolderOptions) -> HolderEstimate {
    let alpha = state.spec.exponents().alpha;
    let tree = HullTree::new(state, opts.parallelism);
    let per_level: Vec<f64> = (0..=state.generation())
        .map(|m| {
            state.levels[m]
                .iter()
                .zip(&tree.hulls[m])
                .map(|(piece, hull)| hull_diameter(hull) / piece.param.length().powf(alpha))
                .fold(0.0, f64::max)
        })
        .collect();
    let constant = per_level.iter().copied().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = state.generation() as i32;
    let arcs: Vec<(f64, f64)> = (0..opts.arcs)
        .map(|_| {
            let start = dyadic_sample(&mut rng, PERIMETER, 24);
            let scale = 4f64.powi(-rng.gen_range(0..=n));
            let len = scale * (1.0 + rng.gen_range(0..1u32 << 12) as f64) / 4096.0;
            (start, len.min(PERIMETER / 2.0))
        })
        .collect();
    let results = map_slice(&arcs, opts.parallelism, |&(start, len)| {
        let (diam, cover) = arc_measure(state, &tree, start, len, opts.cover_factor);
        (diam / len.powf(alpha), cover)
    });
    HolderEstimate {
        generation: state.generation(),
        constant,
        per_level,
        arc_constant: results.iter().map(|r| r.0).fold(0.0, f64::max),
        max_cover_size: results.iter().map(|r| r.1).max().unwrap_or(0),
        cover_factor: opts.cover_factor,
        arcs_sampled: arcs.len(),
    }
}

fn dyadic_sample(rng: &mut ChaCha8Rng, range: f64, bits: u32) -> f64 {
    range * rng.gen_range(0..1u64 << bits) as f64 / (1u64 << bits) as f64
}

/// Splits the arc `[start, start + len]` (mod 4) into at most two
/// non-wrapping pieces.
fn arc_parts(start: f64, len: f64) -> Vec<(f64, f64)> {
    let end = start + len;
    if end <= PERIMETER {
        vec![(start, end)]
    } else {
        vec![(start, PERIMETER), (0.0, end - PERIMETER)]
    }
}

/// Diameter of `g_n` on an arc and the size of its maximal-interval cover.
fn arc_measure(state: &SnowflakeState, tree: &HullTree, start: f64, len: f64, k: f64) -> (f64, usize) {
    let mut points = Vec::new();
    let mut cover = 0;
    let limit = k * len;
    for (u, v) in arc_parts(start, len) {
        points.push(eval_g(state, u));
        points.push(eval_g(state, v));
        for side in 0..4 {
            collect_arc(state, tree, (0, side), u, v, limit, &mut points, &mut cover, false);
        }
    }
    (hull_diameter(&convex_hull(points)), cover)
}

#[allow(clippy::too_many_arguments)]
fn collect_arc(
    state: &SnowflakeState,
    tree: &HullTree,
    (m, i): (usize, usize),
    u: f64,
    v: f64,
    limit: f64,
    points: &mut Vec<Point>,
    cover: &mut usize,
    counted: bool,
) {
    let param = &state.levels[m][i].param;
    if param.end <= u || param.start >= v {
        return;
    }
    let mut counted = counted;
    if !counted && (param.length() <= limit || m == state.generation()) {
        *cover += 1;
        counted = true;
    }
    if u <= param.start && param.end <= v {
        points.extend_from_slice(&tree.hulls[m][i]);
        if counted {
            return;
        }
    }
    if m == state.generation() {
        return;
    }
    for c in 0..4 {
        collect_arc(state, tree, (m + 1, 4 * i + c), u, v, limit, points, cover, counted);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasisymmetryProbe {
    pub samples: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Extremes over the samples whose arc `[x - t, x + t]` lies in one side.
    pub same_side_samples: usize,
    pub same_side_max: f64,
    pub same_side_min: f64,
}

/// Scales `t` of the random probe run over `4^{-k}`, `k = 0..=QS_SCALES`.
pub const QS_SCALES: i32 = 8;

/// Dyadic samples `(x, t)` with `x` uniform on `[0, 4)` and `t` spread
/// log-uniformly over [`QS_SCALES`] levels.
pub fn quasisymmetry_samples(samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let x = dyadic_sample(&mut rng, PERIMETER, 24);
            let scale = 4f64.powi(-rng.gen_range(0..=QS_SCALES));
            let t = scale * (1 + rng.gen_range(0..1u32 << 10)) as f64 / 1024.0;
            (x, t)
        })
        .collect()
}

/// Extremes of `|g(x+t) - g(x)| / |g(x) - g(x-t)|` over random dyadic samples.
pub fn quasisymmetry_probe(state: &SnowflakeState, samples: usize, seed: u64) -> QuasisymmetryProbe {
    quasisymmetry_probe_at(state, &quasisymmetry_samples(samples, seed))
}

/// The same extremes over given samples; arguments wrap around the curve.
pub fn quasisymmetry_probe_at(state: &SnowflakeState, samples: &[(f64, f64)]) -> QuasisymmetryProbe {
    let ratios = map_slice(samples, Parallelism::default(), |&(x, t)| {
        let gx = eval_g(state, x);
        let fwd = eval_g(state, x + t).dist(gx);
        let back = gx.dist(eval_g(state, x - t));
        let side = x.rem_euclid(PERIMETER).floor();
        let same_side = x - t >= side && x + t <= side + 1.0;
        (fwd / back, same_side)
    });
    let mut probe = QuasisymmetryProbe {
        samples: samples.len(),
        max_ratio: 0.0,
        min_ratio: f64::INFINITY,
        same_side_samples: 0,
        same_side_max: 0.0,
        same_side_min: f64::INFINITY,
    };
    for (r, same) in ratios {
        probe.max_ratio = probe.max_ratio.max(r);
        probe.min_ratio = probe.min_ratio.min(r);
        if same {
            probe.same_side_samples += 1;
            probe.same_side_max = probe.same_side_max.max(r);
            probe.same_side_min = probe.same_side_min.min(r);
        }
    }
    probe
}

/// Whether the vertices of `S_n` are pairwise distinct, i.e. `g_n` is
/// injective on the endpoints of its parameter intervals.
pub fn vertices_distinct(state: &SnowflakeState) -> bool {
    let mut v = state.polygon();
    let n = v.len();
    v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    v.dedup();
    v.len() == n
}

/// A node `(level, index)` of the parameter-interval tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl NodeId {
    fn is_ancestor_of(&self, other: &NodeId) -> bool {
        self.level <= other.level && other.index >> (2 * (other.level - self.level)) == self.index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimDiagnostic {
    /// `N = |c(τ(I_1)) - c(τ(I_2))|`.
    pub n: usize,
    /// `ℓ(g(I_1)) / ℓ(g(I_2))` from the segment-length formula.
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub within_bounds: bool,
    /// `2 + ln(C K) / ln(1/(1/2 - x))` with `K` the measured neighbour
    /// comparability of parameter lengths.
    pub n_bound: f64,
}

/// Largest length ratio between adjacent parameter intervals of one level.
pub fn neighbor_comparability(state: &SnowflakeState) -> f64 {
    state
        .levels
        .iter()
        .flat_map(|level| {
            (0..level.len()).map(move |i| {
                let (a, b) = (level[i].param.length(), level[(i + 1) % level.len()].param.length());
                (a / b).max(b / a)
            })
        })
        .fold(1.0, f64::max)
}

fn circular_gap(a: &ParamInterval, b: &ParamInterval) -> f64 {
    let fwd = (b.start - a.end).rem_euclid(PERIMETER);
    let back = (a.start - b.end).rem_euclid(PERIMETER);
    fwd.min(back)
}

pub fn claim_check(state: &SnowflakeState, i1: NodeId, i2: NodeId, c: f64) -> Result<ClaimDiagnostic> {
    claim_check_with(state, i1, i2, c, neighbor_comparability(state))
}

/// [`claim_check`] with a precomputed [`neighbor_comparability`].
pub fn claim_check_with(
    state: &SnowflakeState,
    i1: NodeId,
    i2: NodeId,
    c: f64,
    comparability: f64,
) -> Result<ClaimDiagnostic> {
    let node = |id: NodeId| {
        state
            .levels
            .get(id.level)
            .and_then(|l| l.get(id.index))
            .ok_or_else(|| Error::PreconditionViolated(format!("no interval {id:?}")))
    };
    let (p1, p2) = (&node(i1)?.param, &node(i2)?.param);
    if !(c >= 1.0) {
        return Err(Error::PreconditionViolated(format!("comparability constant {c} below 1")));
    }
    if i1.is_ancestor_of(&i2) || i2.is_ancestor_of(&i1) {
        return Err(Error::PreconditionViolated("intervals are nested".into()));
    }
    let (l1, l2) = (p1.length(), p2.length());
    if l2 < l1 / c || l2 > c * l1 {
        return Err(Error::PreconditionViolated(format!(
            "lengths {l1} and {l2} not comparable within {c}"
        )));
    }
    if circular_gap(p1, p2) > c * l1 {
        return Err(Error::PreconditionViolated("intervals too far apart".into()));
    }
    let ex = state.spec.exponents();
    let (_, _, c1) = word_counts(&p1.word)?;
    let (_, _, c2) = word_counts(&p2.word)?;
    let n = c1.abs_diff(c2);
    let ratio = state.spec.segment_length_formula(&p1.word)?
        / state.spec.segment_length_formula(&p2.word)?;
    let eta_n = ex.eta.powi(n as i32);
    let slack = 1e-12;
    let lower = eta_n * c.powf(-ex.alpha) * (1.0 - slack);
    let upper = c.powf(ex.alpha) / eta_n * (1.0 + slack);
    let n_bound = 2.0 + (c * comparability).ln() / (1.0 / (0.5 - ex.x)).ln();
    Ok(ClaimDiagnostic {
        n,
        ratio,
        lower,
        upper,
        within_bounds: lower <= ratio && ratio <= upper,
        n_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSummary {
    pub pairs: usize,
    pub comparability_constant: f64,
    pub neighbor_comparability: f64,
    pub max_n: usize,
    pub n_bound: f64,
    pub ratio_violations: usize,
    pub n_bound_violations: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Runs [`claim_check`] on `pairs` random conforming pairs.
pub fn claim_sample(state: &SnowflakeState, pairs: usize, c: f64, seed: u64) -> ClaimSummary {
    let k = neighbor_comparability(state);
    let n = state.generation();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = ClaimSummary {
        pairs: 0,
        comparability_constant: c,
        neighbor_comparability: k,
        max_n: 0,
        n_bound: f64::NAN,
        ratio_violations: 0,
        n_bound_violations: 0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
    };
    let mut attempts = 0;
    while summary.pairs < pairs && attempts < 1000 * pairs.max(1) {
        attempts += 1;
        let level = rng.gen_range(1..=n.max(1)).min(n);
        let i1 = NodeId {
            level,
            index: rng.gen_range(0..state.levels[level].len()),
        };
        let p1 = &state.levels[level][i1.index].param;
        let l1 = p1.length();
        let offset = rng.gen::<f64>() * c * l1;
        let u = if rng.gen_bool(0.5) {
            p1.end + offset
        } else {
            p1.start - offset
        }
        .rem_euclid(PERIMETER);
        let Some(i2) = pick_partner(state, &mut rng, u, l1, c) else { continue };
        let Ok(d) = claim_check_with(state, i1, i2, c, k) else { continue };
        summary.pairs += 1;
        summary.max_n = summary.max_n.max(d.n);
        summary.n_bound = d.n_bound;
        summary.min_ratio = summary.min_ratio.min(d.ratio);
        summary.max_ratio = summary.max_ratio.max(d.ratio);
        if !d.within_bounds {
            summary.ratio_violations += 1;
        }
        if d.n as f64 > d.n_bound {
            summary.n_bound_violations += 1;
        }
    }
    summary
}

/// A node containing `u` whose length is within a factor `c` of `l1`.
fn pick_partner(state: &SnowflakeState, rng: &mut ChaCha8Rng, u: f64, l1: f64, c: f64) -> Option<NodeId> {
    let mut id = NodeId {
        level: 0,
        index: (u.floor() as usize).min(3),
    };
    loop {
        let len = state.levels[id.level][id.index].param.length();
        if len <= c * l1 {
            break;
        }
        id = child_containing(state, id, u)?;
    }
    // Optionally descend further while the length stays comparable.
    while rng.gen_bool(0.5) {
        let Some(next) = child_containing(state, id, u) else { break };
        if state.levels[next.level][next.index].param.length() < l1 / c {
            break;
        }
        id = next;
    }
    let len = state.levels[id.level][id.index].param.length();
    (len >= l1 / c).then_some(id)
}

fn child_containing(state: &SnowflakeState, id: NodeId, u: f64) -> Option<NodeId> {
    let level = state.levels.get(id.level + 1)?;
    (4 * id.index..4 * id.index + 4)
        .find(|&j| level[j].param.start <= u && u < level[j].param.end)
        .or(Some(4 * id.index + 3))
        .map(|index| NodeId {
            level: id.level + 1,
            index,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub segments: usize,
    pub intersections: usize,
    /// First offending pair of segment indices, if any.
    pub first: Option<(usize, usize)>,
}

impl SimplicityReport {
    pub fn is_simple(&self) -> bool {
        self.intersections == 0
    }
}

/// Checks that `S_n` has no self-intersections with a sweep over `x`.
pub fn simplicity_check(state: &SnowflakeState) -> SimplicityReport {
    let segs: Vec<(Point, Point)> = state
        .pieces()
        .iter()
        .map(|p| (p.segment.start, p.segment.end))
        .collect();
    let n = segs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |i: usize| segs[i].0.x.min(segs[i].1.x);
    let xmax = |i: usize| segs[i].0.x.max(segs[i].1.x);
    order.sort_by(|&a, &b| xmin(a).total_cmp(&xmin(b)).then(a.cmp(&b)));
    let mut active: Vec<usize> = Vec::new();
    let mut report = SimplicityReport {
        segments: n,
        intersections: 0,
        first: None,
    };
    for &i in &order {
        let x0 = xmin(i);
        active.retain(|&j| xmax(j) >= x0);
        for &j in &active {
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            let hit = if adjacent {
                adjacent_overlap(segs[i], segs[j])
            } else {
                segments_touch(segs[i], segs[j])
            };
            if hit {
                report.intersections += 1;
                report.first.get_or_insert((i.min(j), i.max(j)));
            }
        }
        active.push(i);
    }
    report
}

fn on_segment(p: Point, q: Point, r: Point) -> bool {
    q.x >= p.x.min(r.x) && q.x <= p.x.max(r.x) && q.y >= p.y.min(r.y) && q.y <= p.y.max(r.y)
}

fn segments_touch((a, b): (Point, Point), (c, d): (Point, Point)) -> bool {
    let (o1, o2) = (orient2d(a, b, c), orient2d(a, b, d));
    let (o3, o4) = (orient2d(c, d, a), orient2d(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, c, b))
        || (o2 == 0.0 && on_segment(a, d, b))
        || (o3 == 0.0 && on_segment(c, a, d))
        || (o4 == 0.0 && on_segment(c, b, d))
}

/// Consecutive segments share one endpoint; they fail only by folding back
/// onto each other.
fn adjacent_overlap((a, b): (Point, Point), (c, d): (Point, Point)) -> bool {
    let (shared, u, v) = if b == c {
        (b, a, d)
    } else if d == a {
        (a, b, c)
    } else {
        return segments_touch((a, b), (c, d));
    };
    let (du, dv) = (u - shared, v - shared);
    du.cross(dv) == 0.0 && du.dot(dv) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, oracle: ChoiceOracle) -> SnowflakeSpec {
        SnowflakeSpec::new(p, oracle).unwrap()
    }

    #[test]
    fn exponents() {
        let e = derive_exponents(0.25).unwrap();
        assert_eq!((e.alpha, e.x, e.eta), (1.0, 0.25, 1.0));
        let e = derive_exponents(1.0 / 3.0).unwrap();
        assert!((e.alpha - 3f64.ln() / 4f64.ln()).abs() < 1e-15);
        assert!((0.25f64.powf(e.alpha) - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.x.powf(e.alpha) - 0.25).abs() < 1e-15);
        assert!((e.x - 0.173894).abs() < 1e-6);
        assert!(e.eta < 1.0);
        assert!((derive_exponents(0.49).unwrap().alpha - 0.514573).abs() < 1e-6);
        assert!(derive_exponents(0.5).is_err());
        assert!(derive_exponents(0.2).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(word_counts("").unwrap(), (0, 0, 0));
        assert_eq!(word_counts("ABCA").unwrap(), (2, 1, 1));
        assert_eq!(word_counts("CCC").unwrap(), (0, 0, 3));
        assert!(matches!(word_counts("AD"), Err(Error::InvalidLetter('D'))));
    }

    #[test]
    fn koch_generator() {
        let base = Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), String::new());
        let kids = generator_bump(1.0 / 3.0, &base).unwrap();
        assert!((kids[1].end.y + 3f64.sqrt() / 6.0).abs() < 1e-15);
        for k in &kids {
            assert!((k.length() - 1.0 / 3.0).abs() < 1e-15);
        }
        let flat = generator_bump(0.25, &base).unwrap();
        assert!(flat.iter().all(|k| k.end.y == 0.0 && k.length() == 0.25));
    }

    #[test]
    fn bump_points_outward() {
        let s = SnowflakeState::build(spec(1.0 / 3.0, ChoiceOracle::AllBump), 1).unwrap();
        // bottom side bumps below the square, right side to the right
        assert!(s.pieces()[1].segment.end.y < 0.0);
        assert!(s.pieces()[5].segment.end.x > 1.0);
    }

    #[test]
    fn mixed_word_lengths() {
        let sp = spec(1.0 / 3.0, ChoiceOracle::AllBump);
        let x = sp.exponents().x;
        assert!((sp.param_length_formula("AC").unwrap() - 0.25 * (0.5 - x)).abs() < 1e-16);
        assert!((sp.segment_length_formula("AC").unwrap() - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn flat_state_is_isometric() {
        let s = SnowflakeState::build(spec(0.25, ChoiceOracle::AllStraight), 4).unwrap();
        assert_eq!(s.polygon().len(), 4 * 256);
        for k in 0..400 {
            let t = k as f64 / 100.0;
            let side = (t.floor() as usize).min(3);
            let f = t - side as f64;
            let expected = [
                Point::new(f, 0.0),
                Point::new(1.0, f),
                Point::new(1.0 - f, 1.0),
                Point::new(0.0, 1.0 - f),
            ][side];
            assert!(eval_g(&s, t).dist(expected) < 1e-15);
        }
        assert_eq!(eval_g(&s, 0.0), Point::new(0.0, 0.0));
        let h = holder_estimate(&s);
        assert_eq!(h.constant, 1.0);
    }

    #[test]
    fn bump_top_is_child_junction() {
        let s = SnowflakeState::build(spec(1.0 / 3.0, ChoiceOracle::AllBump), 3).unwrap();
        let g = eval_g(&s, 0.5);
        assert!(g.dist(Point::new(0.5, -3f64.sqrt() / 6.0)) < 1e-15);
        assert_eq!(eval_g(&s, 0.0), Point::new(0.0, 0.0));
    }

    #[test]
    fn eta_single_letter() {
        let sp = spec(1.0 / 3.0, ChoiceOracle::AllStraight);
        let s = SnowflakeState::build(sp.clone(), 1).unwrap();
        let ex = sp.exponents();
        let c_piece = s.pieces().iter().find(|p| p.param.word == "C").unwrap();
        let ratio = c_piece.segment.length() / c_piece.param.length().powf(ex.alpha);
        assert!((ratio - ex.eta).abs() < 1e-14);
        assert!(eta_identity_check(&s).max_residual < 1e-14);
    }

    #[test]
    fn oracle_is_pure() {
        let o = ChoiceOracle::Seeded {
            seed: 3,
            bump_probability: 0.5,
        };
        let picks: Vec<Choice> = ["", "A", "AB", "CC", "BCA"].iter().map(|w| o.choose(w)).collect();
        let again: Vec<Choice> = ["", "A", "AB", "CC", "BCA"].iter().map(|w| o.choose(w)).collect();
        assert_eq!(picks, again);
        let alt = ChoiceOracle::Alternating { start: Choice::Bump };
        assert_eq!(alt.choose("A"), Choice::Straight);
        assert_eq!(alt.choose("AB"), Choice::Bump);
    }

    #[test]
    fn hull_and_diameter() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(1.0, -3.0),
            Point::new(0.5, 0.0),
        ];
        let h = convex_hull(pts);
        assert_eq!(h.len(), 4);
        assert!(hull_diameter(&h) == 3.5);
        let line = convex_hull(vec![Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(1.0, 0.0)]);
        assert_eq!(hull_diameter(&line), 1.0);
    }

    #[test]
    fn symmetric_probe_about_side_midpoint() {
        let s = SnowflakeState::build(spec(1.0 / 3.0, ChoiceOracle::AllBump), 5).unwrap();
        let samples: Vec<(f64, f64)> = (1..=8).map(|k| (2.5, k as f64 / 16.0)).collect();
        let q = quasisymmetry_probe_at(&s, &samples);
        assert!((q.max_ratio - 1.0).abs() < 1e-12 && (q.min_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_probe_is_exact_on_sides() {
        let s = SnowflakeState::build(spec(0.25, ChoiceOracle::AllStraight), 6).unwrap();
        let q = quasisymmetry_probe(&s, 2000, 1);
        assert!(q.same_side_samples > 500);
        assert_eq!((q.same_side_min, q.same_side_max), (1.0, 1.0));
        assert!(vertices_distinct(&s));
    }

    #[test]
    fn claim_preconditions() {
        let s = SnowflakeState::build(spec(1.0 / 3.0, ChoiceOracle::AllBump), 3).unwrap();
        let a = NodeId { level: 2, index: 5 };
        let b = NodeId { level: 2, index: 6 };
        let d = claim_check(&s, a, b, 4.0).unwrap();
        assert_eq!(d.n, 0);
        assert_eq!(d.ratio, 1.0);
        assert!(claim_check(&s, NodeId { level: 1, index: 1 }, a, 4.0).is_err());
        let far = NodeId { level: 3, index: 200 };
        assert!(claim_check(&s, a, far, 4.0).is_err());
    }

    #[test]
    fn small_curves_are_simple() {
        for p in [0.25, 1.0 / 3.0, 0.45] {
            let s = SnowflakeState::build(spec(p, ChoiceOracle::AllBump), 3).unwrap();
            assert!(simplicity_check(&s).is_simple(), "p = {p}");
        }
    }
}
