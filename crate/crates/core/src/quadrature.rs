//! Adaptive quadrature used to cross-check the closed-form energy integrals.
//! Never on the production path of an energy value.

use std::collections::BinaryHeap;

use crate::geometry::{Point, Triangle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

// Dunavant degree-5 rule, barycentric (a, b, b) orbits.
const TRI_CENTROID_W: f64 = 0.225;
const TRI_ORBITS: [(f64, f64, f64); 2] = [
    (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
];

fn triangle_rule<F: Fn(Point) -> f64>(t: &Triangle, f: &F) -> f64 {
    let [p0, p1, p2] = t.vertices();
    let at = |l0: f64, l1: f64, l2: f64| {
        Point::new(
            l0 * p0.x + l1 * p1.x + l2 * p2.x,
            l0 * p0.y + l1 * p1.y + l2 * p2.y,
        )
    };
    let third = 1.0 / 3.0;
    let mut sum = TRI_CENTROID_W * f(at(third, third, third));
    for &(a, b, w) in &TRI_ORBITS {
        sum += w * (f(at(a, b, b)) + f(at(b, a, b)) + f(at(b, b, a)));
    }
    sum * t.area()
}

struct Patch<T> {
    err: f64,
    value: f64,
    region: T,
}

impl<T> PartialEq for Patch<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Patch<T> {}
impl<T> PartialOrd for Patch<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Patch<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_PATCHES: usize = 200_000;

/// Globally adaptive integration over a triangle: the patch with the largest
/// error estimate is split into four until the summed estimate meets
/// `rel_tol · |value|`.
pub fn adaptive_triangle<F: Fn(Point) -> f64>(t: &Triangle, f: F, rel_tol: f64) -> Quadrature {
    let mut evaluations = 0usize;
    let mut refine = |tri: &Triangle, coarse: f64| {
        let kids = tri.subdivide();
        let vals: Vec<f64> = kids.iter().map(|k| triangle_rule(k, &f)).collect();
        evaluations += 28;
        let fine: f64 = vals.iter().sum();
        let err = (fine - coarse).abs();
        (kids, vals, err)
    };
    let coarse = triangle_rule(t, &f);
    let (kids, vals, _) = refine(t, coarse);
    let mut heap = BinaryHeap::new();
    for (k, v) in kids.into_iter().zip(vals) {
        let (_, sub, err) = refine(&k, v);
        heap.push(Patch { err, value: sub.iter().sum(), region: k });
    }
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.err).sum();
        if error <= rel_tol * value.abs() || heap.len() >= MAX_PATCHES || error == 0.0 {
            return Quadrature { value, error, evaluations };
        }
        // Split a batch of the worst patches before re-summing.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            for k in worst.region.subdivide() {
                let coarse = triangle_rule(&k, &f);
                let (_, sub, err) = refine(&k, coarse);
                heap.push(Patch { err, value: sub.iter().sum(), region: k });
            }
        }
    }
}

// Gauss–Kronrod 7/15 nodes on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration on `[a, b]`. Integrable
/// endpoint singularities are handled by repeated bisection; the rule never
/// samples the endpoints.
pub fn adaptive_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Quadrature {
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    heap.push(Patch { err: e, value: v, region: (a, b) });
    let mut evaluations = 15;
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.err).sum();
        if error <= rel_tol * value.abs() || heap.len() >= MAX_PATCHES {
            return Quadrature { value, error, evaluations };
        }
        let worst = heap.pop().expect("nonempty");
        let (lo, hi) = worst.region;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval exhausted at machine resolution; keep it as is.
            heap.push(Patch { err: 0.0, ..worst });
            continue;
        }
        for (l, r) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(&f, l, r);
            evaluations += 15;
            heap.push(Patch { err: e, value: v, region: (l, r) });
        }
    }
}
