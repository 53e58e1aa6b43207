//! Shared helpers for the integration tests: random boundary maps and small
//! geometric oracles written independently of the library.

#![allow(dead_code)]

use homext::{MonotoneMap, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random boundary map from the piecewise-linear, Cantor or power family,
/// chosen by `i % 3`.
pub fn random_phi(rng: &mut ChaCha8Rng, i: usize) -> MonotoneMap {
    match i % 3 {
        0 => {
            let n = rng.gen_range(3..9);
            let mut knots: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.95..0.95)).collect();
            let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.95..0.95)).collect();
            knots.sort_by(f64::total_cmp);
            values.sort_by(f64::total_cmp);
            knots.dedup();
            values.truncate(knots.len());
            values.dedup();
            knots.truncate(values.len());
            let knots = [vec![-1.0], knots, vec![1.0]].concat();
            let values = [vec![-1.0], values, vec![1.0]].concat();
            MonotoneMap::pwl(knots, values).unwrap()
        }
        1 => MonotoneMap::cantor(rng.gen_range(0.15..0.85)).unwrap(),
        _ => MonotoneMap::power(rng.gen_range(0.5..2.5)).unwrap(),
    }
}

pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace area of a simple polygon (positive when counterclockwise).
pub fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - a.y * b.x
        })
        .sum();
    twice / 2.0
}

/// Whether two counterclockwise triangles share interior points, by the
/// separating-axis test on their six edge normals. Contact along an edge or
/// at a vertex is not an overlap; `tol` is relative to the edge length.
pub fn interiors_overlap(t1: [Point; 3], t2: [Point; 3], tol: f64) -> bool {
    for (tri, other) in [(t1, t2), (t2, t1)] {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            // every vertex of `other` on the outer side (or on the edge line)
            if other.iter().all(|&p| cross(a, b, p) <= tol * len * len) {
                return false;
            }
        }
    }
    true
}

/// Mean of a slice.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Largest relative deviation from the mean.
pub fn spread_about_mean(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).abs() / m.abs()).fold(0.0, f64::max)
}
