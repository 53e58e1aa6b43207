//! Boundary data: increasing homeomorphisms of `[-1, 1]` fixing the
//! endpoints, and circle homeomorphisms described by four arc restrictions.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Image-length floor at which the Cantor-type descent stops and interpolates.
const CANTOR_RESOLUTION: f64 = 1e-15;

/// A closed interval `[lo, hi]` of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// A strictly increasing continuous map of `[-1, 1]` onto itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum MonotoneMap {
    Identity,
    /// Piecewise-linear interpolation of a sample table.
    Pwl { knots: Vec<f64>, values: Vec<f64> },
    /// Distribution function of the self-similar binary measure giving each
    /// left dyadic child the fraction `theta` of its parent's mass.
    Cantor { theta: f64 },
    /// `t ↦ sign(t)·|t|^gamma`.
    Power { gamma: f64 },
    /// Applies the maps in order, first to last.
    Compose(Vec<MonotoneMap>),
    /// Restriction of `inner` to `[lo, hi]`, renormalized to `[-1, 1]` on
    /// both sides.
    Window {
        inner: Box<MonotoneMap>,
        lo: f64,
        hi: f64,
    },
}

impl MonotoneMap {
    pub fn identity() -> Self {
        MonotoneMap::Identity
    }

    pub fn pwl(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let map = MonotoneMap::Pwl { knots, values };
        map.validate()?;
        Ok(map)
    }

    pub fn cantor(theta: f64) -> Result<Self> {
        let map = MonotoneMap::Cantor { theta };
        map.validate()?;
        Ok(map)
    }

    pub fn power(gamma: f64) -> Result<Self> {
        let map = MonotoneMap::Power { gamma };
        map.validate()?;
        Ok(map)
    }

    pub fn compose(maps: Vec<MonotoneMap>) -> Result<Self> {
        let map = MonotoneMap::Compose(maps);
        map.validate()?;
        Ok(map)
    }

    pub fn window(inner: MonotoneMap, lo: f64, hi: f64) -> Result<Self> {
        let map = MonotoneMap::Window {
            inner: Box::new(inner),
            lo,
            hi,
        };
        map.validate()?;
        Ok(map)
    }

    /// Checks the homeomorphism invariants of a map built from external data.
    pub fn validate(&self) -> Result<()> {
        match self {
            MonotoneMap::Identity => Ok(()),
            MonotoneMap::Pwl { knots, values } => {
                if knots.len() != values.len() || knots.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "pwl needs matching knot and value arrays of length >= 2".into(),
                    ));
                }
                for (name, arr) in [("knots", knots), ("values", values)] {
                    if arr[0] != -1.0 || arr[arr.len() - 1] != 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "pwl {name} must start at -1 and end at 1"
                        )));
                    }
                    if arr.windows(2).any(|w| !(w[1] > w[0])) {
                        return Err(Error::InvalidParameter(format!(
                            "pwl {name} must be strictly increasing"
                        )));
                    }
                }
                Ok(())
            }
            MonotoneMap::Cantor { theta } => {
                if *theta > 0.0 && *theta < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "cantor mass fraction {theta} must lie in (0, 1)"
                    )))
                }
            }
            MonotoneMap::Power { gamma } => {
                if *gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "power exponent {gamma} must be positive"
                    )))
                }
            }
            MonotoneMap::Compose(maps) => maps.iter().try_for_each(MonotoneMap::validate),
            MonotoneMap::Window { inner, lo, hi } => {
                inner.validate()?;
                if *lo >= -1.0 && *hi <= 1.0 && hi > lo {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "window [{lo}, {hi}] must be a nondegenerate subinterval of [-1, 1]"
                    )))
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain {
                value: t,
                domain: "[-1, 1]",
            });
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        if t == -1.0 || t == 1.0 {
            return t;
        }
        match self {
            MonotoneMap::Identity => t,
            MonotoneMap::Pwl { knots, values } => {
                let i = knots.partition_point(|&k| k <= t).clamp(1, knots.len() - 1);
                let (k0, k1) = (knots[i - 1], knots[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                if t == k0 {
                    v0
                } else {
                    v0 + (v1 - v0) * ((t - k0) / (k1 - k0))
                }
            }
            MonotoneMap::Cantor { theta } => -1.0 + 2.0 * cantor_cdf(*theta, 0.5 * (t + 1.0)),
            MonotoneMap::Power { gamma } => t.signum() * t.abs().powf(*gamma),
            MonotoneMap::Compose(maps) => maps.iter().fold(t, |acc, m| m.eval_unchecked(acc)),
            MonotoneMap::Window { inner, lo, hi } => {
                let a = inner.eval_unchecked(*lo);
                let b = inner.eval_unchecked(*hi);
                let s = lo + 0.5 * (t + 1.0) * (hi - lo);
                (2.0 * (inner.eval_unchecked(s) - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
            }
        }
    }

    /// `[φ(lo), φ(hi)]`.
    pub fn image_interval(&self, interval: Interval) -> Result<Interval> {
        let lo = self.eval(interval.lo)?;
        let hi = self.eval(interval.hi)?;
        Ok(Interval::new(lo, hi))
    }
}

/// Cumulative mass of `[0, u]` under the binary measure on `[0, 1]`.
///
/// At a dyadic `u` the descent stops exactly on a split point; otherwise it
/// stops once the bracket's mass falls below [`CANTOR_RESOLUTION`] and
/// interpolates linearly inside it.
pub(crate) fn cantor_cdf(theta: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut mass_lo, mut width) = (0.0_f64, 1.0_f64);
    loop {
        if u == lo {
            return mass_lo;
        }
        let mid = 0.5 * (lo + hi);
        if u == mid {
            return mass_lo + width * theta;
        }
        if width < CANTOR_RESOLUTION || mid <= lo || mid >= hi {
            return mass_lo + width * ((u - lo) / (hi - lo));
        }
        if u < mid {
            hi = mid;
            width *= theta;
        } else {
            lo = mid;
            mass_lo += width * theta;
            width *= 1.0 - theta;
        }
    }
}

/// A circle homeomorphism, stored as four restrictions to the quarter arcs
/// `[qπ/2, (q+1)π/2]` together with the image angles of the quarter points.
///
/// The lift is `θ ↦ rotation + b_q + (b_{q+1} - b_q)·(φ_q(t) + 1)/2` where `t`
/// is the position of `θ` in quarter `q` rescaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMap {
    pub rotation: f64,
    /// Image angles of `0, π/2, π, 3π/2, 2π` before rotation; `b_0 = 0`,
    /// `b_4 = 2π`, strictly increasing.
    pub breakpoints: [f64; 5],
    pub arcs: [MonotoneMap; 4],
}

impl CircleMap {
    pub fn new(rotation: f64, breakpoints: [f64; 5], arcs: [MonotoneMap; 4]) -> Result<Self> {
        let map = CircleMap {
            rotation,
            breakpoints,
            arcs,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn rotation(angle: f64) -> Self {
        CircleMap {
            rotation: angle,
            breakpoints: [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU],
            arcs: std::array::from_fn(|_| MonotoneMap::Identity),
        }
    }

    /// Maps each quarter arc onto itself (after rotation) through `arcs[q]`.
    pub fn quarter_preserving(rotation: f64, arcs: [MonotoneMap; 4]) -> Result<Self> {
        CircleMap::new(rotation, [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU], arcs)
    }

    /// The map `θ ↦ rotation + π(ψ(θ/π - 1) + 1)` for an increasing `ψ`.
    pub fn from_lift(rotation: f64, psi: MonotoneMap) -> Result<Self> {
        psi.validate()?;
        let mut breakpoints = [0.0; 5];
        for (q, b) in breakpoints.iter_mut().enumerate() {
            *b = PI * (psi.eval(q as f64 / 2.0 - 1.0)? + 1.0);
        }
        let arcs = [0, 1, 2, 3].map(|q| MonotoneMap::Window {
            inner: Box::new(psi.clone()),
            lo: q as f64 / 2.0 - 1.0,
            hi: (q + 1) as f64 / 2.0 - 1.0,
        });
        CircleMap::new(rotation, breakpoints, arcs)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.is_finite() {
            return Err(Error::InvalidParameter("rotation must be finite".into()));
        }
        let b = &self.breakpoints;
        if b[0] != 0.0 || b[4] != TAU || b.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "breakpoints must increase strictly from 0 to 2π".into(),
            ));
        }
        self.arcs.iter().try_for_each(MonotoneMap::validate)
    }

    /// The lifted angle map, satisfying `lift(θ + 2π) = lift(θ) + 2π`.
    pub fn lift(&self, theta: f64) -> f64 {
        let turns = (theta / TAU).floor();
        let reduced = theta - turns * TAU;
        let q = ((reduced / FRAC_PI_2).floor() as usize).min(3);
        let t = ((reduced - q as f64 * FRAC_PI_2) / FRAC_PI_4 - 1.0).clamp(-1.0, 1.0);
        let (b0, b1) = (self.breakpoints[q], self.breakpoints[q + 1]);
        let phi = self.arcs[q].eval_unchecked(t);
        self.rotation + b0 + (b1 - b0) * 0.5 * (phi + 1.0) + turns * TAU
    }

    pub fn eval(&self, theta: f64) -> Point {
        let a = self.lift(theta);
        Point::new(a.cos(), a.sin())
    }

    /// Image angles `(start, end)` of quarter arc `q`.
    pub fn image_arc(&self, q: usize) -> (f64, f64) {
        (
            self.rotation + self.breakpoints[q],
            self.rotation + self.breakpoints[q + 1],
        )
    }

    pub fn arc_restriction(&self, q: usize) -> &MonotoneMap {
        &self.arcs[q]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mass-product evaluation at the dyadic point `-1 + 2·num/2^gen`,
    /// written from the binary digits independently of the descent.
    fn mass_product_oracle(theta: f64, num: u64, gen: u32) -> f64 {
        let mut mass = 0.0;
        let mut width = 1.0;
        for level in (0..gen).rev() {
            if (num >> level) & 1 == 1 {
                mass += width * theta;
                width *= 1.0 - theta;
            } else {
                width *= theta;
            }
        }
        -1.0 + 2.0 * mass
    }

    #[test]
    fn documented_values() {
        assert_eq!(MonotoneMap::identity().eval(0.25).unwrap(), 0.25);
        assert_eq!(MonotoneMap::power(3.0).unwrap().eval(-0.5).unwrap(), -0.125);
        let c = MonotoneMap::cantor(1.0 / 3.0).unwrap();
        assert!((c.eval(0.0).unwrap() + 1.0 / 3.0).abs() < 1e-16);
        assert!((c.eval(-0.5).unwrap() + 7.0 / 9.0).abs() < 1e-15);
        let img = c.image_interval(Interval::new(-1.0, 0.0)).unwrap();
        assert_eq!(img.lo, -1.0);
        assert!((img.hi + 1.0 / 3.0).abs() < 1e-16);
        let p = MonotoneMap::power(3.0).unwrap();
        assert_eq!(p.image_interval(Interval::new(0.0, 0.5)).unwrap(), Interval::new(0.0, 0.125));
        assert_eq!(
            MonotoneMap::identity().image_interval(Interval::new(-1.0, 0.0)).unwrap(),
            Interval::new(-1.0, 0.0)
        );
    }

    #[test]
    fn symmetric_cantor_is_identity() {
        let c = MonotoneMap::cantor(0.5).unwrap();
        for i in 0..=1000 {
            let t = -1.0 + 2.0 * i as f64 / 1000.0;
            assert!((c.eval(t).unwrap() - t).abs() < 1e-15);
        }
    }

    #[test]
    fn cantor_matches_mass_products_exactly() {
        for theta in [0.1, 1.0 / 3.0, 0.25, 0.4, 0.77] {
            let c = MonotoneMap::cantor(theta).unwrap();
            for gen in 0..=10u32 {
                for num in 0..=(1u64 << gen) {
                    let t = -1.0 + 2.0 * num as f64 / (1u64 << gen) as f64;
                    let v = c.eval(t).unwrap();
                    let expected = if num == 1u64 << gen {
                        1.0
                    } else {
                        mass_product_oracle(theta, num, gen)
                    };
                    assert_eq!(v, expected, "theta={theta} gen={gen} num={num}");
                }
            }
        }
    }

    #[test]
    fn out_of_domain_and_bad_params() {
        assert!(matches!(
            MonotoneMap::identity().eval(1.5),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(MonotoneMap::identity().eval(f64::NAN).is_err());
        assert!(MonotoneMap::cantor(0.0).is_err());
        assert!(MonotoneMap::cantor(1.0).is_err());
        assert!(MonotoneMap::power(0.0).is_err());
        assert!(MonotoneMap::pwl(vec![-1.0, 0.0, 0.0, 1.0], vec![-1.0, 0.0, 0.5, 1.0]).is_err());
        assert!(MonotoneMap::pwl(vec![-1.0, 0.0, 1.0], vec![-1.0, 0.5, 0.5]).is_err());
        assert!(MonotoneMap::pwl(vec![-1.0, 1.0], vec![-1.0, 1.0]).is_ok());
    }

    #[test]
    fn config_documents_round_trip() {
        let json = r#"{"type":"compose","params":[
            {"type":"cantor","params":{"theta":0.3}},
            {"type":"pwl","params":{"knots":[-1,0,1],"values":[-1,0.5,1]}},
            {"type":"power","params":{"gamma":2}},
            {"type":"identity"}]}"#;
        let m: MonotoneMap = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        let back: MonotoneMap = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        let v = m.eval(0.0).unwrap();
        // cantor: -0.4; pwl: -1 + 1.5·0.6 = -0.1; power: -0.01
        assert!((v + 0.01).abs() < 1e-15);
    }

    #[test]
    fn circle_lift_is_periodic_and_monotone() {
        let psi = MonotoneMap::cantor(0.3).unwrap();
        let cm = CircleMap::from_lift(0.7, psi).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..2000 {
            let th = -TAU + 2.0 * TAU * i as f64 / 2000.0;
            let l = cm.lift(th);
            assert!(l > prev);
            prev = l;
            assert!((cm.lift(th + TAU) - l - TAU).abs() < 1e-12);
        }
        let r = CircleMap::rotation(FRAC_PI_2);
        let p = r.eval(0.0);
        assert!(p.x.abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15);
    }
}
