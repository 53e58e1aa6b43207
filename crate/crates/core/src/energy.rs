//! Weighted Sobolev energy `∫_T |DH|^p / (Im H)^{pβ}` of an extension mesh,
//! the per-cell and dyadic-series majorants, and the chain-rule bound for a
//! composition with a Hölder profile.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::MonotoneMap;
use crate::error::{Error, Result};
use crate::extension::{ExtensionMesh, PentagonCell};
use crate::geometry::{operator_norm, weighted_integral_from_values};
use crate::par::{map_range, map_slice, pairwise_sum, Parallelism};
use crate::quadrature::adaptive_triangle;

/// Sobolev exponent `p ∈ [1, 2)` and weight exponent `β` with `pβ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnergyParams")]
pub struct EnergyParams {
    p: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawEnergyParams {
    p: f64,
    beta: f64,
}

impl TryFrom<RawEnergyParams> for EnergyParams {
    type Error = Error;
    fn try_from(raw: RawEnergyParams) -> Result<Self> {
        EnergyParams::new(raw.p, raw.beta)
    }
}

impl EnergyParams {
    pub fn new(p: f64, beta: f64) -> Result<Self> {
        if !(p.is_finite() && beta.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(1.0..2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, 2)")));
        }
        if p * beta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "p·β = {} must be below 1",
                p * beta
            )));
        }
        Ok(EnergyParams { p, beta })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exponent of the weight, `pβ`.
    pub fn weight_exponent(&self) -> f64 {
        self.p * self.beta
    }

    /// Exponent of the image lengths in the series bound, `p(1 - β)`.
    pub fn length_exponent(&self) -> f64 {
        self.p * (1.0 - self.beta)
    }

    pub fn regime(&self) -> Regime {
        if self.length_exponent() >= 1.0 {
            Regime::TotalLength
        } else {
            Regime::Holder
        }
    }
}

/// Which majorant controls the inner sums of the series bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p(1 - β) ≥ 1`: `Σ_k |I'|^{p(1-β)} ≤ (Σ_k |I'|)^{p(1-β)} = 2^{p(1-β)}`.
    TotalLength,
    /// `p(1 - β) < 1`: Hölder's inequality over the `2^j` intervals.
    Holder,
}

/// Exact energy of one cell: the sum over its triangles of
/// `|A|^p ∫_Δ (Im H)^{-pβ} dA`.
pub fn cell_energy(cell: &PentagonCell, params: EnergyParams) -> Result<f64> {
    let s = params.weight_exponent();
    cell.pieces.iter().try_fold(0.0, |acc, piece| {
        let heights = piece.image.vertices().map(|v| v.y);
        let weighted = weighted_integral_from_values(piece.source.area(), heights, s)?;
        Ok(acc + operator_norm(&piece.map).powf(params.p) * weighted)
    })
}

/// `L^{2-p}(|I'_k|^{p(1-β)} + |I'_{k+1}|^{p(1-β)})` with `L` the source
/// interval length; the neighbour term is absent for last cells.
pub fn cell_energy_bound(cell: &PentagonCell, params: EnergyParams) -> f64 {
    let q = params.length_exponent();
    let l = cell.interval.len();
    let own = cell.image_interval.len().powf(q);
    let next = cell.neighbor_image_interval.map_or(0.0, |i| i.len().powf(q));
    l.powf(2.0 - params.p) * (own + next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEnergy {
    pub gen: u32,
    pub cells: usize,
    pub exact_sum: f64,
    /// `2^{-j(2-p)} Σ_k |I'_{k,j}|^{p(1-β)}`.
    pub bound_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCheck {
    pub cells_checked: usize,
    pub rel_tol: f64,
    /// Largest relative gap between the closed form and adaptive quadrature.
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub params: EnergyParams,
    pub depth: u32,
    /// Exact energy of all cells up to the mesh depth.
    pub total: f64,
    pub per_generation: Vec<GenerationEnergy>,
    /// Cumulative totals after each generation.
    pub partial_totals: Vec<f64>,
    /// Geometric tail `g_J r / (1 - r)` with `r = g_J / g_{J-1}`, when the last
    /// two generation sums decrease.
    pub tail_estimate: Option<f64>,
    /// `total + tail_estimate` (equal to `total` without a tail estimate).
    pub extrapolated_total: f64,
    pub quadrature_check: QuadratureCheck,
    pub series_bound_partial: Vec<f64>,
    pub regime: Regime,
    /// Largest `cell_energy / cell_energy_bound` over all cells.
    pub max_cell_bound_ratio: f64,
}

impl EnergyReport {
    /// `total / series partial sum`: the measured domination constant.
    pub fn domination_constant(&self) -> f64 {
        self.total / self.series_bound_partial.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    pub parallelism: Parallelism,
    /// Fraction of cells cross-checked by adaptive quadrature (at least one).
    pub quadrature_fraction: f64,
    pub quadrature_rel_tol: f64,
    pub seed: u64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions {
            parallelism: Parallelism::default(),
            quadrature_fraction: 0.01,
            quadrature_rel_tol: 1e-8,
            seed: 0,
        }
    }
}

pub fn mesh_energy(mesh: &ExtensionMesh, params: EnergyParams) -> Result<EnergyReport> {
    mesh_energy_with(mesh, params, &EnergyOptions::default())
}

pub fn mesh_energy_with(
    mesh: &ExtensionMesh,
    params: EnergyParams,
    options: &EnergyOptions,
) -> Result<EnergyReport> {
    let par = options.parallelism;
    let cells = mesh.cells();
    let energies = map_slice(cells, par, |c| cell_energy(c, params))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let bounds = map_slice(cells, par, |c| cell_energy_bound(c, params));
    let max_cell_bound_ratio = energies
        .iter()
        .zip(&bounds)
        .map(|(e, b)| e / b)
        .fold(0.0, f64::max);

    let q = params.length_exponent();
    let mut per_generation = Vec::with_capacity(mesh.depth() as usize + 1);
    let mut partial_totals = Vec::with_capacity(per_generation.capacity());
    let mut series_bound_partial = Vec::with_capacity(per_generation.capacity());
    let (mut total, mut series) = (0.0, 0.0);
    for gen in 0..=mesh.depth() {
        let start = (1usize << gen) - 1;
        let range = start..start + (1usize << gen);
        let exact_sum = pairwise_sum(&energies[range.clone()]);
        let lengths: Vec<f64> = cells[range]
            .iter()
            .map(|c| c.image_interval.len().powf(q))
            .collect();
        let bound_term = 2f64.powf(-(gen as f64) * (2.0 - params.p)) * pairwise_sum(&lengths);
        total += exact_sum;
        series += bound_term;
        partial_totals.push(total);
        series_bound_partial.push(series);
        per_generation.push(GenerationEnergy {
            gen,
            cells: 1 << gen,
            exact_sum,
            bound_term,
        });
    }
    let tail_estimate = geometric_tail(&per_generation);
    let quadrature_check = quadrature_cross_check(cells, &energies, params, options);
    Ok(EnergyReport {
        params,
        depth: mesh.depth(),
        total,
        per_generation,
        partial_totals,
        tail_estimate,
        extrapolated_total: total + tail_estimate.unwrap_or(0.0),
        quadrature_check,
        series_bound_partial,
        regime: params.regime(),
        max_cell_bound_ratio,
    })
}

fn geometric_tail(gens: &[GenerationEnergy]) -> Option<f64> {
    let [.., prev, last] = gens else { return None };
    let r = last.exact_sum / prev.exact_sum;
    (r > 0.0 && r < 1.0).then(|| last.exact_sum * r / (1.0 - r))
}

fn quadrature_cross_check(
    cells: &[PentagonCell],
    energies: &[f64],
    params: EnergyParams,
    options: &EnergyOptions,
) -> QuadratureCheck {
    let n = cells.len();
    let count = ((n as f64 * options.quadrature_fraction).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut picks = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picks.sort_unstable();
    let s = params.weight_exponent();
    let errors = map_slice(&picks, options.parallelism, |&i| {
        let value: f64 = cells[i]
            .pieces
            .iter()
            .map(|piece| {
                let gain = operator_norm(&piece.map).powf(params.p);
                let q = adaptive_triangle(
                    &piece.source,
                    |z| piece.map.apply(z).y.powf(-s),
                    options.quadrature_rel_tol,
                );
                gain * q.value
            })
            .sum();
        (value - energies[i]).abs() / energies[i].abs()
    });
    QuadratureCheck {
        cells_checked: count,
        rel_tol: options.quadrature_rel_tol,
        max_rel_error: errors.into_iter().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub gen: u32,
    pub term: f64,
    /// The closed majorant of the active regime.
    pub majorant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    pub params: EnergyParams,
    pub regime: Regime,
    pub terms: Vec<SeriesTerm>,
    pub partial_sums: Vec<f64>,
    pub majorant_partial_sums: Vec<f64>,
    /// Sum of the majorant over all generations (finite in both regimes).
    pub majorant_total: f64,
    /// Terms exceeding their majorant by more than a relative `1e-12`.
    pub violations: usize,
}

/// Relative slack when comparing a series term with its majorant; the identity
/// map attains the Hölder majorant with equality.
pub const MAJORANT_SLACK: f64 = 1e-12;

/// Deepest generation accepted by [`series_bound`]; the boundary values of
/// that generation are held in memory.
pub const MAX_SERIES_DEPTH: u32 = 24;

/// Partial sums of `Σ_{j ≤ J} 2^{-j(2-p)} Σ_k |I'_{k,j}|^{p(1-β)}` with the
/// regime majorant evaluated term by term.
pub fn series_bound(phi: &MonotoneMap, params: EnergyParams, depth: u32) -> Result<SeriesBound> {
    series_bound_with(phi, params, depth, Parallelism::default())
}

pub fn series_bound_with(
    phi: &MonotoneMap,
    params: EnergyParams,
    depth: u32,
    par: Parallelism,
) -> Result<SeriesBound> {
    if depth > MAX_SERIES_DEPTH {
        return Err(Error::InvalidParameter(format!(
            "series depth {depth} above {MAX_SERIES_DEPTH}"
        )));
    }
    phi.validate()?;
    let n = 1usize << depth;
    let step = 2f64.powi(1 - depth as i32);
    let values = map_range(n + 1, par, |i| match i {
        0 => Ok(-1.0),
        i if i == n => Ok(1.0),
        i => phi.eval(-1.0 + step * i as f64),
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let q = params.length_exponent();
    let regime = params.regime();
    let majorant_at = |j: f64| match regime {
        Regime::TotalLength => 2f64.powf(-j * (2.0 - params.p)) * 2f64.powf(q),
        Regime::Holder => 2f64.powf(q) * 2f64.powf(-j * (1.0 - params.weight_exponent())),
    };
    let mut terms = Vec::with_capacity(depth as usize + 1);
    let (mut sum, mut maj) = (0.0, 0.0);
    let mut partial_sums = Vec::new();
    let mut majorant_partial_sums = Vec::new();
    let mut violations = 0;
    for gen in 0..=depth {
        let stride = 1usize << (depth - gen);
        let lengths: Vec<f64> = (0..1usize << gen)
            .map(|k| (values[(k + 1) * stride] - values[k * stride]).powf(q))
            .collect();
        let term = 2f64.powf(-(gen as f64) * (2.0 - params.p)) * pairwise_sum(&lengths);
        let majorant = majorant_at(gen as f64);
        if term > majorant * (1.0 + MAJORANT_SLACK) {
            violations += 1;
        }
        sum += term;
        maj += majorant;
        partial_sums.push(sum);
        majorant_partial_sums.push(maj);
        terms.push(SeriesTerm { gen, term, majorant });
    }
    let ratio = match regime {
        Regime::TotalLength => 2f64.powf(-(2.0 - params.p)),
        Regime::Holder => 2f64.powf(-(1.0 - params.weight_exponent())),
    };
    Ok(SeriesBound {
        params,
        regime,
        terms,
        partial_sums,
        majorant_partial_sums,
        majorant_total: majorant_at(0.0) / (1.0 - ratio),
        violations,
    })
}

/// Gradient profile `|DF(x)| ≤ C / (1 - |x|)^{1-α}` of a Hölder map of the disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderProfile {
    pub constant: f64,
    pub alpha: f64,
}

impl HolderProfile {
    pub fn new(constant: f64, alpha: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidParameter(format!("profile constant {constant} must be positive")));
        }
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("α = {alpha} must lie in (1/2, 1]")));
        }
        Ok(HolderProfile { constant, alpha })
    }

    /// Bound on `|DF|` at distance `d` from the boundary.
    pub fn gradient_bound(&self, d: f64) -> f64 {
        self.constant / d.powf(1.0 - self.alpha)
    }

    /// The weight exponent matching this profile, `β = 1 - α`.
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// `C^p · total`: an upper bound for the `p`-energy of `F ∘ H` when `F` obeys
/// `profile` and the report was computed with `β = 1 - α`.
pub fn composition_energy_bound(report: &EnergyReport, profile: HolderProfile) -> Result<f64> {
    if (report.params.beta - profile.beta()).abs() > 1e-12 {
        return Err(Error::ParamMismatch(format!(
            "report has β = {}, profile needs β = 1 - α = {}",
            report.params.beta,
            profile.beta()
        )));
    }
    Ok(profile.constant.powf(report.params.p) * report.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{build_cell, build_extension, DyadicInterval};

    fn params(p: f64, beta: f64) -> EnergyParams {
        EnergyParams::new(p, beta).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(EnergyParams::new(1.0, 1.0).is_err());
        assert!(EnergyParams::new(2.0, 0.0).is_err());
        assert!(EnergyParams::new(0.9, 0.0).is_err());
        assert!(EnergyParams::new(1.5, -3.0).is_ok());
        assert!(serde_json::from_str::<EnergyParams>(r#"{"p":1.0,"beta":1.0}"#).is_err());
        let ok: EnergyParams = serde_json::from_str(r#"{"p":1.5,"beta":0.3}"#).unwrap();
        assert_eq!(ok, params(1.5, 0.3));
    }

    #[test]
    fn identity_top_triangle() {
        let cell = build_cell(DyadicInterval::new(0, 1).unwrap(), &MonotoneMap::identity()).unwrap();
        assert_eq!(cell_energy(&cell, params(1.0, 0.0)).unwrap(), 0.25);
        // ∫ y^{-1/2} over the triangle (0,1), (±1/2, 1/2): width 2(1 - y).
        let e = cell_energy(&cell, params(1.0, 0.5)).unwrap();
        let q = crate::quadrature::adaptive_interval(|y| 2.0 * (1.0 - y) / y.sqrt(), 0.5, 1.0, 1e-14);
        assert!((e - q.value).abs() < 1e-14, "{e} vs {}", q.value);
    }

    #[test]
    fn bound_identity_formula() {
        let id = MonotoneMap::identity();
        for j in 0..6 {
            let cell = build_cell(DyadicInterval::new(j, 1).unwrap(), &id).unwrap();
            let expected = if j == 0 { 4.0 } else { 2.0 * 4f64.powi(1 - j as i32) };
            let got = cell_energy_bound(&cell, params(1.0, 0.0));
            assert!((got - expected).abs() <= 1e-15 * expected, "j={j}: {got} vs {expected}");
        }
    }

    #[test]
    fn identity_series_sums_to_four() {
        let s = series_bound(&MonotoneMap::identity(), params(1.0, 0.0), 20).unwrap();
        assert_eq!(*s.partial_sums.last().unwrap(), 4.0 - 2f64.powi(-19));
        assert!(series_bound(&MonotoneMap::identity(), params(1.0, 0.0), 25).is_err());
        assert_eq!(s.violations, 0);
    }

    #[test]
    fn report_structure() {
        let mesh = build_extension(&MonotoneMap::cantor(0.3).unwrap(), 7).unwrap();
        let r = mesh_energy(&mesh, params(1.5, 0.3)).unwrap();
        assert_eq!(r.per_generation.len(), 8);
        assert!(r.partial_totals.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.per_generation.iter().all(|g| g.exact_sum >= 0.0));
        assert_eq!(r.total, *r.partial_totals.last().unwrap());
        assert!(r.quadrature_check.max_rel_error < 1e-7, "{:?}", r.quadrature_check);
        assert!(r.max_cell_bound_ratio.is_finite());
    }

    #[test]
    fn strategies_agree_bitwise() {
        let mesh = build_extension(&MonotoneMap::power(2.0).unwrap(), 8).unwrap();
        let seq = mesh_energy_with(
            &mesh,
            params(1.2, 0.5),
            &EnergyOptions {
                parallelism: Parallelism::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        let par = mesh_energy(&mesh, params(1.2, 0.5)).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn composition_bound() {
        let mesh = build_extension(&MonotoneMap::identity(), 4).unwrap();
        let r = mesh_energy(&mesh, params(1.0, 0.0)).unwrap();
        let lip = HolderProfile::new(1.0, 1.0).unwrap();
        assert_eq!(composition_energy_bound(&r, lip).unwrap(), r.total);
        let two = HolderProfile::new(2.0, 1.0).unwrap();
        assert_eq!(composition_energy_bound(&r, two).unwrap(), 2.0 * r.total);
        let mismatch = HolderProfile::new(1.0, 0.6).unwrap();
        assert!(matches!(
            composition_energy_bound(&r, mismatch),
            Err(Error::ParamMismatch(_))
        ));
        assert!(HolderProfile::new(1.0, 0.5).is_err());
        let r2 = mesh_energy(&mesh, params(1.9, 0.4)).unwrap();
        assert!(composition_energy_bound(&r2, HolderProfile::new(1.0, 0.6).unwrap()).is_ok());
    }
}
