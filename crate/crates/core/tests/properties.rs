use proptest::prelude::*;

use homext::disk::assemble_disk_extension;
use homext::energy::{series_bound, EnergyParams};
use homext::extension::in_reference_triangle;
use homext::snowflake::{eta_identity_check, Choice, length_formula_check, simplicity_check, Letter};
use homext::{
    build_extension, check_homeomorphism, eval_g, ChoiceOracle, CircleMap, MonotoneMap, Point, SnowflakeSpec,
    SnowflakeState,
};

fn pwl() -> impl Strategy<Value = MonotoneMap> {
    (1usize..6).prop_flat_map(|n| {
        (prop::collection::vec(0.02f64..1.0, n + 1), prop::collection::vec(0.02f64..1.0, n + 1)).prop_map(
            |(dx, dy)| {
                let cumulative = |d: &[f64]| {
                    let total: f64 = d.iter().sum();
                    let mut acc = 0.0;
                    let mut out = vec![-1.0];
                    for w in &d[..d.len() - 1] {
                        acc += w;
                        out.push(-1.0 + 2.0 * acc / total);
                    }
                    out.push(1.0);
                    out
                };
                MonotoneMap::pwl(cumulative(&dx), cumulative(&dy)).unwrap()
            },
        )
    })
}

fn phi() -> impl Strategy<Value = MonotoneMap> {
    prop_oneof![
        Just(MonotoneMap::identity()),
        pwl(),
        (0.15f64..0.85).prop_map(|t| MonotoneMap::cantor(t).unwrap()),
        (0.5f64..2.5).prop_map(|g| MonotoneMap::power(g).unwrap()),
    ]
}

fn oracle() -> impl Strategy<Value = ChoiceOracle> {
    prop_oneof![
        Just(ChoiceOracle::AllBump),
        Just(ChoiceOracle::AllStraight),
        prop_oneof![Just(Choice::Bump), Just(Choice::Straight)].prop_map(|start| ChoiceOracle::Alternating { start }),
        (any::<u64>(), 0.0f64..=1.0).prop_map(|(seed, bump_probability)| ChoiceOracle::Seeded {
            seed,
            bump_probability
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn meshes_tile_and_stay_injective(phi in phi(), depth in 1u32..8) {
        let mesh = build_extension(&phi, depth).unwrap();
        prop_assert_eq!(mesh.cells().len(), (1usize << (depth + 1)) - 1);
        prop_assert_eq!(mesh.source_cell_area() + mesh.source_residual_area(), 1.0);
        let report = check_homeomorphism(&mesh);
        prop_assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn boundary_trace_is_phi(phi in phi(), depth in 1u32..7, k in 0u32..=128) {
        let mesh = build_extension(&phi, depth).unwrap();
        let t = -1.0 + 2.0 * f64::from(k) / 128.0;
        let image = mesh.eval(Point::new(t, 0.0)).unwrap();
        prop_assert_eq!(image, Point::new(phi.eval(t).unwrap(), 0.0));
    }

    #[test]
    fn eval_maps_into_the_triangle(phi in phi(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let mesh = build_extension(&phi, 6).unwrap();
        let y = v * v;
        let x = (2.0 * u - 1.0) * (1.0 - y);
        let image = mesh.eval(Point::new(x, y)).unwrap();
        prop_assert!(in_reference_triangle(image, 1e-9), "{image:?}");
    }

    #[test]
    fn series_terms_stay_under_majorant(phi in phi(), p in 1.0f64..1.9, beta in 0.0f64..0.5) {
        let params = EnergyParams::new(p, beta).unwrap();
        let bound = series_bound(&phi, params, 10).unwrap();
        prop_assert_eq!(bound.violations, 0);
        prop_assert!(bound.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn snowflake_pieces_partition_the_circle(p in 0.25f64..0.499, oracle in oracle(), gen in 0usize..5) {
        let state = SnowflakeState::build(SnowflakeSpec::new(p, oracle).unwrap(), gen).unwrap();
        let pieces = state.pieces();
        prop_assert_eq!(pieces.len(), 4usize << (2 * gen));
        prop_assert_eq!(pieces[0].param.start, 0.0);
        prop_assert_eq!(pieces[pieces.len() - 1].param.end, 4.0);
        for w in pieces.windows(2) {
            prop_assert_eq!(w[0].param.end, w[1].param.start);
            prop_assert_eq!(w[0].segment.end, w[1].segment.start);
        }
        let lengths = length_formula_check(&state);
        prop_assert!(lengths.max_segment_rel_error <= 1e-12, "{lengths:?}");
        prop_assert!(lengths.max_param_rel_error <= 1e-12, "{lengths:?}");
        let eta = eta_identity_check(&state);
        prop_assert_eq!(eta.violations, 0);
    }

    #[test]
    fn g_interpolates_vertices(p in 0.25f64..0.499, seed in any::<u64>(), gen in 1usize..5) {
        let oracle = ChoiceOracle::Seeded { seed, bump_probability: 0.5 };
        let state = SnowflakeState::build(SnowflakeSpec::new(p, oracle).unwrap(), gen).unwrap();
        let max_stretch = state
            .pieces()
            .iter()
            .map(|p| p.segment.length() / p.param.length())
            .fold(1.0, f64::max);
        for piece in state.pieces() {
            let g = eval_g(&state, piece.param.start);
            prop_assert!(g.dist(piece.segment.start) < 1e-14, "{g:?} vs {:?}", piece.segment.start);
            // Shifting by the period moves t by about one ulp of t + 4, which
            // the steepest piece can stretch.
            let slack = 32.0 * f64::EPSILON * max_stretch;
            let shifted = eval_g(&state, piece.param.start + 4.0);
            prop_assert!(shifted.dist(g) <= slack, "{} > {slack} at {}", shifted.dist(g), piece.param.start);
        }
    }

    #[test]
    fn snowflakes_are_simple(p in 0.25f64..0.49, seed in any::<u64>()) {
        let oracle = ChoiceOracle::Seeded { seed, bump_probability: 0.7 };
        let state = SnowflakeState::build(SnowflakeSpec::new(p, oracle).unwrap(), 4).unwrap();
        let report = simplicity_check(&state);
        prop_assert!(report.is_simple(), "{report:?}");
    }
}

#[test]
fn alternative_straight_letters_keep_the_identity() {
    let mut spec = SnowflakeSpec::new(0.3, ChoiceOracle::Alternating { start: Choice::Bump }).unwrap();
    spec.straight_letters = [Letter::C, Letter::B, Letter::B, Letter::C];
    let state = SnowflakeState::build(spec, 5).unwrap();
    assert_eq!(eta_identity_check(&state).violations, 0);
    assert!(length_formula_check(&state).max_param_rel_error <= 1e-12);
}

#[test]
fn disk_extension_of_quarter_preserving_maps() {
    let arcs = [
        MonotoneMap::identity(),
        MonotoneMap::cantor(0.3).unwrap(),
        MonotoneMap::power(1.5).unwrap(),
        MonotoneMap::pwl(vec![-1.0, 0.2, 1.0], vec![-1.0, -0.4, 1.0]).unwrap(),
    ];
    let circle = CircleMap::quarter_preserving(0.4, arcs).unwrap();
    let disk = assemble_disk_extension(&circle, 6).unwrap();
    assert!(disk.diagnostics().passed(), "{:?}", disk.diagnostics().central);
}
