//! Property tests of the spectral substrate and the variable transforms.

use proptest::prelude::*;
use rotlab::approx::{denormalize_height, normalize_height};
use rotlab::spectral::{dealias, quadrature_inner, sobolev_norm, Spectrum};
use rotlab::{Family, FlowParams, ScalarField, TorusGrid};

fn field_strategy(n: usize) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-10.0..10.0f64, n * n).prop_map(move |values| {
        ScalarField::from_values(TorusGrid::new(n).unwrap(), values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip_is_identity(f in field_strategy(32)) {
        let back = Spectrum::forward(&f).inverse();
        let scale = f.linf_norm().max(1.0);
        let err = back.sub(&f).unwrap().linf_norm() / scale;
        prop_assert!(err <= 1e-12, "relative round-trip error {err:.3e}");
    }

    #[test]
    fn dealias_is_a_projection(f in field_strategy(32)) {
        let once = dealias(&f);
        let twice = dealias(&once);
        let err = twice.sub(&once).unwrap().linf_norm();
        prop_assert!(err <= 1e-12 * f.linf_norm().max(1.0));
    }

    #[test]
    fn parseval_for_dealiased_fields(f in field_strategy(32)) {
        // Band-limited after projection, so the H^0 norm matches the grid
        // quadrature.
        let g = dealias(&f);
        let l2 = sobolev_norm(&g, 0.0).unwrap();
        let quad = quadrature_inner(&g, &g).unwrap();
        let denom = quad.abs().max(1e-12);
        prop_assert!(((l2 * l2 - quad) / denom).abs() <= 1e-10);
    }

    #[test]
    fn sobolev_norms_are_monotone_in_the_index(f in field_strategy(32)) {
        let a = sobolev_norm(&f, 0.5).unwrap();
        let b = sobolev_norm(&f, 2.0).unwrap();
        prop_assert!(b + 1e-12 >= a, "H^2 = {b} < H^0.5 = {a}");
    }

    #[test]
    fn normalization_round_trips_for_non_vacuum_fields(
        raw in field_strategy(16),
        sigma in 0.2..1.0f64,
        gamma in 1.2..2.5f64,
    ) {
        // Squash into (−0.9/σ, ∞) so 1 + σh stays positive.
        let h = raw.map(|v| 0.9 * (v / 10.0) / sigma);
        let params = FlowParams::new(Family::Isentropic, 0.3, sigma, gamma, 16, 0.4).unwrap();
        let p = normalize_height(&h, &params).unwrap();
        let back = denormalize_height(&p, &params);
        let err = back.sub(&h).unwrap().linf_norm();
        prop_assert!(err <= 1e-13 * h.linf_norm().max(1.0), "round trip error {err:.3e}");
    }
}
