//! Property tests for structural invariants of the exact half: convexity
//! of Laplace exponents, inverse consistency, and monotonicity of the
//! first-passage transform.

use proptest::prelude::*;

use cbm_core::mech::{JumpMeasure, LevyMechanism, MechanismPair};
use cbm_core::scale::{first_passage_lt, phi, ScaleEvalConfig};

fn mechanism_strategy() -> impl Strategy<Value = LevyMechanism<f64>> {
    let jumps = prop_oneof![
        Just(JumpMeasure::NoJumps),
        (0.2f64..1.8, 0.05f64..2.0)
            .prop_map(|(beta, c)| JumpMeasure::StableTail { beta, c }),
        (0.1f64..3.0, 0.05f64..1.5)
            .prop_map(|(rate, mean)| JumpMeasure::CompoundExponential { rate, mean }),
        proptest::collection::vec((0.05f64..4.0, 0.05f64..1.0), 1..4)
            .prop_map(JumpMeasure::Atoms),
    ];
    (0.0f64..2.0, -2.0f64..2.0, jumps).prop_filter_map(
        "admissible non-subordinator mechanism",
        |(sigma, gamma, jumps)| LevyMechanism::new(sigma, gamma, jumps).ok(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn psi_vanishes_at_zero_and_is_convex(
        mech in mechanism_strategy(),
        a in 0.01f64..5.0,
        b in 0.01f64..5.0,
    ) {
        prop_assert_eq!(mech.psi(0.0), 0.0);
        let mid = 0.5 * (a + b);
        let chord = 0.5 * (mech.psi(a) + mech.psi(b));
        let scale = 1.0 + mech.psi(a).abs() + mech.psi(b).abs();
        prop_assert!(mech.psi(mid) <= chord + 1e-9 * scale);
    }

    #[test]
    fn psi_second_is_nonnegative(mech in mechanism_strategy(), x in 0.01f64..5.0) {
        prop_assert!(mech.psi_second(x) >= -1e-12);
    }

    #[test]
    fn psi_inverse_is_right_inverse(mech in mechanism_strategy(), t in 0.01f64..10.0) {
        let z = mech.psi_inverse(t, 1e-12).unwrap();
        let back = mech.psi(z);
        prop_assert!(
            (back - t).abs() <= 1e-7 * (1.0 + t),
            "psi(psi_inverse({t})) = {back}"
        );
    }
}

proptest! {
    // scale-function evaluations cost ~ms each; keep the case count low
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn linear_first_passage_in_unit_interval_and_monotone(
        b in 0.3f64..3.0,
        m in 0.3f64..3.0,
        alpha in 0.3f64..3.0,
        x in 0.2f64..4.0,
    ) {
        let pair = MechanismPair::new(
            LevyMechanism::linear_drift(b),
            LevyMechanism::linear_drift(m),
        )
        .unwrap();
        let cfg = ScaleEvalConfig::default();
        let v1 = first_passage_lt(&pair, alpha, 0.0, x, 0.0, &cfg).unwrap();
        let v2 = first_passage_lt(&pair, alpha, 0.0, 2.0 * x, 0.0, &cfg).unwrap();
        prop_assert!(v1 > 0.0 && v1 <= 1.0, "v1 = {v1}");
        prop_assert!(v2 <= v1 * (1.0 + 1e-9), "not monotone: {v2} vs {v1}");
    }

    #[test]
    fn phi_positive_decreasing_with_finite_error_bound(
        // for this pair the representation needs α ≥ Ψ_m(Ψ_b⁻¹(ᾱ)), i.e.
        // α ≥ (1+√(1+4ᾱ))/2; the ranges below stay inside that region
        alpha in 2.2f64..4.0,
        alphabar in 0.0f64..2.0,
        x in 0.2f64..4.0,
    ) {
        let pair = MechanismPair::new(
            LevyMechanism::brownian_square_minus_id(),
            LevyMechanism::identity(),
        )
        .unwrap();
        let cfg = ScaleEvalConfig::default();
        let lo = phi(&pair, alpha, alphabar, x, &cfg).unwrap();
        let hi = phi(&pair, alpha, alphabar, x + 0.5, &cfg).unwrap();
        prop_assert!(lo.value > 0.0 && hi.value > 0.0);
        prop_assert!(lo.abs_error_bound.is_finite());
        prop_assert!(hi.value <= lo.value * (1.0 + 1e-9));
    }
}
