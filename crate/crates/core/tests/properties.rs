//! Property tests for the crate-wide invariants.

use misalign_core::misalignment::{
    cone_angles_for_direction, direction_from_cone_angles, pauli_triad, project_to_cone,
    standard_pauli_plan, MeasurementPlan,
};
use misalign_core::quantum::{
    bloch_from_state, fidelity, qubit_fidelity_bloch, state_from_bloch, BlochVector,
};
use misalign_core::tomography::{
    lambda_ball_radius, linear_inversion, simulate_statistics, worst_case_fidelity_single,
};
use proptest::prelude::*;

fn bloch_in_ball() -> impl Strategy<Value = BlochVector> {
    (
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        0.0f64..1.0,
    )
        .prop_filter_map("nonzero direction", |(x, y, z, r)| {
            let v = BlochVector::new(x, y, z);
            v.normalized().map(|u| u.scale(r))
        })
}

fn unit_bloch() -> impl Strategy<Value = BlochVector> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map("nonzero", |(x, y, z)| {
        BlochVector::new(x, y, z).normalized()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // state_from_bloch and bloch_from_state are mutually inverse.
    #[test]
    fn bloch_round_trip(v in bloch_in_ball()) {
        let rho = state_from_bloch(&v).unwrap();
        let back = bloch_from_state(&rho).unwrap();
        prop_assert!(back.sub(&v).norm() < 1e-12);
    }

    // Uhlmann fidelity is symmetric and matches the single-qubit closed form.
    #[test]
    fn fidelity_closed_form_and_symmetry(a in bloch_in_ball(), b in bloch_in_ball()) {
        let ra = state_from_bloch(&a).unwrap();
        let rb = state_from_bloch(&b).unwrap();
        let f_ab = fidelity(&ra, &rb).unwrap();
        let f_ba = fidelity(&rb, &ra).unwrap();
        prop_assert!((f_ab - f_ba).abs() < 1e-9);
        prop_assert!((f_ab - qubit_fidelity_bloch(&a, &b)).abs() < 1e-10);
    }

    // Cone projection lands inside the cone and is idempotent.
    #[test]
    fn cone_projection_invariants(
        v in bloch_in_ball(),
        center in unit_bloch(),
        eps in 1e-3f64..1.5,
    ) {
        prop_assume!(v.norm() > 1e-6);
        let p = project_to_cone(&v, &center, eps).unwrap();
        prop_assert!(p.is_unit(1e-12));
        prop_assert!(p.angle_to(&center) <= eps + 1e-12);
        let pp = project_to_cone(&p, &center, eps).unwrap();
        prop_assert!(pp.sub(&p).norm() < 1e-12);
    }

    // The two-angle chart stays on the sphere and inverts.
    #[test]
    fn cone_chart_round_trip(
        center in unit_bloch(),
        beta in 1e-6f64..3.0,
        phi in -3.0f64..3.0,
    ) {
        let d = direction_from_cone_angles(&center, beta, phi);
        prop_assert!(d.is_unit(1e-12));
        let (b2, _) = cone_angles_for_direction(&center, &d);
        prop_assert!((b2 - beta).abs() < 1e-9);
    }

    // Exact statistics of an aligned plan invert to the same state, and the
    // correlator vector stays inside the lambda ball of its deviation.
    #[test]
    fn exact_inversion_and_lambda_ball(
        t in bloch_in_ball(),
        beta in 0.0f64..0.3,
        phi1 in 0.0f64..6.28,
        phi2 in 0.0f64..6.28,
        phi3 in 0.0f64..6.28,
    ) {
        let tau = state_from_bloch(&t).unwrap();
        let ideal = standard_pauli_plan(1);
        let stats = simulate_statistics(&tau, &ideal).unwrap();
        let rec = linear_inversion(&stats, &ideal).unwrap();
        prop_assert!(rec.rho.trace_distance_to(&tau) < 1e-10);

        let axes = pauli_triad();
        let actual = vec![vec![
            direction_from_cone_angles(&axes[0], beta, phi1),
            direction_from_cone_angles(&axes[1], beta, phi2),
            direction_from_cone_angles(&axes[2], beta, phi3),
        ]];
        let plan = MeasurementPlan::new_local(vec![axes], actual).unwrap();
        let eps = plan.max_angular_deviation();
        let stats = simulate_statistics(&tau, &plan).unwrap();
        let c = stats.correlator_vector().unwrap();
        let c = BlochVector::new(c[0], c[1], c[2]);
        prop_assert!(c.sub(&t).norm() <= t.norm() * lambda_ball_radius(eps) + 1e-12);
    }

    // The worst-case fidelity equals 1 - lambda/2 across its domain.
    #[test]
    fn floor_identity(eps in 0.0f64..0.6) {
        let f = worst_case_fidelity_single(eps);
        prop_assert!((f - (1.0 - lambda_ball_radius(eps) / 2.0)).abs() < 1e-14);
    }
}
