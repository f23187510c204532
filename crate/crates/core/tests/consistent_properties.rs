mod common;

use common::*;

use proptest::prelude::*;
use visilin_core::consistent::{self, ConsistentParam};
use visilin_core::ensembles::pe_input_from;
use visilin_core::estimators;
use visilin_core::identifiability as ident;
use visilin_core::lti::{Experiment, LtiSystem};
use visilin_core::visibility::{self, DEFAULT_RTOL};

fn partially_visible(seed: u64) -> (LtiSystem, nalgebra::DVector<f64>, usize) {
    let mut r = rng(seed);
    let n = 3 + (seed as usize % 3);
    let k = 1 + (seed as usize % (n - 1));
    let (sys, x0) = planted_dense(n, k, 1 + (seed as usize % 2), false, &mut r);
    (sys, x0, k)
}

#[test]
fn sampled_members_reproduce_every_experiment_from_x0() {
    for seed in 0..200 {
        let (sys, x0, _) = partially_visible(seed);
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL).unwrap();
        // Unstable invisible blocks amplify roundoff leakage out of V; a
        // moderate scale keeps that growth far below the threshold.
        let member = consistent::sample_consistent(&sys, &x0, 0.5, seed).unwrap();
        assert_eq!(member.b(), sys.b());
        let vis =
            estimators::ree_vis(sys.a(), sys.b(), member.a(), member.b(), &sub.basis).unwrap();
        assert!(vis < 1e-10, "seed {seed}: {vis:e}");
        let mut r = rng(10_000 + seed);
        for _ in 0..10 {
            let u = pe_input_from(sys.m(), 80, &mut r).unwrap();
            let exp = Experiment::new(x0.clone(), u, 0.1).unwrap();
            let res = consistent::consistency_residual(&sys, &member, &exp).unwrap();
            assert!(res < 1e-8, "seed {seed}: residual {res:e}");
        }
    }
}

#[test]
fn any_two_members_share_the_restriction() {
    for seed in 0..100 {
        let (sys, x0, _) = partially_visible(500 + seed);
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL).unwrap();
        let m1 = consistent::sample_consistent(&sys, &x0, 2.0, 2 * seed).unwrap();
        let m2 = consistent::sample_consistent(&sys, &x0, 2.0, 2 * seed + 1).unwrap();
        let (a1, b1) = visibility::restrict(&m1, &sub.basis).unwrap();
        let (a2, b2) = visibility::restrict(&m2, &sub.basis).unwrap();
        assert!((a1 - a2).amax() <= 1e-10);
        assert_eq!(b1, b2);
        assert_eq!(m1.b(), m2.b());
    }
}

/// Perturbations outside the parametrized family change the response.
#[test]
fn nonconforming_perturbations_are_detected() {
    let mut checked = 0;
    for seed in 0..200 {
        let mut r = rng(20_000 + seed);
        let n = 2 + (seed as usize % 3);
        let k = 1 + (seed as usize % (n - 1));
        let (sys, x0) = planted_dense(n, k, 1, true, &mut r);
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL).unwrap();
        let form = visibility::block_form(&sys, &x0, &sub).unwrap();
        let mut delta_t = gaussian(n, n, &mut r);
        delta_t.view_mut((0, k), (k, n - k)).fill(0.0);
        delta_t.view_mut((k, k), (n - k, n - k)).fill(0.0);
        let size = 10f64.powf(-3.0 + 3.0 * (seed as f64 / 200.0));
        delta_t *= size / delta_t.norm();
        let t = &form.t_matrix;
        let delta = t * delta_t * t.transpose();
        let perturbed = LtiSystem::new(sys.a() + &delta, sys.b().clone()).unwrap();

        let u = pe_input_from(1, 80, &mut r).unwrap();
        let exp = Experiment::new(x0.clone(), u.clone(), 0.1).unwrap();
        let dsys = visilin_core::lti::discretize_zoh(&sys, 0.1).unwrap();
        let traj = visilin_core::lti::simulate_discrete(&dsys, &exp).unwrap();
        assert!(
            ident::trajectory_gramian(&traj, &u, &sub.basis)
                .unwrap()
                .informative,
            "seed {seed}"
        );

        let res = consistent::consistency_residual(&sys, &perturbed, &exp).unwrap();
        assert!(
            res >= 1e-6,
            "seed {seed}: residual {res:e} for |delta| {size:e}"
        );
        checked += 1;
    }
    assert_eq!(checked, 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parametrization_is_injective(seed in any::<u64>()) {
        let (sys, x0, k) = partially_visible(seed);
        let n = sys.n();
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL).unwrap();
        let form = visibility::block_form(&sys, &x0, &sub).unwrap();
        let mut r = rng(seed ^ 0x5eed);
        let p1 = ConsistentParam { theta: gaussian(k, n - k, &mut r), psi: gaussian(n - k, n - k, &mut r) };
        let scale = 10f64.powf(-6.0 + 6.0 * (seed % 1000) as f64 / 1000.0);
        let p2 = ConsistentParam {
            theta: &p1.theta + gaussian(k, n - k, &mut r) * scale,
            psi: &p1.psi + gaussian(n - k, n - k, &mut r) * scale,
        };
        let dist = p1.distance(&p2);
        prop_assume!(dist >= 1e-6);
        let m1 = consistent::member_from_form(&form, sys.b(), &p1).unwrap();
        let m2 = consistent::member_from_form(&form, sys.b(), &p2).unwrap();
        let gap = (m1.a() - m2.a()).norm();
        prop_assert!(gap >= 1e-9 * dist);
        // an orthogonal change of basis preserves the Frobenius distance
        prop_assert!((gap - dist).abs() <= 1e-10 * dist.max(1.0));
        prop_assert_eq!(p1.degrees_of_freedom(), n * (n - k));
    }

    #[test]
    fn truth_is_a_member(seed in any::<u64>()) {
        let (sys, x0, _) = partially_visible(seed);
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL).unwrap();
        let form = visibility::block_form(&sys, &x0, &sub).unwrap();
        let member = consistent::member_from_form(&form, sys.b(), &ConsistentParam::of_truth(&form)).unwrap();
        prop_assert!((member.a() - sys.a()).amax() <= 1e-10 * sys.a().amax().max(1.0));
    }
}
