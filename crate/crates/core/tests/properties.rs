use proptest::prelude::*;

use qmax::dynamics::{evolve, tilde_state, transition_amplitude, EvolvingState, StateKind, System, TimeSpan};
use qmax::harness::{gen_hamiltonian, gen_q_hermitian_observable, GenKind, GenOptions};
use qmax::linalg::{self, c64, mat_exp, norm, CMat, EigOptions, ExpMethod, I};
use qmax::maximizer::{self, MaxFamilyParams};
use qmax::qmetric::{q_adjoint, q_inner, q_normality_residual};
use qmax::{sampling, weakvalue};

fn nonnormal(n: usize, seed: u64, cond: f64) -> System {
    let opts = GenOptions { cond_p_max: cond, ..GenOptions::default() };
    let h = gen_hamiltonian(GenKind::Nonnormal, n, seed, &opts).unwrap();
    System::new(h, 1.0, &EigOptions::default()).unwrap()
}

fn state(sys: &System, seed: u64, stream: u64, t: f64, kind: StateKind) -> EvolvingState {
    let mut rng = sampling::rng(seed, stream);
    EvolvingState::normalized(sampling::gaussian_vec(sys.dim(), &mut rng), t, kind, &sys.metric).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_reconstructs(n in 2usize..7, seed in any::<u64>()) {
        let sys = nonnormal(n, seed, 1e3);
        let d = &sys.decomp;
        let back = &d.p * linalg::diag(&d.eigenvalues) * &d.p_inv;
        prop_assert!(norm(&(back - &sys.h)) <= 1e-9 * norm(&sys.h));
    }

    #[test]
    fn exp_group_law(n in 1usize..6, seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let mut rng = sampling::rng(seed, 0);
        let m = sampling::gaussian_mat(n, &mut rng);
        let es = mat_exp(&(&m * c64::new(s, 0.0)), ExpMethod::ScalingSquaring).unwrap();
        let et = mat_exp(&(&m * c64::new(t, 0.0)), ExpMethod::ScalingSquaring).unwrap();
        let est = mat_exp(&(&m * c64::new(s + t, 0.0)), ExpMethod::ScalingSquaring).unwrap();
        prop_assert!(norm(&(es * et - &est)) <= 1e-11 * (1.0 + norm(&est)));
    }

    #[test]
    fn hermitian_exp_is_unitary(n in 1usize..7, seed in any::<u64>(), t in -5.0f64..5.0) {
        let mut rng = sampling::rng(seed, 0);
        let h = sampling::random_hermitian(n, &mut rng);
        for method in [ExpMethod::Spectral, ExpMethod::ScalingSquaring] {
            let u = mat_exp(&(&h * (-I * t)), method).unwrap();
            prop_assert!(norm(&(u.adjoint() * &u - linalg::identity(n))) <= 1e-12 * (1.0 + norm(&h) * t.abs()));
        }
    }

    #[test]
    fn top_singular_value_is_unitarily_invariant(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed, 0);
        let m = sampling::gaussian_mat(n, &mut rng);
        let u = sampling::haar_unitary(n, &mut rng);
        let v = sampling::haar_unitary(n, &mut rng);
        let a = linalg::svd_max(&m).unwrap().sigma;
        let b = linalg::svd_max(&(&u * &m * &v)).unwrap().sigma;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn q_inner_is_hermitian_and_positive(n in 2usize..7, seed in any::<u64>()) {
        let sys = nonnormal(n, seed, 1e3);
        let mut rng = sampling::rng(seed, 1);
        let u = sampling::gaussian_vec(n, &mut rng);
        let v = sampling::gaussian_vec(n, &mut rng);
        let uv = q_inner(&u, &v, &sys.metric).unwrap();
        let vu = q_inner(&v, &u, &sys.metric).unwrap();
        prop_assert!((uv - vu.conj()).norm() <= 1e-12 * (1.0 + uv.norm()));
        let uu = q_inner(&u, &u, &sys.metric).unwrap();
        prop_assert!(uu.re > 0.0 && uu.im.abs() <= 1e-12 * uu.re);
    }

    #[test]
    fn q_adjoint_moves_across_the_inner_product(n in 2usize..7, seed in any::<u64>()) {
        let sys = nonnormal(n, seed, 1e2);
        let mut rng = sampling::rng(seed, 2);
        let a = sampling::gaussian_mat(n, &mut rng);
        let ad = q_adjoint(&a, &sys.metric).unwrap();
        let u = sampling::gaussian_vec(n, &mut rng);
        let v = sampling::gaussian_vec(n, &mut rng);
        let lhs = q_inner(&u, &(&a * &v), &sys.metric).unwrap();
        let rhs = q_inner(&(&ad * &u), &v, &sys.metric).unwrap();
        let scale = norm(&(&sys.metric.factor * &a * &sys.metric.factor_inv)) * sys.metric.norm_sqr(&u).unwrap().sqrt() * sys.metric.norm_sqr(&v).unwrap().sqrt();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * scale);
    }

    #[test]
    fn hamiltonian_is_q_normal(n in 2usize..8, seed in any::<u64>()) {
        let sys = nonnormal(n, seed, 1e3);
        prop_assert!(q_normality_residual(&sys.h, &sys.metric).unwrap() <= 1e-8);
    }

    #[test]
    fn amplitude_is_time_independent(n in 2usize..7, seed in any::<u64>(), t in 0.0f64..3.0) {
        let sys = nonnormal(n, seed, 1e2);
        let a = state(&sys, seed, 3, 0.0, StateKind::A);
        let b = state(&sys, seed, 4, 2.0, StateKind::B);
        let at_ref = transition_amplitude(&b, &a, &sys, 0.0).unwrap();
        let at_t = transition_amplitude(&b, &a, &sys, t).unwrap();
        prop_assert!((at_ref - at_t).norm() <= 1e-10 * (1.0 + at_ref.norm()));
    }

    #[test]
    fn eigen_components_evolve_independently(n in 2usize..7, seed in any::<u64>(), t in -2.0f64..2.0) {
        let sys = nonnormal(n, seed, 1e2);
        let a = state(&sys, seed, 5, 0.0, StateKind::A);
        let c0 = &sys.decomp.p_inv * &a.ket;
        let ct = &sys.decomp.p_inv * evolve(&a, &sys, t).unwrap().ket;
        for (i, lambda) in sys.decomp.eigenvalues.iter().enumerate() {
            let want = c0[i] * (-I * *lambda * t).exp();
            prop_assert!((ct[i] - want).norm() <= 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn no_pair_beats_the_bound(n in 2usize..7, seed in any::<u64>(), t in 0.5f64..3.0) {
        let sys = nonnormal(n, seed, 1e3);
        let span = TimeSpan::new(0.0, t).unwrap();
        let subset = maximizer::imag_max_subset(&sys.decomp, maximizer::DEFAULT_TOL_BAND);
        let bound = (subset.b * t).exp();
        let a = state(&sys, seed, 6, 0.0, StateKind::A);
        let b = state(&sys, seed, 7, t, StateKind::B);
        let amp = transition_amplitude(&b, &a, &sys, 0.0).unwrap().norm();
        prop_assert!(amp <= bound * (1.0 + 1e-10));
        let best = maximizer::max_random_pair_amplitude(&sys, &span, 50, seed).unwrap();
        prop_assert!(best <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn weak_value_is_linear_in_the_observable(n in 2usize..6, seed in any::<u64>(), x in -3.0f64..3.0) {
        let sys = nonnormal(n, seed, 1e2);
        let span = TimeSpan::new(0.0, 1.0).unwrap();
        let subset = maximizer::imag_max_subset(&sys.decomp, maximizer::DEFAULT_TOL_BAND);
        let r = maximizer::analytic_max_pair(&sys, &span, &MaxFamilyParams::uniform(&subset), maximizer::DEFAULT_TOL_BAND).unwrap();
        let o1 = gen_q_hermitian_observable(&sys.metric, n, seed).unwrap();
        let o2 = gen_q_hermitian_observable(&sys.metric, n, seed ^ 1).unwrap();
        let combo: CMat = &o1 * c64::new(x, 0.0) + &o2;
        let w = |o: &CMat| weakvalue::normalized_matrix_element(o, &r.b_state, &r.a_state, &sys, 0.4).unwrap();
        let lhs = w(&combo);
        let rhs = w(&o1) * x + w(&o2);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn tilde_state_keeps_its_q_norm(n in 2usize..7, seed in any::<u64>(), t in 0.0f64..4.0) {
        let sys = nonnormal(n, seed, 1e3);
        let a = state(&sys, seed, 8, 0.0, StateKind::A);
        let tilde = tilde_state(&a, &sys, t).unwrap();
        prop_assert!((tilde.q_norm_at_ref - 1.0).abs() <= 1e-9);
    }
}
