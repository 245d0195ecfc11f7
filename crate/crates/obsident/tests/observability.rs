use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use obsident::observability::{
    admissible_samples, detectability_linear, indistinguishability_probe, linear_observability, orc_generic,
    orc_rank, orc_sampled, Detectability,
};
use obsident::ode::{linspace, SolverOptions, Tolerances};
use obsident::zoo::{by_id, five_class_age, sir_classical, two_compartment, FiveClassAge, MalariaParams, ModelId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sir_det(s: f64, i: f64, beta: f64, n: f64, k: f64) -> f64 {
    -k.powi(4) * beta.powi(4) * s * i.powi(6) / n.powi(5)
}

#[test]
fn five_class_model_is_observable_only_through_the_last_class() {
    let theta = [0.5, 1.2, 0.1, 0.2];
    let a = FiveClassAge::a_matrix(&theta);
    for channel in 0..5 {
        let c = FiveClassAge { channel }.c_matrix();
        let r = linear_observability(&a, &c).unwrap();
        assert_eq!(r.full_rank, channel == 4, "channel {channel}: rank {}", r.numerical_rank);
        assert!(r.numerical_rank <= 5);
    }
}

#[test]
fn orc_on_linear_models_matches_observability_matrix() {
    let theta = [0.5, 1.2, 0.1, 0.2];
    let a = FiveClassAge::a_matrix(&theta);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for channel in 0..5 {
        let e = five_class_age(theta[0], theta[1], theta[2], theta[3], channel).unwrap();
        let linear = linear_observability(&a, &FiveClassAge { channel }.c_matrix()).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..20.0)).collect();
            let r = orc_rank(&e.spec, &x, &theta, false, None).unwrap();
            assert_eq!(r.numerical_rank, linear.numerical_rank);
        }
    }
}

#[test]
fn malaria_reduced_pair_has_rank_one_and_is_detectable() {
    let m = MalariaParams::default();
    let abar = m.a_bar();
    let c = m.c_matrix();
    let r = linear_observability(&abar, &c).unwrap();
    assert_eq!(r.numerical_rank, 1);
    let d = detectability_linear(&abar, &c).unwrap();
    assert_eq!(d.verdict, Detectability::Detectable);
    assert_eq!(d.unobservable_dim, 6);
    let mut found: Vec<f64> = d.eigenvalues.iter().map(|e| e.0).collect();
    found.sort_by(f64::total_cmp);
    let mut expected = vec![-m.mu_s, -m.mu_m];
    for i in 2..5 {
        expected.push(-(m.mu[i] + m.gamma[i]));
    }
    // equal stage rates make -(mu + gamma) a triple, defective eigenvalue; it splits at ~eps^(1/3)
    for ev in expected {
        assert!(found.iter().any(|f| (f - ev).abs() < 1e-4 * ev.abs().max(1.0)), "{ev} not in {found:?}");
    }
}

#[test]
fn sir_augmented_determinant_matches_closed_form() {
    let (s, i, beta, gamma, n, k) = (500.0, 100.0, 1.5, 0.5, 1000.0, 1.0);
    let e = sir_classical(beta, gamma, n, k).unwrap();
    let reduced = e.spec.fix_params(&[(2, n), (3, k)]).unwrap();
    let r = orc_rank(&reduced, &[s, i, beta, gamma], &[], true, None).unwrap();
    assert_eq!(r.stack_order, 3);
    assert!(r.full_rank);
    let det = r.determinant.unwrap();
    let exact = sir_det(s, i, beta, n, k);
    assert!((det - exact).abs() <= 1e-3 * exact.abs(), "{det} vs {exact}");
}

#[test]
fn sir_augmented_determinant_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let n = rng.gen_range(200.0..5000.0);
        let k = rng.gen_range(0.1..1.0);
        let beta = rng.gen_range(0.2..3.0);
        let gamma = rng.gen_range(0.05..1.0);
        let s = rng.gen_range(0.05..0.95) * n;
        let i = rng.gen_range(0.01..1.0) * (n - s);
        let e = sir_classical(beta, gamma, n, k).unwrap();
        let reduced = e.spec.fix_params(&[(2, n), (3, k)]).unwrap();
        let det = orc_rank(&reduced, &[s, i, beta, gamma], &[], true, None).unwrap().determinant.unwrap();
        let exact = sir_det(s, i, beta, n, k);
        assert!((det - exact).abs() <= 1e-3 * exact.abs(), "{det} vs {exact}");
    }
}

#[test]
fn sir_with_unknown_gain_is_rank_deficient_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 1000.0;
    let e = sir_classical(1.5, 0.5, n, 1.0).unwrap();
    let reduced = e.spec.fix_params(&[(2, n)]).unwrap();
    let points: Vec<Vec<f64>> = admissible_samples(&e, &e.default_params, 20, 29)
        .into_iter()
        .map(|x| vec![x[0], x[1], rng.gen_range(0.2..3.0), rng.gen_range(0.05..1.0), rng.gen_range(0.1..1.0)])
        .collect();
    let sampled = orc_sampled(&reduced, &points, &[], true, None).unwrap();
    assert_eq!(sampled.reports.len(), 20);
    assert!(sampled.max_rank < 5, "max rank {}", sampled.max_rank);
    assert!(!sampled.generically_full_rank);
}

#[test]
fn disease_free_state_is_not_observable() {
    let e = sir_classical(1.5, 0.5, 1000.0, 1.0).unwrap();
    let r = orc_rank(&e.spec, &[700.0, 0.0], &e.default_params, false, None).unwrap();
    assert!(!r.full_rank);
}

#[test]
fn classical_sir_is_generically_observable_with_known_parameters() {
    let e = by_id(ModelId::SirClassical);
    let g = orc_generic(&e, &e.default_params, false, None, &[vec![300.0, 50.0]], 1).unwrap();
    assert_eq!(g.reports.len(), 21);
    assert!(g.generically_full_rank);
}

#[test]
fn probes_detect_identical_and_scaled_runs() {
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
    let grid = linspace(0.0, 14.0, 141);
    let opts = SolverOptions::with_tol(Tolerances { rel: 1e-12, abs: 1e-12 });
    let th = e.default_params.clone();
    let p = indistinguishability_probe(&e.spec, (&e.default_x0, &th), (&e.default_x0, &th), &grid, &opts).unwrap();
    assert_eq!(p.gap, 0.0);
    let lam = 2.5;
    let scaled_th = [th[0], th[1], th[2] * lam, th[3] / lam];
    let scaled_x0 = [e.default_x0[0] * lam, e.default_x0[1] * lam];
    let p = indistinguishability_probe(&e.spec, (&e.default_x0, &th), (&scaled_x0, &scaled_th), &grid, &opts).unwrap();
    assert!(p.gap <= 1e-8 * p.output_norm);

    let tc = two_compartment(0.3, 0.7).unwrap();
    let grid = linspace(0.0, 20.0, 201);
    let p = indistinguishability_probe(&tc.spec, (&[1.0, 0.0], &[0.3, 0.7]), (&[1.0, 0.0], &[2.0, 0.7]), &grid, &opts)
        .unwrap();
    assert!(p.gap <= 1e-8 * p.output_norm);
}

fn random_point(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = 1000.0;
    let s = rng.gen_range(0.05..0.95) * n;
    let i = rng.gen_range(0.01..1.0) * (n - s);
    (vec![s, i], vec![rng.gen_range(0.2..3.0), rng.gen_range(0.05..1.0), n, rng.gen_range(0.1..1.0)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rank_is_monotone_in_stack_order(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, th) = random_point(&mut rng);
        let e = sir_classical(th[0], th[1], th[2], th[3]).unwrap();
        let reduced = e.spec.fix_params(&[(2, th[2])]).unwrap();
        let point: Vec<f64> = x.iter().chain(&[th[0], th[1], th[3]]).copied().collect();
        let mut last = 0;
        for order in 0..6 {
            let r = orc_rank(&reduced, &point, &[], true, Some(order)).unwrap();
            prop_assert!(r.numerical_rank >= last);
            prop_assert!(r.numerical_rank <= r.rows.min(r.cols));
            last = r.numerical_rank;
        }
    }

    #[test]
    fn output_scaling_leaves_state_rank_unchanged(seed in 0u64..10_000, c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, th) = random_point(&mut rng);
        let e = sir_classical(th[0], th[1], th[2], th[3]).unwrap();
        let scaled = e.spec.with_output(1, Arc::new(move |_t, x: &[f64], p: &[f64]| DVector::from_vec(vec![c * p[3] * x[1]])), &["cy"]);
        let a = orc_rank(&e.spec, &x, &th, false, None).unwrap();
        let b = orc_rank(&scaled, &x, &th, false, None).unwrap();
        prop_assert_eq!(a.numerical_rank, b.numerical_rank);
    }

    #[test]
    fn null_directions_are_annihilated(entries in proptest::collection::vec(-3.0f64..3.0, 12), rank in 1usize..4) {
        // product of 4x(rank) and (rank)x3 factors has rank at most `rank`
        let l = DMatrix::from_fn(4, rank, |i, j| entries[(i * 3 + j) % 12]);
        let r = DMatrix::from_fn(rank, 3, |i, j| entries[(i + 4 * j + 1) % 12]);
        let m = &l * &r;
        let rep = obsident::observability::rank_report(&m, obsident::observability::DEFAULT_RANK_FACTOR);
        prop_assert!(rep.numerical_rank <= rank);
        for v in &rep.null_directions {
            let mv = &m * DVector::from_column_slice(v);
            prop_assert!(mv.norm() <= 10.0 * rep.tolerance.max(f64::MIN_POSITIVE) + 1e-12 * m.norm());
        }
        if rep.full_rank {
            prop_assert!(rep.condition_number >= 1.0);
        }
    }
}
