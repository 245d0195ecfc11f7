use std::sync::Arc;

use nalgebra::DVector;
use obsident::ode::{
    finite_diff_jacobian, integrate, integrate_with, lie_stack, lie_stack_with, linspace, LieMethod,
    ModelSpec, SolverOptions, Tolerances,
};
use obsident::zoo::{academic_unobservable, sir_classical, sir_classical_rate, sir_recovered};
use proptest::prelude::*;

const BOARDING: [f64; 14] = [
    1.0, 6.0, 26.0, 73.0, 222.0, 293.0, 258.0, 237.0, 191.0, 124.0, 68.0, 26.0, 10.0, 3.0,
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn boarding_school_sse_at_published_parameters() {
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
    let grid: Vec<f64> = (0..14).map(f64::from).collect();
    let tr = integrate(&e.spec, &[762.0, 1.0], &e.default_params, &grid).unwrap();
    let sse: f64 = tr.output(0).iter().zip(BOARDING).map(|(y, d)| (y - d).powi(2)).sum();
    assert!(rel(sse, 4892.6472) < 0.01, "sse = {sse}");
}

#[test]
fn zero_field_gives_constant_trajectory() {
    let m = ModelSpec::new(
        "zero",
        3,
        1,
        1,
        Arc::new(|_t, x: &[f64], _p: &[f64]| DVector::zeros(x.len())),
        Arc::new(|_t, x: &[f64], _p: &[f64]| DVector::from_vec(vec![x[0]])),
    );
    let x0 = [1.5, -2.0, 7.0];
    let tr = integrate(&m, &x0, &[0.0], &linspace(0.0, 10.0, 11)).unwrap();
    for x in &tr.x {
        assert_eq!(x.as_slice(), &x0);
    }
}

#[test]
fn sir_total_population_is_conserved() {
    let e = sir_recovered(0.4, 0.1, 10000.0).unwrap();
    let tr = e.default_trajectory(241, &SolverOptions::default()).unwrap();
    let total0: f64 = e.default_x0.iter().sum();
    for x in &tr.x {
        assert!(rel(x.sum(), total0) < 1e-8);
    }
}

#[test]
fn outputs_are_recomputed_exactly() {
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 0.7).unwrap();
    let tr = e.default_trajectory(50, &SolverOptions::default()).unwrap();
    assert_eq!(tr.t.len(), tr.x.len());
    assert_eq!(tr.t.len(), tr.y.len());
    for (t, (x, y)) in tr.t.iter().zip(tr.x.iter().zip(&tr.y)) {
        assert_eq!(e.spec.output(*t, x.as_slice(), &e.default_params), *y);
    }
}

#[test]
fn tightening_tolerance_reduces_error() {
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
    let grid = linspace(0.0, 14.0, 15);
    let run = |rtol: f64| {
        let opts = SolverOptions::with_tol(Tolerances { rel: rtol, abs: rtol * 1e-2 });
        integrate_with(&e.spec, &e.default_x0, &e.default_params, &grid, &opts).unwrap()
    };
    let fine = run(1e-13);
    let err = |tr: &obsident::ode::Trajectory| {
        tr.x.iter()
            .zip(&fine.x)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    };
    let mut last = f64::INFINITY;
    for rtol in [1e-5, 1e-6, 1e-7, 1e-8] {
        let e = err(&run(rtol));
        assert!(e < last / 3.0, "rtol {rtol}: {e} vs {last}");
        last = e;
    }
}

#[test]
fn restarting_midway_matches_tail() {
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
    let grid = linspace(0.0, 14.0, 29);
    let full = integrate(&e.spec, &e.default_x0, &e.default_params, &grid).unwrap();
    let tail = integrate(&e.spec, full.x[10].as_slice(), &e.default_params, &grid[10..]).unwrap();
    for (a, b) in tail.x.iter().zip(&full.x[10..]) {
        assert!((a - b).amax() < 1e-6 * 763.0);
    }
}

#[test]
fn sir_jacobian_matches_closed_form() {
    let (beta, gamma, n) = (1.9605032, 0.4751562, 763.0);
    let e = sir_classical(beta, gamma, n, 1.0).unwrap();
    let theta = e.default_params.clone();
    let (s, i) = (762.0, 1.0);
    let fd = finite_diff_jacobian(|x| e.spec.rhs(0.0, x, &theta), &[s, i], e.spec.state_scales()).unwrap();
    let exact = [[-beta * i / n, -beta * s / n], [beta * i / n, beta * s / n - gamma]];
    for r in 0..2 {
        for c in 0..2 {
            assert!((fd[(r, c)] - exact[r][c]).abs() <= 1e-6 * exact[r][c].abs(), "({r},{c})");
        }
    }
}

#[test]
fn first_lie_derivative_of_removal_rate() {
    let (beta, gamma, n) = (0.9, 0.3, 1000.0);
    let e = sir_classical_rate(beta, gamma, n).unwrap();
    let (s, i) = (600.0, 150.0);
    let expected = gamma * (beta * s * i / n - gamma * i);
    for method in [LieMethod::Series, LieMethod::FiniteDifference] {
        let st = lie_stack_with(&e.spec, &[s, i], &e.default_params, 2, false, method, 0.0).unwrap();
        assert_eq!(st.values[0][0], gamma * i);
        assert!(rel(st.values[1][0], expected) < 1e-5, "{method:?}");
        assert_eq!(st.jacobian.nrows(), 3);
        assert_eq!(st.jacobian.ncols(), 2);
    }
}

#[test]
fn constant_output_has_vanishing_derivatives() {
    let e = sir_classical(1.2, 0.3, 500.0, 1.0).unwrap();
    let constant = e.spec.with_output(1, Arc::new(|_t, _x, _p| DVector::from_vec(vec![4.0])), &["c"]);
    let st = lie_stack(&constant, &[300.0, 50.0], &e.default_params, 3, false).unwrap();
    assert_eq!(st.values[0][0], 4.0);
    for v in &st.values[1..] {
        assert!(v[0].abs() < 1e-9);
    }
}

#[test]
fn academic_output_derivatives_are_geometric() {
    let alpha = 0.5;
    let e = academic_unobservable(alpha).unwrap();
    let x = [1.2, -0.7];
    let y = (x[0] * x[0] + x[1] * x[1]) / 2.0;
    let st = lie_stack(&e.spec, &x, &[alpha], 5, false).unwrap();
    for (p, v) in st.values.iter().enumerate() {
        let exact = (-2.0 * alpha).powi(p as i32) * y;
        assert!(rel(v[0], exact) < 1e-4, "order {p}");
    }
}

#[test]
fn augmented_stack_dimensions() {
    let e = sir_classical(1.5, 0.5, 1000.0, 1.0).unwrap();
    let point = [500.0, 100.0, 1.5, 0.5, 1000.0, 1.0];
    let st = lie_stack(&e.spec, &point, &[], 5, true).unwrap();
    assert_eq!(st.values.len(), 6);
    assert_eq!(st.jacobian.shape(), (6, 6));
    assert_eq!(st.values[0][0], 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_and_differences_agree_on_low_orders(
        s in 100.0f64..800.0,
        i in 1.0f64..150.0,
        beta in 0.5f64..2.5,
        gamma in 0.1f64..0.9,
    ) {
        let e = sir_classical(beta, gamma, 1000.0, 1.0).unwrap();
        let a = lie_stack_with(&e.spec, &[s, i], &e.default_params, 2, false, LieMethod::Series, 0.0).unwrap();
        let b = lie_stack_with(&e.spec, &[s, i], &e.default_params, 2, false, LieMethod::FiniteDifference, 0.0).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u[0] - v[0]).abs() <= 1e-5 * (u[0].abs() + 1.0));
        }
    }

    #[test]
    fn integration_is_time_shift_consistent(split in 1usize..13) {
        let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
        let grid = linspace(0.0, 13.0, 14);
        let full = integrate(&e.spec, &e.default_x0, &e.default_params, &grid).unwrap();
        let tail = integrate(&e.spec, full.x[split].as_slice(), &e.default_params, &grid[split..]).unwrap();
        for (a, b) in tail.x.iter().zip(&full.x[split..]) {
            prop_assert!((a - b).amax() < 1e-6 * 763.0);
        }
    }
}
