use nalgebra::DMatrix;
use obsident::ode::{integrate_with, lie_stack, linspace, SolverOptions, Tolerances};
use obsident::zoo::{
    by_id, sir_classical, sir_classical_rate, sir_cumulative, two_compartment, ModelId, ZooEntry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_entries() -> Vec<ZooEntry> {
    let mut v: Vec<ZooEntry> = ModelId::ALL.iter().map(|id| by_id(*id)).collect();
    v.push(sir_classical_rate(1.2, 0.4, 1000.0).unwrap());
    v
}

fn tight() -> SolverOptions {
    SolverOptions::with_tol(Tolerances { rel: 1e-12, abs: 1e-12 })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest entry-wise gap, measured against the largest entry of each column.
fn column_relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        let scale = a.column(j).amax().max(b.column(j).amax());
        if scale == 0.0 {
            continue;
        }
        worst = worst.max((a.column(j) - b.column(j)).amax() / scale);
    }
    worst
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for e in all_entries() {
        assert!(e.spec.has_analytic_jacobians(), "{}", e.id);
        let theta = &e.default_params;
        for _ in 0..100 {
            let x = e.sample_state(&mut rng, theta);
            assert!(e.is_admissible(&x, theta));
            let t = rng.gen_range(0.0..e.horizon);
            let pairs = [
                (e.spec.jac_x(t, &x, theta).unwrap(), e.spec.fd_jac_x(t, &x, theta).unwrap()),
                (e.spec.jac_theta(t, &x, theta).unwrap(), e.spec.fd_jac_theta(t, &x, theta).unwrap()),
            ];
            for (a, f) in &pairs {
                let gap = column_relative_gap(a, f);
                assert!(gap <= 1e-5, "{}: gap {gap}", e.spec.name());
            }
            let hx = e.spec.output_jac_x(t, &x, theta).unwrap();
            assert_eq!(hx.shape(), (e.spec.n_outputs(), e.spec.n_states()));
        }
    }
}

#[test]
fn default_trajectories_stay_admissible() {
    for e in all_entries() {
        let tr = e.default_trajectory(201, &SolverOptions::default()).unwrap();
        for x in &tr.x {
            assert!(e.is_admissible(x.as_slice(), &e.default_params), "{}", e.id);
        }
    }
}

#[test]
fn nonnegative_orthant_is_forward_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for e in all_entries().into_iter().filter(|e| e.id != ModelId::Academic) {
        let grid = linspace(0.0, e.horizon, 401);
        for _ in 0..10 {
            let x0 = e.sample_state(&mut rng, &e.default_params);
            let tr = integrate_with(&e.spec, &x0, &e.default_params, &grid, &SolverOptions::default()).unwrap();
            let low = tr.x.iter().flat_map(|x| x.iter().copied()).fold(f64::INFINITY, f64::min);
            assert!(low >= -1e-9, "{}: {low}", e.id);
        }
    }
}

#[test]
fn population_is_constant_with_balanced_renewal() {
    for id in [ModelId::SirDemography, ModelId::SirFluctuating] {
        let e = by_id(id);
        let n = e.default_x0.iter().sum::<f64>();
        let tr = e.default_trajectory(401, &SolverOptions::default()).unwrap();
        for x in &tr.x {
            assert!((x.sum() - n).abs() <= 1e-8 * n, "{id}");
        }
    }
}

fn scaled_gap(e: &ZooEntry, lambda: f64) -> (f64, f64) {
    let (beta, gamma, n, k) = (e.default_params[0], e.default_params[1], e.default_params[2], e.default_params[3]);
    let grid = linspace(0.0, e.horizon, 141);
    let base = integrate_with(&e.spec, &e.default_x0, &e.default_params, &grid, &tight()).unwrap();
    let x0s: Vec<f64> = e.default_x0.iter().map(|v| v * lambda).collect();
    let scaled = integrate_with(&e.spec, &x0s, &[beta, gamma, lambda * n, k / lambda], &grid, &tight()).unwrap();
    let a = base.output(0);
    let b = scaled.output(0);
    let gap = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    (gap, sup(&a))
}

#[test]
fn sir_output_is_invariant_under_population_scaling() {
    for lambda in [0.25, 3.0, 40.0] {
        for e in [
            sir_classical(1.9605032, 0.4751562, 763.0, 0.8).unwrap(),
            sir_cumulative(1.9605032, 0.4751562, 763.0, 0.8).unwrap(),
        ] {
            let (gap, norm) = scaled_gap(&e, lambda);
            assert!(gap <= 1e-8 * norm, "{} λ={lambda}: {gap}", e.id);
        }
    }
}

#[test]
fn sir_input_output_relation_holds_along_trajectories() {
    let (beta, gamma, n, k) = (1.9605032, 0.4751562, 763.0, 0.6);
    let e = sir_classical(beta, gamma, n, k).unwrap();
    let tr = e.default_trajectory(57, &SolverOptions::default()).unwrap();
    let c = beta / (k * n);
    for x in &tr.x {
        let st = lie_stack(&e.spec, x.as_slice(), &e.default_params, 2, false).unwrap();
        let (y, y1, y2) = (st.values[0][0], st.values[1][0], st.values[2][0]);
        let terms = [y * y2, c * y * y * y1, c * gamma * y.powi(3), -y1 * y1];
        let residual: f64 = terms.iter().sum();
        let size: f64 = terms.iter().map(|v| v.abs()).sum();
        assert!(residual.abs() <= 1e-4 * size, "residual {residual} vs {size}");
    }
}

#[test]
fn two_compartment_with_empty_second_compartment_hides_a12() {
    let grid = linspace(0.0, 20.0, 201);
    let a21 = 0.7;
    let base = two_compartment(0.3, a21).unwrap();
    let y0 = integrate_with(&base.spec, &[1.0, 0.0], &[0.3, a21], &grid, &tight()).unwrap().output(0);
    for a12 in [0.05, 1.1, 4.0] {
        let y = integrate_with(&base.spec, &[1.0, 0.0], &[a12, a21], &grid, &tight()).unwrap().output(0);
        let gap = y.iter().zip(&y0).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8 * sup(&y0));
    }
}

#[test]
fn swapped_two_compartment_rates_share_the_input_output_relation() {
    // y'' + (a12 + a21) y' + a12 a21 y = 0 for both orderings
    let (a, b) = (0.3, 0.7);
    let e = two_compartment(a, b).unwrap();
    let x = [1.3, 0.4];
    for theta in [[a, b], [b, a]] {
        let st = lie_stack(&e.spec, &x, &theta, 2, false).unwrap();
        let (y, y1, y2) = (st.values[0][0], st.values[1][0], st.values[2][0]);
        assert!((y2 + (a + b) * y1 + a * b * y).abs() < 1e-12);
    }
    // yet with x2(0) = 0 the swap is visible
    let grid = linspace(0.0, 20.0, 201);
    let ya = integrate_with(&e.spec, &[1.0, 0.0], &[a, b], &grid, &tight()).unwrap().output(0);
    let yb = integrate_with(&e.spec, &[1.0, 0.0], &[b, a], &grid, &tight()).unwrap().output(0);
    let gap = ya.iter().zip(&yb).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(gap > 0.1);
}

#[test]
fn parameter_validation_rejects_nonpositive_values() {
    assert!(sir_classical(-1.0, 0.5, 100.0, 1.0).is_err());
    assert!(sir_classical(1.0, 0.5, 100.0, 1.5).is_err());
    assert!(two_compartment(0.0, 1.0).is_err());
    assert!(obsident::zoo::academic_unobservable(-0.1).is_err());
    assert!(obsident::zoo::five_class_age(0.5, 1.0, 0.1, 0.2, 7).is_err());
    assert!(obsident::zoo::malaria_intrahost(&[1.0; 3]).is_err());
}

#[test]
fn parameter_overrides_by_name() {
    let e = by_id(ModelId::SirClassical);
    let p = e.params_with(&[("gamma".into(), 0.9)]).unwrap();
    assert_eq!(p[1], 0.9);
    assert!(e.params_with(&[("delta".into(), 1.0)]).is_err());
}
