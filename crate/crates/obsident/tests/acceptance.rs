//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obsident::data::{dataset_boarding_school, dataset_bombay};
use obsident::estimation::*;
use obsident::observability::{admissible_samples, indistinguishability_probe, linear_observability, orc_rank, orc_sampled};
use obsident::observers::*;
use obsident::ode::{integrate_with, lie_stack, linspace, SolverOptions, Tolerances};
use obsident::zoo::*;

type Outcome = (bool, String);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn tight() -> SolverOptions {
    SolverOptions::with_tol(Tolerances { rel: 1e-12, abs: 1e-12 })
}

fn boarding_problem() -> Problem {
    let e = sir_classical(2.0, 0.5, 763.0, 1.0).unwrap();
    Problem::new(e.spec, e.default_params, vec![762.0, 1.0], Unknowns::params(&[0, 1])).unwrap()
}

fn bombay_problem() -> Problem {
    let e = sir_cumulative_rate(8e-5, 0.6, 15000.0, 7.0).unwrap();
    Problem::new(e.spec, e.default_params, e.default_x0, Unknowns::params(&[0, 1]).with_states(&[0, 1])).unwrap()
}

fn criterion_1() -> Outcome {
    let (p, d) = (boarding_problem(), dataset_boarding_school());
    let started = Instant::now();
    let fit = ols_fit(&p, &d, &FitOptions::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let ok = rel(fit.estimate[0], 1.9605032) <= 5e-3
        && rel(fit.estimate[1], 0.4751562) <= 5e-3
        && rel(fit.sse, 4892.6472) <= 5e-3
        && rel(fit.sigma2_hat, 407.72060) <= 5e-3
        && secs < 10.0;
    (
        ok,
        format!(
            "beta {:.7} gamma {:.7} SSE {:.4} sigma2 {:.5} in {secs:.2} s",
            fit.estimate[0], fit.estimate[1], fit.sse, fit.sigma2_hat
        ),
    )
}

fn criterion_2() -> Outcome {
    let (p, d) = (boarding_problem(), dataset_boarding_school());
    let fit = ols_fit(&p, &d, &FitOptions::default()).unwrap();
    let r = fim_report(&p, &d, &fit, &tight()).unwrap();
    let expected = [[974.5073, -523.73985], [-523.73985, 3132.2047]];
    let fim_ok = (0..2).all(|i| (0..2).all(|j| rel(r.fim[(i, j)], expected[i][j]) <= 5e-3));
    let ok = fim_ok
        && rel(r.condition_number, 3.8082403) <= 1e-2
        && rel(r.half_widths[0], 0.0731602) <= 1e-2
        && rel(r.half_widths[1], 0.0408077) <= 1e-2
        && (r.t_quantile - 2.1788128).abs() <= 1e-4;
    (
        ok,
        format!(
            "FIM [[{:.4}, {:.5}], [{:.5}, {:.4}]] cond {:.7} half-widths {:.7} {:.7} t {:.7}",
            r.fim[(0, 0)],
            r.fim[(0, 1)],
            r.fim[(1, 0)],
            r.fim[(1, 1)],
            r.condition_number,
            r.half_widths[0],
            r.half_widths[1],
            r.t_quantile
        ),
    )
}

fn criterion_3() -> Outcome {
    let (p, d) = (bombay_problem(), dataset_bombay());
    let started = Instant::now();
    let fit = ols_fit(&p, &d, &FitOptions::default()).unwrap();
    let r = fim_report(&p, &d, &fit, &tight()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let near = rel(fit.estimate[1], 3.7161743) <= 0.05 && rel(fit.estimate[2], 48113.13) <= 0.05;
    let ratios: Vec<f64> = (1..4).map(|k| r.half_widths[k] / fit.estimate[k].abs()).collect();
    let ok = fit.sse <= 1.01 * 106336.49
        && (near || r.ill_conditioned)
        && r.condition_number >= 1e20
        && ratios.iter().all(|&q| q > 5.0)
        && (r.t_quantile - 2.0595386).abs() <= 1e-4
        && secs < 30.0;
    (
        ok,
        format!(
            "SSE {:.2} at (beta~ {:.4e}, gamma {:.4}, S0 {:.1}, I0 {:.4}); {} ill-conditioned, cond {:.3e}; \
             half-width/estimate gamma {:.1} S0 {:.1} I0 {:.1}; t {:.7}; converged {} ({:?}) in {secs:.2} s",
            fit.sse,
            fit.estimate[0],
            fit.estimate[1],
            fit.estimate[2],
            fit.estimate[3],
            if near { "near the reported point," } else { "on the ridge," },
            r.condition_number,
            ratios[0],
            ratios[1],
            ratios[2],
            r.t_quantile,
            fit.converged,
            fit.termination
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.gen_range(200.0..5000.0);
        let k = rng.gen_range(0.1..1.0);
        let beta = rng.gen_range(0.2..3.0);
        let gamma = rng.gen_range(0.05..1.0);
        let s = rng.gen_range(0.05..0.95) * n;
        let i = rng.gen_range(0.01..1.0) * (n - s);
        let e = sir_classical(beta, gamma, n, k).unwrap();
        let reduced = e.spec.fix_params(&[(2, n), (3, k)]).unwrap();
        let det = orc_rank(&reduced, &[s, i, beta, gamma], &[], true, None)
            .unwrap()
            .determinant
            .unwrap();
        let exact = -k.powi(4) * beta.powi(4) * s * i.powi(6) / n.powi(5);
        worst = worst.max(rel(det, exact));
    }
    let n = 1000.0;
    let e = sir_classical(1.5, 0.5, n, 1.0).unwrap();
    let reduced = e.spec.fix_params(&[(2, n)]).unwrap();
    let points: Vec<Vec<f64>> = admissible_samples(&e, &e.default_params, 20, 41)
        .into_iter()
        .map(|x| vec![x[0], x[1], rng.gen_range(0.2..3.0), rng.gen_range(0.05..1.0), rng.gen_range(0.1..1.0)])
        .collect();
    let sampled = orc_sampled(&reduced, &points, &[], true, None).unwrap();
    let ok = worst <= 1e-3 && sampled.reports.len() == 20 && sampled.max_rank < 5;
    (
        ok,
        format!(
            "det worst relative gap {worst:.2e} over 10 points; 5-unknown stack max rank {} over 20 points",
            sampled.max_rank
        ),
    )
}

fn eig(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

fn random_spectrum(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex<f64>> {
    let mut out: Vec<Complex<f64>> = vec![];
    while out.len() < n {
        let re = -rng.gen_range(0.1..3.0);
        if n - out.len() >= 2 && rng.gen_bool(0.4) {
            let im = rng.gen_range(0.1..2.0);
            out.push(Complex::new(re, im));
            out.push(Complex::new(re, -im));
        } else {
            out.push(Complex::new(re, 0.0));
        }
        let sep = out.iter().enumerate().all(|(i, a)| out[i + 1..].iter().all(|b| (a - b).norm() >= 0.2));
        if !sep {
            out.clear();
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let model = ThreeStage::standard(0);
    let lambda = real_spectrum(&THREE_STAGE_SLOW);
    let gain = pole_place_gain(&model.a_matrix(), &model.c_matrix(), &lambda).unwrap();
    let placed = spectrum_mismatch(&lambda, &eig(&(model.a_matrix() + &gain.g * model.c_matrix())));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let n = rng.gen_range(1..=6);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
        let o = linear_observability(&a, &c).unwrap();
        if !o.full_rank || o.condition_number > 1e6 {
            continue;
        }
        let lambda = random_spectrum(&mut rng, n);
        let scale = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let gap = match pole_place_gain(&a, &c, &lambda) {
            Ok(g) => spectrum_mismatch(&lambda, &eig(&(&a + &g.g * &c))) / scale,
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        checked += 1;
    }
    (
        placed <= 1e-8 && worst <= 1e-6,
        format!("three-stage mismatch {placed:.2e}; worst relative mismatch over 100 random triples {worst:.2e}"),
    )
}

fn run(config: &ObserverConfig) -> ObserverRun {
    prepare(config).unwrap().run_exact().unwrap()
}

fn exact_initial(family: Family) -> Vec<f64> {
    match family {
        Family::LuenbergerLinearUpToOutput => ThreeStage::standard(0).x0,
        Family::ChangeOfCoordinates => {
            let p = MalariaParams::default();
            MalariaObserver::new(&p, &MALARIA_GAIN)
                .unwrap()
                .w_from_estimate(&p.x0, p.x0[1] + p.x0[2])
        }
        Family::ReducedOrder => {
            let m = FluctuatingSir::standard(0);
            vec![m.x0[0] + m.x0[1]]
        }
        Family::HighGain => {
            let obs = HighGainSir::new(0.4, 0.1, 10000.0, &HIGH_GAIN_SPECTRUM).unwrap();
            let x0 = by_id(ModelId::SirRecovered).default_x0;
            obs.z_from_state(x0[0], x0[1], x0[2])
        }
    }
}

fn criterion_6() -> Outcome {
    let lu = run(&ObserverConfig::for_family(Family::LuenbergerLinearUpToOutput));
    let lu_rate = lu.empirical_decay_rate.unwrap_or(f64::NAN);
    let lu_ok = rel(lu_rate, THREE_STAGE_SLOW[0]) <= 0.25;

    let ro = run(&ObserverConfig::for_family(Family::ReducedOrder));
    let mu = FluctuatingSir::standard(0).mu;
    let ro_rate = ro.empirical_decay_rate.unwrap_or(f64::NAN);
    let ro_ok = rel(ro_rate, -mu) <= 0.25;

    let ma_setup = prepare(&ObserverConfig::for_family(Family::ChangeOfCoordinates).with_horizon(600.0)).unwrap();
    let ma = ma_setup.run_exact().unwrap();
    let ma_rate = ma.empirical_decay_rate.unwrap_or(f64::NAN);
    let ma_ok = rel(ma_rate, ma_setup.expected_rate) <= 0.25;

    // one-sided: the error must decay at least as fast as the target
    let theta = 1.0;
    let lambda = high_gain_spectrum(3, 1.0, theta).unwrap();
    let hg = run(&ObserverConfig::for_family(Family::HighGain).with_spectrum(&lambda).with_horizon(10.0));
    let hg_rate = hg.empirical_decay_rate.unwrap_or(f64::NAN);
    let hg_ok = hg_rate <= -0.8 * theta;

    let mut exact_worst: f64 = 0.0;
    for family in Family::ALL {
        let cfg = ObserverConfig::for_family(family).with_initial(exact_initial(family));
        let r = run(&cfg);
        let bound = 10.0 * (cfg.tol.rel * r.state_scale + cfg.tol.abs);
        exact_worst = exact_worst.max(r.max_error() / bound);
    }
    let ok = lu_ok && ro_ok && ma_ok && hg_ok && exact_worst <= 1.0;
    (
        ok,
        format!(
            "Luenberger {lu_rate:.4} vs {:.4}; reduced-order {ro_rate:.4} vs {:.4}; malaria {ma_rate:.5} vs {:.5}; \
             high-gain {hg_rate:.3} vs target -{theta} (one-sided; lambda1 = {:.3}); \
             exact init worst error / (10 x tolerance) = {exact_worst:.2e}",
            THREE_STAGE_SLOW[0],
            -mu,
            ma_setup.expected_rate,
            lambda[0]
        ),
    )
}

fn criterion_7() -> Outcome {
    let slow = ObserverConfig::for_family(Family::LuenbergerLinearUpToOutput).with_spectrum(&NOISE_DEMO_SLOW);
    let fast = slow.clone().with_spectrum(&NOISE_DEMO_FAST);
    let noise = NoiseSpec::new(NoiseKind::Uniform, 0.2, 0.5);
    let seed = 1;
    let t_slow = run(&slow).time_to_fraction(0.01).unwrap_or(f64::INFINITY);
    let t_fast = run(&fast).time_to_fraction(0.01).unwrap_or(f64::INFINITY);
    let e_slow = simulate_with_noise(&slow, &noise, seed).unwrap().tail_error;
    let e_fast = simulate_with_noise(&fast, &noise, seed).unwrap().tail_error;

    let scaled_slow = ObserverConfig::for_family(Family::LuenbergerLinearUpToOutput);
    let scaled_fast = scaled_slow.clone().with_spectrum(&THREE_STAGE_FAST);
    let s_slow = simulate_with_noise(&scaled_slow, &noise, seed).unwrap().tail_error;
    let s_fast = simulate_with_noise(&scaled_fast, &noise, seed).unwrap().tail_error;
    (
        e_fast > e_slow && t_fast < t_slow,
        format!(
            "{NOISE_DEMO_FAST:?} vs {NOISE_DEMO_SLOW:?}, seed {seed}: noisy tail {e_fast:.4} > {e_slow:.4}, \
             time to 1% {t_fast:.2} < {t_slow:.2} (info, 0.3-scaled pair tails: fast {s_fast:.4}, slow {s_slow:.4})"
        ),
    )
}

fn fd_states(
    grid: &[f64],
    base: &[f64],
    scale: &[f64],
    mut traj: impl FnMut(&[f64]) -> Vec<Vec<f64>>,
) -> Vec<DMatrix<f64>> {
    let n = traj(base)[0].len();
    let mut out = vec![DMatrix::zeros(n, base.len()); grid.len()];
    for c in 0..base.len() {
        let h = 1e-5 * if base[c] != 0.0 { base[c].abs() } else { scale[c] };
        let (mut up, mut dn) = (base.to_vec(), base.to_vec());
        up[c] += h;
        dn[c] -= h;
        let (a, b) = (traj(&up), traj(&dn));
        for i in 0..grid.len() {
            for r in 0..n {
                out[i][(r, c)] = (a[i][r] - b[i][r]) / (2.0 * h);
            }
        }
    }
    out
}

fn gap(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    let scale = b.iter().map(|m| m.amax()).fold(0.0, f64::max).max(1e-12);
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max) / scale
}

fn criterion_8() -> Outcome {
    let opts = tight();
    let mut worst: (f64, String) = (0.0, String::new());
    for id in ModelId::ALL {
        let e = by_id(id);
        let (spec, theta, x0) = (&e.spec, &e.default_params, &e.default_x0);
        let grid = linspace(0.0, e.horizon.min(30.0), 11);
        let b = sensitivity_solve(spec, theta, x0, &grid, &opts).unwrap();
        let states = |th: &[f64], x: &[f64]| -> Vec<Vec<f64>> {
            let tr = integrate_with(spec, x, th, &grid, &opts).unwrap();
            tr.x.iter().map(|v| v.as_slice().to_vec()).collect()
        };
        let gz = gap(&b.z, &fd_states(&grid, theta, spec.param_scales(), |th| states(th, x0)));
        let gw = gap(&b.w, &fd_states(&grid, x0, spec.state_scales(), |x| states(theta, x)));
        if gz.max(gw) > worst.0 {
            worst = (gz.max(gw), id.to_string());
        }
    }

    let e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap();
    let steps = 400;
    let grid = linspace(0.0, 13.0, 14);
    let fine = linspace(0.0, 13.0, 13 * steps + 1);
    let det = sensitivity_solve(&e.spec, &e.default_params, &e.default_x0, &grid, &opts)
        .unwrap()
        .det_w();
    let tr = integrate_with(&e.spec, &e.default_x0, &e.default_params, &fine, &opts).unwrap();
    let traces: Vec<f64> = tr
        .x
        .iter()
        .zip(&fine)
        .map(|(x, &t)| e.spec.jac_x(t, x.as_slice(), &e.default_params).unwrap().trace())
        .collect();
    let h = fine[1] - fine[0];
    let mut integral = 0.0;
    let mut liouville: f64 = 0.0;
    for i in 0..grid.len() {
        if i > 0 {
            integral += ((i - 1) * steps..i * steps)
                .map(|k| 0.5 * h * (traces[k] + traces[k + 1]))
                .sum::<f64>();
        }
        liouville = liouville.max(rel(det[i], integral.exp()));
    }
    (
        worst.0 <= 1e-4 && liouville <= 1e-5,
        format!(
            "worst z/w relative gap {:.2e} ({}); Liouville relative gap {liouville:.2e}",
            worst.0, worst.1
        ),
    )
}

fn criterion_9() -> Outcome {
    let opts = tight();
    let e = sir_classical(1.9605032, 0.4751562, 763.0, 0.8).unwrap();
    let th = e.default_params.clone();
    let grid = linspace(0.0, 14.0, 141);
    let mut sir_worst: f64 = 0.0;
    for lam in [0.25, 3.0, 40.0] {
        let th2 = [th[0], th[1], th[2] * lam, th[3] / lam];
        let x2 = [e.default_x0[0] * lam, e.default_x0[1] * lam];
        let p = indistinguishability_probe(&e.spec, (&e.default_x0, &th), (&x2, &th2), &grid, &opts).unwrap();
        sir_worst = sir_worst.max(p.gap / p.output_norm);
    }
    let tc = two_compartment(0.3, 0.7).unwrap();
    let grid = linspace(0.0, 20.0, 201);
    let mut tc_worst: f64 = 0.0;
    for a12 in [0.05, 1.1, 4.0] {
        let p = indistinguishability_probe(&tc.spec, (&[1.0, 0.0], &[0.3, 0.7]), (&[1.0, 0.0], &[a12, 0.7]), &grid, &opts)
            .unwrap();
        tc_worst = tc_worst.max(p.gap / p.output_norm);
    }

    let (beta, gamma, n, k) = (1.9605032, 0.4751562, 763.0, 0.6);
    let e = sir_classical(beta, gamma, n, k).unwrap();
    let tr = e.default_trajectory(57, &SolverOptions::default()).unwrap();
    let c = beta / (k * n);
    let mut io_worst: f64 = 0.0;
    for x in &tr.x {
        let st = lie_stack(&e.spec, x.as_slice(), &e.default_params, 2, false).unwrap();
        let (y, y1, y2) = (st.values[0][0], st.values[1][0], st.values[2][0]);
        let terms = [y * y2, c * y * y * y1, c * gamma * y.powi(3), -y1 * y1];
        let size: f64 = terms.iter().map(|v| v.abs()).sum();
        io_worst = io_worst.max(terms.iter().sum::<f64>().abs() / size);
    }
    (
        sir_worst <= 1e-8 && tc_worst <= 1e-8 && io_worst <= 1e-4,
        format!(
            "SIR scaling gap {sir_worst:.2e}; two-compartment gap {tc_worst:.2e}; input-output residual {io_worst:.2e} (all relative)"
        ),
    )
}

fn closure(entry: ZooEntry) -> f64 {
    let grid = linspace(0.0, 14.0, 29);
    let tr = integrate_with(&entry.spec, &entry.default_x0, &entry.default_params, &grid, &tight()).unwrap();
    let d = Dataset::single("synthetic", grid, tr.output(0), 0, DofConvention::KnownX0).unwrap();
    let truth = entry.default_params.clone();
    let mut guess = truth.clone();
    guess[0] *= 1.2;
    guess[1] *= 0.8;
    let p = Problem::new(entry.spec, guess, entry.default_x0, Unknowns::params(&[0, 1])).unwrap();
    let fit = ols_fit(&p, &d, &FitOptions::default()).unwrap();
    if !fit.converged {
        return f64::INFINITY;
    }
    (0..2).map(|k| rel(fit.estimate[k], truth[k])).fold(0.0, f64::max)
}

fn criterion_10() -> Outcome {
    let a = closure(sir_classical(1.9605032, 0.4751562, 763.0, 1.0).unwrap());
    let b = closure(sir_cumulative(1.9605032, 0.4751562, 763.0, 1.0).unwrap());
    (
        a <= 1e-6 && b <= 1e-6,
        format!("worst relative parameter error: sir_classical {a:.2e}, sir_cumulative {b:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("boarding-school fit", criterion_1),
        ("boarding-school FIM", criterion_2),
        ("Bombay fit", criterion_3),
        ("SIR closed-form ORC", criterion_4),
        ("pole placement", criterion_5),
        ("observer decay laws", criterion_6),
        ("noise tradeoff", criterion_7),
        ("sensitivity correctness", criterion_8),
        ("indistinguishability", criterion_9),
        ("zero-noise closure", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match std::panic::catch_unwind(check) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
