//! Numerical rank tests for observability and identifiability.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_with, lie_stack, ModelSpec, SolverOptions};
use crate::zoo::ZooEntry;

/// Relative factor in the rank rule `σ > max(rows, cols)·σ_max·factor`.
pub const DEFAULT_RANK_FACTOR: f64 = 1e-10;

/// Random admissible points drawn for a genericity verdict.
pub const GENERIC_SAMPLES: usize = 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    /// Evaluation point; empty for a linear pair.
    pub point: Vec<f64>,
    pub stack_order: usize,
    pub rows: usize,
    pub cols: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
    pub numerical_rank: usize,
    pub full_rank: bool,
    /// `σ_max/σ_min`, infinite (`null` in JSON) when rank-deficient.
    pub condition_number: f64,
    /// Orthonormal basis of the numerical null space, one vector per entry.
    pub null_directions: Vec<Vec<f64>>,
    /// Present when the matrix is square.
    pub determinant: Option<f64>,
    /// Finite-difference noise may have corrupted the matrix.
    pub degraded: bool,
}

/// Singular values in descending order and the full right singular basis.
pub(crate) fn svd_full(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).take(r.min(c)).collect();
    let mut v = DMatrix::zeros(c, c);
    for (k, &i) in idx.iter().enumerate() {
        v.set_column(k, &vt.row(i).transpose());
    }
    (sv, v)
}

pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64, factor: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * factor
}

/// SVD rank analysis of an arbitrary matrix.
pub fn rank_report(m: &DMatrix<f64>, factor: f64) -> RankReport {
    let (rows, cols) = m.shape();
    let (sv, v) = svd_full(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(rows, cols, smax, factor);
    let rank = sv.iter().filter(|s| **s > tol).count();
    let full = rank == cols;
    let cond = if full && rank > 0 { smax / sv[rank - 1] } else { f64::INFINITY };
    let null = (rank..cols).map(|k| v.column(k).iter().copied().collect()).collect();
    RankReport {
        point: vec![],
        stack_order: 0,
        rows,
        cols,
        singular_values: sv,
        tolerance: tol,
        numerical_rank: rank,
        full_rank: full,
        condition_number: cond,
        null_directions: null,
        determinant: (rows == cols).then(|| m.determinant()),
        degraded: false,
    }
}

/// `[C; CA; …; CA^{n−1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let m = c.nrows();
    let mut o = DMatrix::zeros(m * n, n);
    let mut block = c.clone();
    for k in 0..n {
        o.view_mut((k * m, 0), (m, n)).copy_from(&block);
        block = &block * a;
    }
    Ok(o)
}

/// Rank of the observability matrix of the pair `(A, C)`.
pub fn linear_observability(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<RankReport> {
    let o = observability_matrix(a, c)?;
    let mut r = rank_report(&o, DEFAULT_RANK_FACTOR);
    r.stack_order = a.nrows() - 1;
    Ok(r)
}

/// Observability rank condition at a point.
///
/// With `augment`, `point` is `(x, θ)` and the rank concerns states and
/// parameters together. `order` defaults to the point dimension minus one.
pub fn orc_rank(
    model: &ModelSpec,
    point: &[f64],
    theta: &[f64],
    augment: bool,
    order: Option<usize>,
) -> Result<RankReport> {
    let dim = if augment {
        model.n_states() + model.n_params()
    } else {
        model.n_states()
    };
    let order = order.unwrap_or(dim.saturating_sub(1));
    let stack = lie_stack(model, point, theta, order, augment)?;
    let mut r = rank_report(&stack.jacobian, DEFAULT_RANK_FACTOR);
    r.point = point.to_vec();
    r.stack_order = order;
    r.degraded = stack.degraded;
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledRank {
    pub reports: Vec<RankReport>,
    pub min_rank: usize,
    pub max_rank: usize,
    /// Every sampled point passed the rank test.
    pub generically_full_rank: bool,
}

/// Rank test at each of the given points.
pub fn orc_sampled(
    model: &ModelSpec,
    points: &[Vec<f64>],
    theta: &[f64],
    augment: bool,
    order: Option<usize>,
) -> Result<SampledRank> {
    let reports = points
        .iter()
        .map(|p| orc_rank(model, p, theta, augment, order))
        .collect::<Result<Vec<_>>>()?;
    let min_rank = reports.iter().map(|r| r.numerical_rank).min().unwrap_or(0);
    let max_rank = reports.iter().map(|r| r.numerical_rank).max().unwrap_or(0);
    Ok(SampledRank {
        generically_full_rank: !reports.is_empty() && reports.iter().all(|r| r.full_rank),
        reports,
        min_rank,
        max_rank,
    })
}

/// Seeded admissible states of a zoo entry.
pub fn admissible_samples(entry: &ZooEntry, theta: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| entry.sample_state(&mut rng, theta)).collect()
}

/// User points followed by [`GENERIC_SAMPLES`] seeded admissible points.
///
/// With `augment`, each sampled state is extended by `theta`.
pub fn orc_generic(
    entry: &ZooEntry,
    theta: &[f64],
    augment: bool,
    order: Option<usize>,
    user_points: &[Vec<f64>],
    seed: u64,
) -> Result<SampledRank> {
    let mut points = user_points.to_vec();
    for x in admissible_samples(entry, theta, GENERIC_SAMPLES, seed) {
        if augment {
            points.push(x.into_iter().chain(theta.iter().copied()).collect());
        } else {
            points.push(x);
        }
    }
    orc_sampled(&entry.spec, &points, theta, augment, order)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// `sup_t |y_a(t) − y_b(t)|` over the grid.
    pub gap: f64,
    /// `sup_t |y_a(t)|`.
    pub output_norm: f64,
}

/// Largest output difference between two runs on a common grid.
pub fn indistinguishability_probe(
    model: &ModelSpec,
    (x_a, theta_a): (&[f64], &[f64]),
    (x_b, theta_b): (&[f64], &[f64]),
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Probe> {
    let a = integrate_with(model, x_a, theta_a, grid, opts)?;
    let b = integrate_with(model, x_b, theta_b, grid, opts)?;
    let mut gap: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for (ya, yb) in a.y.iter().zip(&b.y) {
        gap = gap.max((ya - yb).amax());
        norm = norm.max(ya.amax());
    }
    Ok(Probe { gap, output_norm: norm })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detectability {
    /// Unobservable modes are all strictly stable.
    Detectable,
    /// Some unobservable mode sits on the imaginary axis.
    Marginal,
    NotDetectable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectabilityReport {
    pub verdict: Detectability,
    pub unobservable_dim: usize,
    /// `(re, im)` of `A` restricted to the unobservable subspace.
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Stability of the dynamics on the unobservable subspace `ker O`.
pub fn detectability_linear(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DetectabilityReport> {
    let o = observability_matrix(a, c)?;
    let report = rank_report(&o, DEFAULT_RANK_FACTOR);
    let n = a.nrows();
    let k = report.null_directions.len();
    if k == 0 {
        return Ok(DetectabilityReport {
            verdict: Detectability::Detectable,
            unobservable_dim: 0,
            eigenvalues: vec![],
        });
    }
    let u = DMatrix::from_fn(n, k, |i, j| report.null_directions[j][i]);
    let restricted = u.transpose() * a * &u;
    let eig = restricted.complex_eigenvalues();
    let scale = a.amax().max(1.0);
    let eigenvalues: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    let worst = eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if worst.abs() <= 1e-10 * scale {
        Detectability::Marginal
    } else if worst < 0.0 {
        Detectability::Detectable
    } else {
        Detectability::NotDetectable
    };
    Ok(DetectabilityReport {
        verdict,
        unobservable_dim: k,
        eigenvalues,
    })
}
