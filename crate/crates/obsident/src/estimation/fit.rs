//! Datasets and ordinary least squares by Levenberg-Marquardt.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sensitivity::{output_sensitivity, sensitivity_solve, Unknowns};
use crate::error::{invalid, Error, Result};
use crate::ode::{ModelSpec, SolverOptions, Tolerances};

/// Degrees of freedom removed by the estimation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofConvention {
    /// `M − q`, with `q` the number of unknowns.
    KnownX0,
    /// `M − (n + q)`.
    EstimatedX0,
}

impl std::str::FromStr for DofConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known-x0" => Ok(DofConvention::KnownX0),
            "estimated-x0" => Ok(DofConvention::EstimatedX0),
            _ => Err(Error::Unknown {
                kind: "dof convention",
                name: s.to_string(),
            }),
        }
    }
}

/// Observations `Y_i` of some model outputs at times `t_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub t: Vec<f64>,
    /// One row per time, one column per observed output.
    pub y: Vec<Vec<f64>>,
    /// Model output observed by each column.
    pub outputs: Vec<usize>,
    pub dof_convention: DofConvention,
}

impl Dataset {
    /// One observed output.
    pub fn single(name: &str, t: Vec<f64>, values: Vec<f64>, output: usize, dof: DofConvention) -> Result<Self> {
        let d = Dataset {
            name: name.to_string(),
            t,
            y: values.into_iter().map(|v| vec![v]).collect(),
            outputs: vec![output],
            dof_convention: dof,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.is_empty() {
            return Err(Error::Data(format!("{}: no observations", self.name)));
        }
        if self.t.len() != self.y.len() {
            return Err(Error::Data(format!("{}: {} times but {} rows", self.name, self.t.len(), self.y.len())));
        }
        if self.outputs.is_empty() || self.y.iter().any(|r| r.len() != self.outputs.len()) {
            return Err(Error::Data(format!("{}: ragged rows", self.name)));
        }
        if self.t.iter().any(|t| !t.is_finite()) || self.y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{}: non-finite entries", self.name)));
        }
        if self.t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data(format!("{}: times must be nondecreasing", self.name)));
        }
        Ok(())
    }

    /// Number of scalar observations `M`.
    pub fn n_obs(&self) -> usize {
        self.t.len() * self.outputs.len()
    }

    /// Observations stacked row by row.
    pub fn stacked(&self) -> Vec<f64> {
        self.y.iter().flatten().copied().collect()
    }

    /// Column `j` of the observations.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|r| r[j]).collect()
    }

    fn unique_times(&self) -> (Vec<f64>, Vec<usize>) {
        let mut grid: Vec<f64> = vec![];
        let mut index = Vec::with_capacity(self.t.len());
        for &t in &self.t {
            if grid.last() != Some(&t) {
                grid.push(t);
            }
            index.push(grid.len() - 1);
        }
        (grid, index)
    }

    /// Reads `t,y` or `t,y1,…` CSV; column `k` observes output `k − 1`.
    pub fn read_csv<R: Read>(name: &str, reader: R, dof: DofConvention) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t" {
            return Err(Error::Data(format!(
                "{name}: expected a header starting with t and at least one value column"
            )));
        }
        let k = headers.len() - 1;
        let mut t = vec![];
        let mut y = vec![];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("{name}: row {}: cannot parse '{s}'", line + 2)))
            };
            if rec.len() != k + 1 {
                return Err(Error::Data(format!("{name}: row {} has {} fields", line + 2, rec.len())));
            }
            t.push(parse(&rec[0])?);
            y.push((1..=k).map(|j| parse(&rec[j])).collect::<Result<Vec<_>>>()?);
        }
        let d = Dataset {
            name: name.to_string(),
            t,
            y,
            outputs: (0..k).collect(),
            dof_convention: dof,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn read_csv_path(path: &Path, dof: DofConvention) -> Result<Self> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
        Dataset::read_csv(&name, std::fs::File::open(path)?, dof)
    }

    /// Writes the `t,y…` CSV accepted by [`Dataset::read_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        if self.outputs.len() == 1 {
            header.push("y".into());
        } else {
            header.extend((1..=self.outputs.len()).map(|j| format!("y{j}")));
        }
        w.write_record(&header)?;
        for (t, row) in self.t.iter().zip(&self.y) {
            let mut rec = vec![format!("{t}")];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A model with known and unknown quantities; `theta` and `x0` hold the
/// known values and the starting guess of the unknown ones.
#[derive(Clone)]
pub struct Problem {
    pub model: ModelSpec,
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub unknowns: Unknowns,
    /// Lower bound of each unknown, enforced by projection.
    pub lower: Vec<f64>,
}

impl Problem {
    /// Unknowns bounded below by zero.
    pub fn new(model: ModelSpec, theta: Vec<f64>, x0: Vec<f64>, unknowns: Unknowns) -> Result<Self> {
        model.check_dims(&x0, &theta)?;
        unknowns.check(&model)?;
        let lower = vec![0.0; unknowns.len()];
        Ok(Problem {
            model,
            theta,
            x0,
            unknowns,
            lower,
        })
    }

    pub fn with_lower(mut self, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != self.unknowns.len() {
            return Err(Error::Dimension(format!(
                "{} lower bounds for {} unknowns",
                lower.len(),
                self.unknowns.len()
            )));
        }
        self.lower = lower;
        Ok(self)
    }

    pub fn names(&self) -> Vec<String> {
        self.unknowns.names(&self.model)
    }

    pub fn initial_guess(&self) -> Vec<f64> {
        self.unknowns.pack(&self.theta, &self.x0)
    }

    /// Same problem with the unknowns set to `u`.
    pub fn at(&self, u: &[f64]) -> Problem {
        let (theta, x0) = self.unknowns.unpack(u, &self.theta, &self.x0);
        Problem {
            theta,
            x0,
            ..self.clone()
        }
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        data.validate()?;
        if data.outputs.iter().any(|&j| j >= self.model.n_outputs()) {
            return Err(Error::Dimension(format!(
                "{}: observes output {} of a model with {}",
                data.name,
                data.outputs.iter().max().unwrap(),
                self.model.n_outputs()
            )));
        }
        Ok(())
    }

    /// Model predictions at the data times, stacked like [`Dataset::stacked`].
    pub fn predict(&self, u: &[f64], data: &Dataset, opts: &SolverOptions) -> Result<Vec<f64>> {
        Ok(self.predict_with_jacobian(u, data, opts)?.0)
    }

    /// Predictions and the Jacobian of the stacked predictions with respect to `u`.
    pub fn predict_with_jacobian(
        &self,
        u: &[f64],
        data: &Dataset,
        opts: &SolverOptions,
    ) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_data(data)?;
        let (theta, x0) = self.unknowns.unpack(u, &self.theta, &self.x0);
        let (grid, index) = data.unique_times();
        let bundle = sensitivity_solve(&self.model, &theta, &x0, &grid, opts)?;
        let chi = output_sensitivity(&bundle, &self.model, &theta, &self.unknowns)?;
        let q = self.unknowns.len();
        let mut pred = Vec::with_capacity(data.n_obs());
        let mut jac = DMatrix::zeros(data.n_obs(), q);
        let mut row = 0;
        for &k in &index {
            let y = self.model.output(grid[k], bundle.x[k].as_slice(), &theta);
            for &j in &data.outputs {
                pred.push(y[j]);
                for c in 0..q {
                    jac[(row, c)] = chi[k][(j, c)];
                }
                row += 1;
            }
        }
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "model prediction".into(),
            });
        }
        Ok((pred, jac))
    }

    /// Output sensitivities at every data time, restricted to observed outputs.
    pub fn sensitivities(&self, u: &[f64], data: &Dataset, opts: &SolverOptions) -> Result<Vec<DMatrix<f64>>> {
        let (_, jac) = self.predict_with_jacobian(u, data, opts)?;
        let m = data.outputs.len();
        Ok((0..data.t.len()).map(|i| jac.rows(i * m, m).into_owned()).collect())
    }

    /// Residual degrees of freedom under the dataset's convention.
    pub fn dof(&self, data: &Dataset) -> i64 {
        let m = data.n_obs() as i64;
        let q = self.unknowns.len() as i64;
        match data.dof_convention {
            DofConvention::KnownX0 => m - q,
            DofConvention::EstimatedX0 => m - (self.model.n_states() as i64 + q),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop when every scaled gradient component is below this fraction of `‖r‖`.
    pub gradient_tol: f64,
    /// Stop when the relative step falls below this.
    pub step_tol: f64,
    pub tol: Tolerances,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 400,
            initial_damping: 1e-3,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
            tol: Tolerances { rel: 1e-12, abs: 1e-12 },
        }
    }
}

impl FitOptions {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions::with_tol(self.tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Gradient,
    Step,
    ZeroResidual,
    MaxIterations,
    /// No decrease found even with very large damping.
    Stalled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    /// Values of the unknowns.
    pub estimate: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub x0_hat: Vec<f64>,
    pub sse: f64,
    pub sigma2_hat: f64,
    pub dof: i64,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Largest cosine between the residual and a Jacobian column.
    pub gradient_cosine: f64,
    /// `Y_i − y(t_i)`.
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.estimate[i])
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

struct Eval {
    r: Vec<f64>,
    j: DMatrix<f64>,
    sse: f64,
}

fn evaluate(problem: &Problem, u: &[f64], data: &Dataset, y: &[f64], opts: &SolverOptions) -> Result<Eval> {
    let (pred, j) = problem.predict_with_jacobian(u, data, opts)?;
    let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let sse = sq(&r);
    Ok(Eval { r, j, sse })
}

/// Minimizes `Σ (Y_i − y(t_i))²` over the unknowns of `problem`.
pub fn ols_fit(problem: &Problem, data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    let dof = problem.dof(data);
    if dof < 1 {
        return Err(invalid(
            "data",
            format!("{} observations leave {dof} degrees of freedom", data.n_obs()),
        ));
    }
    let opts = options.solver();
    let y = data.stacked();
    let y_norm = sq(&y).sqrt();
    let lower = &problem.lower;
    let project = |u: &mut [f64]| {
        for (v, lo) in u.iter_mut().zip(lower) {
            *v = v.max(*lo);
        }
    };
    let mut u = problem.initial_guess();
    project(&mut u);
    let mut cur = evaluate(problem, &u, data, &y, &opts)?;
    let mut lambda = options.initial_damping;
    let q = u.len();
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut cosine = f64::INFINITY;

    while iterations < options.max_iterations {
        let r_norm = cur.sse.sqrt();
        if r_norm <= 1e-14 * y_norm.max(f64::MIN_POSITIVE) {
            termination = Termination::ZeroResidual;
            cosine = 0.0;
            break;
        }
        let scale: Vec<f64> = (0..q)
            .map(|c| {
                let s = cur.j.column(c).norm();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut js = cur.j.clone();
        for c in 0..q {
            js.column_mut(c).scale_mut(1.0 / scale[c]);
        }
        let r = DVector::from_column_slice(&cur.r);
        let g = js.transpose() * &r;
        cosine = g.amax() / r_norm;
        if cosine < options.gradient_tol {
            termination = Termination::Gradient;
            break;
        }
        let svd = js.clone().svd(true, true);
        let (uu, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let utr = uu.transpose() * &r;
        iterations += 1;
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut coef = DVector::zeros(svd.singular_values.len());
            for (k, s) in svd.singular_values.iter().enumerate() {
                coef[k] = s / (s * s + lambda) * utr[k];
            }
            let ds = vt.transpose() * coef;
            let mut trial: Vec<f64> = (0..q).map(|c| u[c] + ds[c] / scale[c]).collect();
            project(&mut trial);
            let rel_step = (0..q)
                .map(|c| (trial[c] - u[c]).abs() / u[c].abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            if rel_step < options.step_tol {
                small_step = true;
                break;
            }
            match evaluate(problem, &trial, data, &y, &opts) {
                Ok(next) if next.sse < cur.sse => {
                    u = trial;
                    cur = next;
                    lambda = (lambda * 0.1).max(1e-15);
                    accepted = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if small_step {
            termination = Termination::Step;
            break;
        }
        if !accepted {
            termination = Termination::Stalled;
            break;
        }
    }

    let converged = matches!(
        termination,
        Termination::Gradient | Termination::Step | Termination::ZeroResidual
    );
    let (theta_hat, x0_hat) = problem.unknowns.unpack(&u, &problem.theta, &problem.x0);
    Ok(FitResult {
        names: problem.names(),
        estimate: u,
        theta_hat,
        x0_hat,
        sse: cur.sse,
        sigma2_hat: cur.sse / dof as f64,
        dof,
        n_obs: data.n_obs(),
        iterations,
        converged,
        termination,
        gradient_cosine: cosine,
        residuals: cur.r,
    })
}
