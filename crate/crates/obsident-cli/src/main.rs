//! `obsident` command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use obsident::data::{emit_plot_data, run_case_study, CaseStudyId, Table};
use obsident::estimation::{ols_fit, report_at, Dataset, DofConvention, FitOptions, Problem, Unknowns};
use obsident::observability::{orc_generic, orc_rank};
use obsident::observers::{prepare, Family, NoiseKind, NoiseSpec, ObserverConfig};
use obsident::ode::{integrate_with, linspace, SolverOptions, Tolerances};
use obsident::zoo::{by_id, ModelId, ZooEntry};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "OBSIDENT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "obsident", version, about = "Observability, observers and identifiability for epidemic ODE models")]
struct Cli {
    /// Seed for noise streams and random sample points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative integrator tolerance.
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    /// Absolute integrator tolerance.
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Output file (a directory for case-study).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in models.
    Models,
    /// Integrate a model and write its outputs as CSV.
    Simulate(SimulateArgs),
    /// Observability rank condition at a point or at sampled points.
    Rank(RankArgs),
    /// Run an observer against its truth model.
    Observe(ObserveArgs),
    /// Least-squares fit of a model to CSV data.
    Fit(FitArgs),
    /// Fisher information and confidence intervals at given values.
    Fim(FitArgs),
    /// Fit an embedded dataset and check the expected results.
    CaseStudy(CaseStudyArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    model: ModelId,
    /// Parameter override, `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_assignment)]
    params: Vec<(String, f64)>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    None,
    Uniform,
    Gaussian,
    Counting,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Uniform => NoiseKind::Uniform,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Counting => NoiseKind::Counting,
        }
    }
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "none")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    /// Round every sample to an integer.
    #[arg(long)]
    round: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// End time; defaults to the model's documented horizon.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Number of output times.
    #[arg(long, conflicts_with = "dt")]
    points: Option<usize>,
    /// Output spacing.
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Also write the states (plot table instead of a dataset).
    #[arg(long)]
    states: bool,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// State at which to test; sampled admissible states when absent.
    #[arg(long, value_delimiter = ',')]
    point: Option<Vec<f64>>,
    /// Treat the parameters as extra constant states.
    #[arg(long)]
    augment: bool,
    /// Highest Lie derivative order.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Debug)]
struct ObserveArgs {
    #[arg(long)]
    family: Family,
    /// JSON observer configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Assigned real spectrum, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    spectrum: Option<Vec<f64>>,
    /// Initial observer state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Measurement sampling period.
    #[arg(long, default_value_t = 1.0)]
    sample_dt: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// CSV with header `t,y` or `t,y1,…`.
    #[arg(long)]
    data: PathBuf,
    /// Unknowns and their values: a JSON object such as
    /// `{"beta": 2, "gamma": 0.5, "S0": 15000}`, or a path to one.
    #[arg(long, alias = "at")]
    guess: String,
    #[arg(long, value_parser = parse_dof, default_value = "known-x0")]
    dof_convention: DofConvention,
    /// Noise variance for `fim`; `SSE/dof` at the given values when absent.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Two-sided confidence level for `fim`.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 400)]
    max_iterations: usize,
}

#[derive(Args, Debug)]
struct CaseStudyArgs {
    id: CaseStudyId,
}

/// Invalid input detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_assignment(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("cannot parse '{v}' as a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_dof(s: &str) -> std::result::Result<DofConvention, String> {
    s.parse().map_err(|e: obsident::Error| e.to_string())
}

fn tolerances(cli: &Cli, default: Tolerances) -> Tolerances {
    Tolerances {
        rel: cli.tol_rel.unwrap_or(default.rel),
        abs: cli.tol_abs.unwrap_or(default.abs),
    }
}

/// Where the main artifact goes: `--out`, else the env directory, else stdout.
fn destination(cli: &Cli, default_name: &str) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default_name)))
}

fn write_text(dest: Option<&Path>, text: &str) -> Result<()> {
    match dest {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn model_point(args: &ModelArgs) -> Result<(ZooEntry, Vec<f64>, Vec<f64>)> {
    let entry = by_id(args.model);
    let theta = entry.params_with(&args.params).map_err(|e| usage(e.to_string()))?;
    let x0 = args.x0.clone().unwrap_or_else(|| entry.default_x0.clone());
    entry
        .spec
        .check_dims(&x0, &theta)
        .map_err(|e| usage(e.to_string()))?;
    Ok((entry, theta, x0))
}

fn cmd_models() -> Result<()> {
    let list: Vec<_> = ModelId::ALL
        .iter()
        .map(|&id| {
            let e = by_id(id);
            serde_json::json!({
                "id": id,
                "states": e.spec.state_names(),
                "params": e.spec.param_names(),
                "outputs": e.spec.output_names(),
                "default_params": e.default_params,
                "default_x0": e.default_x0,
                "horizon": e.horizon,
                "admissible_set": e.admissible_set,
                "notes": e.notes,
            })
        })
        .collect();
    write_text(None, &to_json(&list)?)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let (entry, theta, x0) = model_point(&args.model)?;
    let t_end = args.t_end.unwrap_or(entry.horizon);
    if !(t_end > args.t0) {
        return Err(usage("--t-end must exceed --t0"));
    }
    let grid = match (args.points, args.dt) {
        (_, Some(dt)) if dt > 0.0 => {
            let n = ((t_end - args.t0) / dt + 1e-9).floor() as usize;
            (0..=n).map(|k| args.t0 + k as f64 * dt).collect()
        }
        (_, Some(_)) => return Err(usage("--dt must be positive")),
        (Some(n), None) if n >= 2 => linspace(args.t0, t_end, n),
        (Some(_), None) => return Err(usage("--points must be at least 2")),
        (None, None) => linspace(args.t0, t_end, 101),
    };
    let opts = SolverOptions::with_tol(tolerances(cli, Tolerances::default()));
    let mut traj = integrate_with(&entry.spec, &x0, &theta, &grid, &opts)?;
    let noise = NoiseSpec {
        kind: args.noise.noise.into(),
        amplitude: args.noise.amplitude,
        sample_dt: 1.0,
        round: args.noise.round,
    };
    if !noise.is_exact() {
        for j in 0..entry.spec.n_outputs() {
            let mut col = traj.output(j);
            noise.corrupt(&mut col, cli.seed.wrapping_add(j as u64))?;
            for (y, v) in traj.y.iter_mut().zip(col) {
                y[j] = v;
            }
        }
    }
    let text = if args.states {
        Table::from_trajectory(&entry.spec, &traj).to_csv_string()?
    } else {
        let data = Dataset {
            name: entry.id.to_string(),
            t: traj.t.clone(),
            y: traj.y.iter().map(|v| v.iter().copied().collect()).collect(),
            outputs: (0..entry.spec.n_outputs()).collect(),
            dof_convention: DofConvention::KnownX0,
        };
        let mut buf = vec![];
        data.write_csv(&mut buf)?;
        String::from_utf8(buf)?
    };
    write_text(destination(cli, &format!("simulate-{}.csv", entry.id)).as_deref(), &text)
}

fn cmd_rank(cli: &Cli, args: &RankArgs) -> Result<()> {
    let (entry, theta, _) = model_point(&args.model)?;
    let text = match &args.point {
        Some(x) => {
            if x.len() != entry.spec.n_states() {
                return Err(usage(format!("--point needs {} values", entry.spec.n_states())));
            }
            let point: Vec<f64> = if args.augment {
                x.iter().chain(&theta).copied().collect()
            } else {
                x.clone()
            };
            to_json(&orc_rank(&entry.spec, &point, &theta, args.augment, args.order)?)?
        }
        None => to_json(&orc_generic(&entry, &theta, args.augment, args.order, &[], cli.seed)?)?,
    };
    write_text(destination(cli, &format!("rank-{}.json", entry.id)).as_deref(), &text)
}

#[derive(Serialize)]
struct ObserveSummary {
    family: Family,
    model: ModelId,
    noise: NoiseSpec,
    seed: u64,
    expected_rate: f64,
    empirical_decay_rate: Option<f64>,
    innovation_decay_rate: Option<f64>,
    time_to_1_percent: Option<f64>,
    initial_error: f64,
    final_error: f64,
    tail_error: f64,
    state_scale: f64,
    warnings: Vec<String>,
    csv: Option<PathBuf>,
}

fn cmd_observe(cli: &Cli, args: &ObserveArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let c: ObserverConfig = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            if c.family != args.family {
                return Err(usage(format!("config is for {}, not {}", c.family, args.family)));
            }
            c
        }
        None => ObserverConfig::for_family(args.family),
    };
    if let Some(s) = &args.spectrum {
        config = config.with_spectrum(s);
    }
    if let Some(x) = &args.initial {
        config = config.with_initial(x.clone());
    }
    if let Some(h) = args.horizon {
        config = config.with_horizon(h);
    }
    if let Some(n) = args.points {
        config.points = n;
    }
    config.tol = tolerances(cli, config.tol);
    let noise = NoiseSpec {
        kind: args.noise.noise.into(),
        amplitude: args.noise.amplitude,
        sample_dt: args.sample_dt,
        round: args.noise.round,
    };
    let setup = prepare(&config)?;
    let measurement = setup.measurements(&noise, cli.seed)?;
    let run = setup.run_with(&measurement)?;
    let csv = destination(cli, &format!("observe-{}.csv", config.family));
    if let Some(p) = &csv {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        emit_plot_data(&Table::from_observer_run(&run), p)?;
    }
    let summary = ObserveSummary {
        family: config.family,
        model: config.model_id,
        noise,
        seed: cli.seed,
        expected_rate: setup.expected_rate,
        empirical_decay_rate: run.empirical_decay_rate,
        innovation_decay_rate: run.innovation_decay_rate(),
        time_to_1_percent: run.time_to_fraction(0.01),
        initial_error: run.error_norm[0],
        final_error: *run.error_norm.last().expect("nonempty run"),
        tail_error: run.tail_error,
        state_scale: run.state_scale,
        warnings: run.warnings.clone(),
        csv,
    };
    write_text(None, &to_json(&summary)?)
}

fn read_guess(spec: &str) -> Result<BTreeMap<String, f64>> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec).with_context(|| format!("reading guess file {spec}"))?
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("--guess must be a JSON object of numbers: {e}")))
}

fn build_problem(args: &FitArgs) -> Result<(Problem, Dataset)> {
    let (entry, mut theta, mut x0) = model_point(&args.model)?;
    let guess = read_guess(&args.guess)?;
    let mut params = vec![];
    let mut states = vec![];
    for (name, &value) in &guess {
        if let Some(i) = entry.spec.param_names().iter().position(|n| n == name) {
            params.push(i);
            theta[i] = value;
        } else if let Some(i) = entry.spec.state_names().iter().position(|n| format!("{n}0") == *name) {
            states.push(i);
            x0[i] = value;
        } else {
            return Err(usage(format!(
                "unknown '{name}': expected one of {:?} or a state name followed by 0",
                entry.spec.param_names()
            )));
        }
    }
    params.sort_unstable();
    states.sort_unstable();
    let unknowns = Unknowns::params(&params).with_states(&states);
    let problem = Problem::new(entry.spec.clone(), theta, x0, unknowns).map_err(|e| usage(e.to_string()))?;
    let data = Dataset::read_csv_path(&args.data, args.dof_convention)
        .with_context(|| format!("reading {}", args.data.display()))?;
    if data.outputs.len() > entry.spec.n_outputs() {
        return Err(usage(format!(
            "{} has {} value columns but {} has {} outputs",
            args.data.display(),
            data.outputs.len(),
            entry.id,
            entry.spec.n_outputs()
        )));
    }
    Ok((problem, data))
}

fn fit_options(cli: &Cli, args: &FitArgs) -> FitOptions {
    let mut o = FitOptions::default();
    o.tol = tolerances(cli, o.tol);
    o.max_iterations = args.max_iterations;
    o
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<bool> {
    let (problem, data) = build_problem(args)?;
    let fit = ols_fit(&problem, &data, &fit_options(cli, args))?;
    write_text(destination(cli, "fit.json").as_deref(), &to_json(&fit)?)?;
    if !fit.converged {
        eprintln!("warning: fit did not converge ({:?})", fit.termination);
    }
    Ok(fit.converged)
}

fn cmd_fim(cli: &Cli, args: &FitArgs) -> Result<()> {
    let (problem, data) = build_problem(args)?;
    let opts = fit_options(cli, args).solver();
    let u = problem.initial_guess();
    let sigma2 = match args.sigma2 {
        Some(s) => s,
        None => {
            let pred = problem.predict(&u, &data, &opts)?;
            let sse: f64 = data.stacked().iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
            let dof = problem.dof(&data);
            if dof < 1 {
                bail!("{} observations leave {dof} degrees of freedom", data.n_obs());
            }
            sse / dof as f64
        }
    };
    let report = report_at(&problem, &data, &u, sigma2, args.level, &opts)?;
    write_text(destination(cli, "fim.json").as_deref(), &to_json(&report)?)
}

fn cmd_case_study(cli: &Cli, args: &CaseStudyArgs) -> Result<bool> {
    let dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let run = run_case_study(args.id)?;
    let report = &run.report;
    let json = dir.join(format!("{}.json", args.id));
    let csv = dir.join(format!("{}-fit.csv", args.id));
    std::fs::write(&json, to_json(report)?).with_context(|| format!("writing {}", json.display()))?;
    emit_plot_data(&run.curve, &csv)?;
    let mut out = std::io::stdout().lock();
    for c in &report.checks {
        writeln!(
            out,
            "{} {:<30} actual {:<14.8e} expected {:.8e} ({:?})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.actual,
            c.expected,
            c.rule
        )?;
    }
    writeln!(
        out,
        "{} {}: converged={} ({:?}), report {}, curve {}",
        if report.pass { "PASS" } else { "FAIL" },
        args.id,
        report.converged,
        report.termination,
        json.display(),
        csv.display()
    )?;
    Ok(report.pass)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(r) = cli.tol_rel.filter(|r| !(*r > 0.0)) {
        return Err(usage(format!("--tol-rel must be positive, got {r}")));
    }
    if let Some(a) = cli.tol_abs.filter(|a| !(*a > 0.0)) {
        return Err(usage(format!("--tol-abs must be positive, got {a}")));
    }
    match &cli.command {
        Command::Models => cmd_models().map(|_| true),
        Command::Simulate(a) => cmd_simulate(cli, a).map(|_| true),
        Command::Rank(a) => cmd_rank(cli, a).map(|_| true),
        Command::Observe(a) => cmd_observe(cli, a).map(|_| true),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Fim(a) => cmd_fim(cli, a).map(|_| true),
        Command::CaseStudy(a) => cmd_case_study(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
