use obsident::data::dataset_boarding_school;
use obsident::estimation::{fim_report, ols_fit, FitOptions, Problem, Unknowns};
use obsident::zoo::sir_classical;

fn main() -> obsident::Result<()> {
    let e = sir_classical(2.0, 0.5, 763.0, 1.0)?;
    let problem = Problem::new(e.spec, e.default_params, vec![762.0, 1.0], Unknowns::params(&[0, 1]))?;
    let data = dataset_boarding_school();
    let fit = ols_fit(&problem, &data, &FitOptions::default())?;
    let report = fim_report(&problem, &data, &fit, &FitOptions::default().solver())?;
    for (k, name) in fit.names.iter().enumerate() {
        println!("{name} = {:.4} ± {:.4}", fit.estimate[k], report.half_widths[k]);
    }
    Ok(())
}
