//! Plot-ready CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::observers::ObserverRun;
use crate::ode::{ModelSpec, Trajectory};

/// Named columns of numbers; `None` is written as an empty field.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn names(base: &str, k: usize) -> Vec<String> {
    if k == 1 {
        vec![base.to_string()]
    } else {
        (1..=k).map(|i| format!("{base}_{i}")).collect()
    }
}

impl Table {
    /// `t`, one column per state, one per output.
    pub fn from_trajectory(model: &ModelSpec, traj: &Trajectory) -> Table {
        let mut header = vec!["t".to_string()];
        header.extend(model.state_names().iter().cloned());
        header.extend(model.output_names().iter().cloned());
        let rows = traj
            .t
            .iter()
            .zip(traj.x.iter().zip(&traj.y))
            .map(|(&t, (x, y))| {
                std::iter::once(t)
                    .chain(x.iter().copied())
                    .chain(y.iter().copied())
                    .map(Some)
                    .collect()
            })
            .collect();
        Table { header, rows }
    }

    /// `t, error_norm, innovation…, y…, x…, x_hat…`.
    pub fn from_observer_run(run: &ObserverRun) -> Table {
        let ni = run.innovation.first().map_or(0, |v| v.len());
        let ny = run.y.first().map_or(0, |v| v.len());
        let nx = run.x_true.first().map_or(0, |v| v.len());
        let mut header = vec!["t".to_string(), "error_norm".to_string()];
        header.extend(names("innovation", ni));
        header.extend(names("y", ny));
        header.extend(names("x", nx));
        header.extend(names("x_hat", nx));
        let rows = (0..run.t.len())
            .map(|k| {
                let mut row = vec![run.t[k], run.error_norm[k]];
                if ni > 0 {
                    row.extend(&run.innovation[k]);
                }
                row.extend(&run.y[k]);
                row.extend(&run.x_true[k]);
                row.extend(&run.x_hat[k]);
                row.into_iter().map(Some).collect()
            })
            .collect();
        Table { header, rows }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(Error::Dimension(format!(
                    "row of {} fields under a header of {}",
                    row.len(),
                    self.header.len()
                )));
            }
            w.write_record(row.iter().map(|v| v.map(|v| format!("{v}")).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = vec![];
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Writes `table` as CSV to `path`.
pub fn emit_plot_data(table: &Table, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    table.write_csv(std::io::BufWriter::new(file))
}
