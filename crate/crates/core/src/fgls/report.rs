//! Plain-text, markdown and CSV fit summaries.

use std::io::Write;

use super::FglsFit;
use crate::error::{Error, Result};
use crate::numfmt::g6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Markdown,
    Csv,
}

fn summary_rows(fit: &FglsFit) -> Vec<(&'static str, String)> {
    let theta = fit.theta_hat().map_or_else(|| "NA".to_string(), g6);
    vec![
        ("method", fit.method.to_string()),
        ("basis", fit.basis_family().to_string()),
        ("K", fit.k().to_string()),
        ("covariance", fit.covariance().family.name().to_string()),
        ("theta", theta),
        ("sigma2", g6(fit.sigma2_hat())),
        ("df", g6(fit.gls.df)),
        ("gccv", g6(fit.gls.gccv)),
        ("gccv_decorrelated", g6(fit.gls.gccv_decorrelated)),
        ("y_mean", g6(fit.y_mean)),
        ("n", fit.gls.residuals.len().to_string()),
        ("iterations", fit.iterations.to_string()),
        ("converged", fit.converged.to_string()),
    ]
}

/// Method, basis, `K`, `θ̂`, `σ̂²`, `tr(C)` and GCCV.
pub fn write_summary<W: Write>(fit: &FglsFit, mut out: W, format: ReportFormat) -> Result<()> {
    let rows = summary_rows(fit);
    match format {
        ReportFormat::Text => {
            let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
            for (k, v) in rows {
                writeln!(out, "{k:<width$}  {v}")?;
            }
        }
        ReportFormat::Markdown => {
            writeln!(out, "| key | value |\n|:--|--:|")?;
            for (k, v) in rows {
                writeln!(out, "| {k} | {v} |")?;
            }
        }
        ReportFormat::Csv => {
            writeln!(out, "key,value")?;
            for (k, v) in rows {
                writeln!(out, "{k},{v}")?;
            }
        }
    }
    Ok(())
}

/// `β̂(t)` on the grid, one column per covariate.
pub fn write_beta_csv<W: Write>(fit: &FglsFit, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["t".to_string()];
    header.extend((1..=fit.components.len()).map(|c| format!("beta_{c}")));
    w.write_record(&header).map_err(io)?;
    let grid = fit.components[0].basis.grid();
    let same_grid = fit
        .components
        .iter()
        .all(|c| c.basis.grid().is_compatible(grid));
    if !same_grid {
        return Err(Error::InvalidInput(
            "covariates live on different grids; write one table per covariate".into(),
        ));
    }
    for (m, t) in grid.points().iter().enumerate() {
        let mut rec = vec![g6(*t)];
        rec.extend(fit.components.iter().map(|c| g6(c.beta_hat.values()[m])));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
