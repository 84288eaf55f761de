//! Summary tables of a simulation study.

use std::io::Write;

use super::config::SimPlan;
use super::sim::{run_simulation, MethodSummary, SimReport};
use crate::basis::BasisFamily;
use crate::error::{Error, Result};
use crate::fgls::Method;
use crate::numfmt::{g6, sig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::Config(format!(
                "unknown format {s:?} (expected csv or markdown)"
            ))),
        }
    }
}

/// Labelled rows of numbers.
struct Table {
    title: String,
    header: Vec<String>,
    rows: Vec<(Vec<String>, Vec<f64>)>,
    decimals: usize,
}

impl Table {
    fn write<W: Write>(&self, format: TableFormat, mut out: W) -> Result<()> {
        match format {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                let io = |e: csv::Error| Error::Io(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for (labels, values) in &self.rows {
                    let rec = labels.iter().cloned().chain(values.iter().map(|v| g6(*v)));
                    w.write_record(rec.collect::<Vec<_>>()).map_err(io)?;
                }
                w.flush()?;
            }
            TableFormat::Markdown => {
                writeln!(out, "**{}**\n", self.title)?;
                writeln!(out, "| {} |", self.header.join(" | "))?;
                let labels = self.rows.first().map_or(0, |r| r.0.len());
                let align: Vec<&str> = (0..self.header.len())
                    .map(|j| if j < labels { ":--" } else { "--:" })
                    .collect();
                writeln!(out, "|{}|", align.join("|"))?;
                for (labels, values) in &self.rows {
                    let cells = labels
                        .iter()
                        .cloned()
                        .chain(values.iter().map(|v| fixed(*v, self.decimals)));
                    writeln!(out, "| {} |", cells.collect::<Vec<_>>().join(" | "))?;
                }
            }
        }
        Ok(())
    }
}

fn fixed(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        sig(v, 6)
    }
}

fn basis_label(b: BasisFamily) -> &'static str {
    match b {
        BasisFamily::Fpc => "PC",
        BasisFamily::BSpline { .. } => "BSP",
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Lm => "LM",
        Method::Gls => "GLS",
        Method::Igls => "iGLS",
    }
}

/// Every cell of a plan, run in plan order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStudy {
    pub plan: SimPlan,
    pub reports: Vec<SimReport>,
}

impl SimStudy {
    pub fn run(plan: &SimPlan) -> Result<SimStudy> {
        let reports = plan
            .cells()?
            .iter()
            .map(run_simulation)
            .collect::<Result<Vec<_>>>()?;
        Ok(SimStudy {
            plan: plan.clone(),
            reports,
        })
    }

    pub fn cell(&self, snr: f64, phi: f64, basis: BasisFamily) -> Option<&SimReport> {
        self.reports
            .iter()
            .find(|r| r.config.snr == snr && r.config.phi == phi && r.config.basis == basis)
    }

    fn summary(
        &self,
        snr: f64,
        phi: f64,
        basis: BasisFamily,
        method: Method,
    ) -> Option<&MethodSummary> {
        self.cell(snr, phi, basis).and_then(|r| r.method(method))
    }

    fn value(
        &self,
        snr: f64,
        phi: f64,
        basis: BasisFamily,
        method: Method,
        f: impl Fn(&MethodSummary) -> f64,
    ) -> f64 {
        self.summary(snr, phi, basis, method).map_or(f64::NAN, f)
    }

    fn phi_basis_header(&self, first: &[&str]) -> Vec<String> {
        let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
        for &b in &self.plan.bases {
            for &phi in &self.plan.phis {
                h.push(format!("phi={phi:.1} {}", basis_label(b)));
            }
        }
        h
    }

    /// The method whose selected dimension is tabulated: GLS when run.
    fn k_method(&self) -> Method {
        [Method::Gls, Method::Igls, Method::Lm]
            .into_iter()
            .find(|m| self.plan.methods.contains(m))
            .unwrap_or(Method::Lm)
    }

    fn table_k(&self) -> Table {
        let m = self.k_method();
        let rows = self
            .plan
            .snrs
            .iter()
            .map(|&snr| {
                let values =
                    self.cells_by_basis_phi(|b, phi| self.value(snr, phi, b, m, |s| s.mean_k));
                (vec![format!("{snr:.2}")], values)
            })
            .collect();
        Table {
            title: format!(
                "Average number of basis elements selected by GCCV ({})",
                method_label(m)
            ),
            header: self.phi_basis_header(&["snr"]),
            rows,
            decimals: 2,
        }
    }

    fn cells_by_basis_phi(&self, f: impl Fn(BasisFamily, f64) -> f64) -> Vec<f64> {
        self.plan
            .bases
            .iter()
            .flat_map(|&b| self.plan.phis.iter().map(move |&phi| (b, phi)))
            .map(|(b, phi)| f(b, phi))
            .collect()
    }

    fn table_by_method(
        &self,
        title: &str,
        decimals: usize,
        methods: &[Method],
        f: fn(&MethodSummary) -> f64,
    ) -> Table {
        let mut rows = Vec::new();
        for &snr in &self.plan.snrs {
            for &m in methods {
                let values = self.cells_by_basis_phi(|b, phi| self.value(snr, phi, b, m, f));
                rows.push((
                    vec![format!("{snr:.2}"), method_label(m).to_string()],
                    values,
                ));
            }
        }
        Table {
            title: title.to_string(),
            header: self.phi_basis_header(&["snr", "Model"]),
            rows,
            decimals,
        }
    }

    fn table_mspe(&self) -> Table {
        let horizons = &self.plan.horizons;
        let mut header = vec!["snr".to_string(), "Model".to_string()];
        for &phi in &self.plan.phis {
            for h in horizons {
                header.push(format!("phi={phi:.1} h={h}"));
            }
        }
        let mut rows = Vec::new();
        for &snr in &self.plan.snrs {
            for &m in &self.plan.methods {
                for &b in &self.plan.bases {
                    let values = self
                        .plan
                        .phis
                        .iter()
                        .flat_map(|&phi| {
                            (0..horizons.len())
                                .map(move |j| self.value(snr, phi, b, m, |s| s.mspe[j]))
                        })
                        .collect();
                    rows.push((
                        vec![
                            format!("{snr:.2}"),
                            format!("{}.{}", method_label(m), basis_label(b)),
                        ],
                        values,
                    ));
                }
            }
        }
        Table {
            title: "Mean square prediction errors by lag".into(),
            header,
            rows,
            decimals: 2,
        }
    }

    fn table(&self, index: usize) -> Result<Table> {
        Ok(match index {
            1 => self.table_k(),
            2 => self.table_by_method("Mean square error of beta", 2, &self.plan.methods, |s| {
                s.beta_mse
            }),
            3 => {
                // the identity fit has no φ̂ of its own
                let fitted: Vec<Method> = self
                    .plan
                    .methods
                    .iter()
                    .copied()
                    .filter(|m| *m != Method::Lm)
                    .collect();
                self.table_by_method("Mean square error of phi", 3, &fitted, |s| s.phi_mse)
            }
            4 => self.table_mspe(),
            _ => return Err(Error::InvalidInput(format!("no table {index}"))),
        })
    }

    /// Writes summary table 1 (selected K), 2 (β error), 3 (φ error) or
    /// 4 (prediction error).
    pub fn write_table<W: Write>(&self, index: usize, format: TableFormat, out: W) -> Result<()> {
        self.table(index)?.write(format, out)
    }

    /// One row per cell, method and successful replica.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec![
            "scenario",
            "snr",
            "phi",
            "basis",
            "replica",
            "method",
            "k",
            "beta_error",
            "phi_hat",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        header.extend(self.plan.horizons.iter().map(|h| format!("sq_error_h{h}")));
        w.write_record(&header).map_err(io)?;
        for r in &self.reports {
            let c = &r.config;
            for rec in &r.records {
                for m in &rec.methods {
                    let mut row = vec![
                        c.scenario.to_string(),
                        g6(c.snr),
                        g6(c.phi),
                        basis_label(c.basis).to_string(),
                        rec.index.to_string(),
                        method_label(m.method).to_string(),
                        m.k.to_string(),
                        g6(m.beta_error),
                        g6(m.phi_hat),
                    ];
                    row.extend(m.sq_errors.iter().map(|v| g6(*v)));
                    w.write_record(&row).map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Failed replicas per cell.
    pub fn write_failures_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["snr", "phi", "basis", "replica", "error"])
            .map_err(io)?;
        for r in &self.reports {
            for (i, e) in &r.failures {
                let c = &r.config;
                w.write_record([
                    g6(c.snr),
                    g6(c.phi),
                    basis_label(c.basis).into(),
                    i.to_string(),
                    e.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
