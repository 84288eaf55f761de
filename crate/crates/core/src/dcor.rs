//! Empirical distance covariance and distance correlation.
//!
//! Uses the biased V-statistic: with double-centered distance matrices `A`
//! and `B`, `V²_n(X, Y) = n^{-2} Σ_kl A_kl B_kl` and
//! `R_n = sqrt(V²_n(X, Y) / sqrt(V²_n(X) V²_n(Y)))`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::funcdata::FunctionalSample;
use crate::numfmt::{f2, g6};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// Quadrature-weighted `L²` distance between curves.
    L2,
}

/// Pairwise distances `a_kl` of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    /// Euclidean distances between the rows of `x`.
    pub fn from_rows(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let d = DMatrix::from_fn(n, n, |i, j| (x.row(i) - x.row(j)).norm());
        DistanceMatrix {
            d,
            metric: Metric::Euclidean,
        }
    }

    pub fn from_scalars(x: &[f64]) -> Self {
        let n = x.len();
        DistanceMatrix {
            d: DMatrix::from_fn(n, n, |i, j| (x[i] - x[j]).abs()),
            metric: Metric::Euclidean,
        }
    }

    pub fn from_curves(x: &FunctionalSample) -> Self {
        let n = x.len();
        let w = x.grid().weights();
        let v = x.values();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let s: f64 = (0..w.len())
                    .map(|m| w[m] * (v[(i, m)] - v[(j, m)]).powi(2))
                    .sum();
                d[(i, j)] = s.sqrt();
                d[(j, i)] = d[(i, j)];
            }
        }
        DistanceMatrix {
            d,
            metric: Metric::L2,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.nrows() == 0
    }
}

/// `A_kl = a_kl − ā_k. − ā_.l + ā_..`.
pub fn double_center(d: &DistanceMatrix) -> DMatrix<f64> {
    let a = &d.d;
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let nf = n as f64;
    let row: Vec<f64> = a.row_iter().map(|r| r.sum() / nf).collect();
    let col: Vec<f64> = a.column_iter().map(|c| c.sum() / nf).collect();
    let grand = row.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |k, l| a[(k, l)] - row[k] - col[l] + grand)
}

/// A sample for distance computations.
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Scalars(&'a [f64]),
    /// One observation per row.
    Vectors(&'a DMatrix<f64>),
    Curves(&'a FunctionalSample),
}

impl Sample<'_> {
    pub fn len(&self) -> usize {
        match self {
            Sample::Scalars(x) => x.len(),
            Sample::Vectors(x) => x.nrows(),
            Sample::Curves(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distances(&self) -> DistanceMatrix {
        match self {
            Sample::Scalars(x) => DistanceMatrix::from_scalars(x),
            Sample::Vectors(x) => DistanceMatrix::from_rows(x),
            Sample::Curves(x) => DistanceMatrix::from_curves(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcorResult {
    pub r: f64,
    pub v2_xy: f64,
    pub v2_xx: f64,
    pub v2_yy: f64,
    /// One of the samples is constant; `r` is set to 0.
    pub degenerate: bool,
}

fn v2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    a.dot(b) / (n * n)
}

fn from_centered(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DcorResult {
    let v2_xy = v2(a, b).max(0.0);
    let v2_xx = v2(a, a).max(0.0);
    let v2_yy = v2(b, b).max(0.0);
    let denom = (v2_xx * v2_yy).sqrt();
    if denom <= 0.0 {
        return DcorResult {
            r: 0.0,
            v2_xy,
            v2_xx,
            v2_yy,
            degenerate: true,
        };
    }
    DcorResult {
        r: (v2_xy / denom).sqrt().min(1.0),
        v2_xy,
        v2_xx,
        v2_yy,
        degenerate: false,
    }
}

/// Distance correlation from two distance matrices.
pub fn dcor_from_distances(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<DcorResult> {
    if dx.len() != dy.len() {
        return Err(Error::LengthMismatch {
            response: dy.len(),
            curves: dx.len(),
        });
    }
    if dx.len() < 2 {
        return Err(Error::InvalidInput(
            "distance correlation needs n >= 2".into(),
        ));
    }
    Ok(from_centered(&double_center(dx), &double_center(dy)))
}

pub fn distance_correlation(x: Sample<'_>, y: Sample<'_>) -> Result<DcorResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            response: y.len(),
            curves: x.len(),
        });
    }
    dcor_from_distances(&x.distances(), &y.distances())
}

/// Distance correlations among candidates and against responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningTable {
    pub candidates: Vec<String>,
    pub responses: Vec<String>,
    /// `c × (c + r)`: candidate columns first, then responses.
    pub values: DMatrix<f64>,
}

/// Builds the screening table. Every sample must have the same size.
pub fn screening_table(
    candidates: &[(String, Sample<'_>)],
    responses: &[(String, Sample<'_>)],
) -> Result<ScreeningTable> {
    let n = candidates
        .first()
        .map(|c| c.1.len())
        .ok_or_else(|| Error::InvalidInput("no candidate covariates".into()))?;
    for (name, s) in candidates.iter().chain(responses) {
        if s.len() != n {
            return Err(Error::InvalidInput(format!(
                "sample {name} has {} observations, expected {n}",
                s.len()
            )));
        }
    }
    let centered: Vec<DMatrix<f64>> = candidates
        .iter()
        .chain(responses)
        .map(|(_, s)| double_center(&s.distances()))
        .collect();
    let c = candidates.len();
    let cols = c + responses.len();
    let mut values = DMatrix::zeros(c, cols);
    for i in 0..c {
        for j in 0..cols {
            values[(i, j)] = if j < c && j < i {
                values[(j, i)]
            } else {
                from_centered(&centered[i], &centered[j]).r
            };
        }
    }
    Ok(ScreeningTable {
        candidates: candidates.iter().map(|c| c.0.clone()).collect(),
        responses: responses.iter().map(|r| r.0.clone()).collect(),
        values,
    })
}

impl ScreeningTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec![String::new()];
        h.extend(self.candidates.iter().cloned());
        h.extend(self.responses.iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = self.header();
        header[0] = "covariate".into();
        w.write_record(&header).map_err(io)?;
        for (i, name) in self.candidates.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.values.row(i).iter().map(|v| g6(*v)));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned columns with two decimals.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let header = self.header();
        let mut rows: Vec<Vec<String>> = vec![header];
        for (i, name) in self.candidates.iter().enumerate() {
            let mut r = vec![name.clone()];
            r.extend(self.values.row(i).iter().map(|v| f2(*v)));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    if j == 0 {
                        format!("{s:<w$}", w = widths[j])
                    } else {
                        format!("{s:>w$}", w = widths[j])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end())?;
        }
        Ok(())
    }

    /// Markdown table with two decimals.
    pub fn write_markdown<W: Write>(&self, mut out: W) -> Result<()> {
        let header = self.header();
        writeln!(out, "| {} |", header.join(" | "))?;
        writeln!(out, "|{}", "---|".repeat(header.len()))?;
        for (i, name) in self.candidates.iter().enumerate() {
            let vals: Vec<String> = self.values.row(i).iter().map(|v| f2(*v)).collect();
            writeln!(out, "| {} | {} |", name, vals.join(" | "))?;
        }
        Ok(())
    }
}
