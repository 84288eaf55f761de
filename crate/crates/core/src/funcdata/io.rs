//! CSV ingestion for functional samples and scalar responses.
//!
//! Wide format: one row per curve, header cells after any leading key
//! columns are the grid points. Long format: `id,t,value` rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{FunctionalSample, Grid};
use crate::error::{Error, Result};

/// A wide CSV: the leading key columns of each row plus the curves.
#[derive(Debug, Clone)]
pub struct WideTable {
    pub key_names: Vec<String>,
    pub keys: Vec<Vec<String>>,
    pub sample: FunctionalSample,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(r)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn parse_f64(s: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        column,
        message: format!("cannot parse {s:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            column,
            message: "missing or non-finite value".into(),
        });
    }
    Ok(v)
}

/// Reads a wide CSV. Leading header cells that are not numbers are key
/// columns; the remaining header cells must be strictly increasing reals.
pub fn read_wide_csv<R: Read>(input: R) -> Result<WideTable> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                message: "empty file".into(),
            })
        }
    };
    let header_line = header.position().map(|p| p.line()).unwrap_or(1);
    let n_keys = header
        .iter()
        .take_while(|c| c.parse::<f64>().is_err())
        .count();
    let mut points = Vec::with_capacity(header.len() - n_keys);
    for (j, cell) in header.iter().enumerate().skip(n_keys) {
        points.push(parse_f64(cell, header_line, j + 1)?);
    }
    if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            line: header_line,
            column: n_keys + i + 2,
            message: "grid points in header must be strictly increasing".into(),
        });
    }
    let grid = Grid::new(points).map_err(|e| Error::Parse {
        line: header_line,
        column: 0,
        message: e.to_string(),
    })?;
    let m = grid.len();
    let key_names = header.iter().take(n_keys).map(str::to_string).collect();

    let mut keys = Vec::new();
    let mut data = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != n_keys + m {
            return Err(Error::Parse {
                line,
                column: rec.len().min(n_keys + m) + 1,
                message: format!("expected {} fields, found {}", n_keys + m, rec.len()),
            });
        }
        keys.push(rec.iter().take(n_keys).map(str::to_string).collect());
        for (j, cell) in rec.iter().enumerate().skip(n_keys) {
            data.push(parse_f64(cell, line, j + 1)?);
        }
    }
    let n = keys.len();
    let values = DMatrix::from_row_slice(n, m, &data);
    let mut sample = FunctionalSample::new(grid, values)?;
    if n_keys > 0 {
        let ids = keys.iter().map(|k: &Vec<String>| k.join(":")).collect();
        sample = sample.with_ids(ids)?;
    }
    Ok(WideTable {
        key_names,
        keys,
        sample,
    })
}

/// Reads `id,t,value` rows. Every id must be observed on the same set of
/// points; ids keep their order of first appearance.
pub fn read_long_csv<R: Read>(input: R) -> Result<FunctionalSample> {
    let mut rdr = reader(input);
    let mut order: Vec<String> = Vec::new();
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                column: rec.len().min(3) + 1,
                message: format!("expected 3 fields (id,t,value), found {}", rec.len()),
            });
        }
        if k == 0 && rec[1].parse::<f64>().is_err() {
            continue;
        }
        let t = parse_f64(&rec[1], line, 2)?;
        let v = parse_f64(&rec[2], line, 3)?;
        let id = rec[0].to_string();
        if !curves.contains_key(&id) {
            order.push(id.clone());
        }
        curves.entry(id).or_default().push((t, v));
    }
    let first = order.first().ok_or_else(|| Error::Parse {
        line: 1,
        column: 0,
        message: "no observations".into(),
    })?;
    let mut reference: Vec<(f64, f64)> = curves[first].clone();
    reference.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points: Vec<f64> = reference.iter().map(|p| p.0).collect();
    let grid = Grid::new(points.clone()).map_err(|e| Error::Parse {
        line: 0,
        column: 2,
        message: format!("curve {first}: {e}"),
    })?;
    let mut rows = Vec::with_capacity(order.len());
    for id in &order {
        let mut obs = curves[id].clone();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let same = obs.len() == points.len()
            && obs
                .iter()
                .zip(&points)
                .all(|(o, t)| (o.0 - t).abs() <= 1e-12 * (1.0 + t.abs()));
        if !same {
            return Err(Error::InvalidInput(format!(
                "curve {id} is not observed on the same grid as curve {first}"
            )));
        }
        rows.push(obs.into_iter().map(|o| o.1).collect::<Vec<_>>());
    }
    FunctionalSample::from_rows(grid, &rows)?.with_ids(order)
}

/// Reads a response file: a header then one value per row, optionally
/// preceded by an id column.
pub fn read_response_csv<R: Read>(input: R) -> Result<(Option<Vec<String>>, Vec<f64>)> {
    let mut rdr = reader(input);
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if k == 0
            && rec
                .iter()
                .next_back()
                .is_some_and(|c| c.parse::<f64>().is_err())
        {
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w || !(1..=2).contains(&w) {
            return Err(Error::Parse {
                line,
                column: rec.len() + 1,
                message: format!("expected {} field(s), found {}", w.clamp(1, 2), rec.len()),
            });
        }
        if w == 2 {
            ids.push(rec[0].to_string());
        }
        values.push(parse_f64(&rec[w - 1], line, w)?);
    }
    Ok(((width == Some(2)).then_some(ids), values))
}

/// Writes a sample in wide format with an `id` column.
pub fn write_wide_csv<W: Write>(out: W, sample: &FunctionalSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(sample.grid().points().iter().map(|t| format!("{t}")));
    w.write_record(&header)
        .map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..sample.len() {
        let id = sample
            .ids()
            .map(|ids| ids[i].clone())
            .unwrap_or_else(|| (i + 1).to_string());
        let mut row = vec![id];
        row.extend(sample.values().row(i).iter().map(|v| format!("{v}")));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
