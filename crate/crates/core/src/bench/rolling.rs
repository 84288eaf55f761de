//! Rolling-origin forecast evaluation on a panel of groups observed weekly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{list, number, parse_basis, parse_covariance, parse_k_range, parse_pairs};
use super::sim::ar1_path;
use crate::basis::BasisFamily;
use crate::covmodels::CovarianceFamily;
use crate::error::{Error, Result};
use crate::fgls::{predict, select_model, SelectOptions};
use crate::funcdata::{inner_product, read_wide_csv, Curve, FunctionalSample, Grid};
use crate::numfmt::g6;

/// One functional covariate: a curve per group and week, or none.
#[derive(Debug, Clone, PartialEq)]
struct PanelCovariate {
    grid: Grid,
    /// `[group][week]`.
    curves: Vec<Vec<Option<Vec<f64>>>>,
}

/// Weekly responses of several groups with functional covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    groups: Vec<String>,
    weeks: Vec<i64>,
    /// `[group][week]`.
    rates: Vec<Vec<Option<f64>>>,
    covariates: BTreeMap<String, PanelCovariate>,
}

/// Reads `group,week,rate` rows (header required).
pub fn read_panel_rates<R: Read>(input: R) -> Result<Vec<(String, i64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |j: usize| {
            rec.get(j).ok_or(Error::Parse {
                line,
                column: j + 1,
                message: "missing field".into(),
            })
        };
        let week = field(1)?.parse().map_err(|_| Error::Parse {
            line,
            column: 2,
            message: format!("cannot parse week {:?}", &rec[1]),
        })?;
        let rate: f64 = field(2)?.parse().map_err(|_| Error::Parse {
            line,
            column: 3,
            message: format!("cannot parse rate {:?}", &rec[2]),
        })?;
        out.push((field(0)?.to_string(), week, rate));
    }
    Ok(out)
}

/// Reads a wide covariate file keyed by `group,week`.
pub fn read_panel_covariate<R: Read>(input: R) -> Result<(Grid, Vec<(String, i64, Vec<f64>)>)> {
    let table = read_wide_csv(input)?;
    if table.key_names.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!(
                "expected key columns group,week; found {:?}",
                table.key_names
            ),
        });
    }
    let mut rows = Vec::with_capacity(table.keys.len());
    for (i, key) in table.keys.iter().enumerate() {
        let week = key[1].parse().map_err(|_| Error::Parse {
            line: i as u64 + 2,
            column: 2,
            message: format!("cannot parse week {:?}", key[1]),
        })?;
        let values = table.sample.values().row(i).iter().copied().collect();
        rows.push((key[0].clone(), week, values));
    }
    Ok((table.sample.grid().clone(), rows))
}

impl Panel {
    /// Builds a panel from response rows. Groups keep their order of first
    /// appearance; weeks are sorted. Missing (group, week) pairs and
    /// non-finite rates are gaps.
    pub fn new(rates: &[(String, i64, f64)]) -> Result<Self> {
        let mut groups: Vec<String> = Vec::new();
        for (g, _, _) in rates {
            if !groups.contains(g) {
                groups.push(g.clone());
            }
        }
        let mut weeks: Vec<i64> = rates.iter().map(|r| r.1).collect();
        weeks.sort_unstable();
        weeks.dedup();
        if weeks.is_empty() {
            return Err(Error::InvalidInput("empty panel".into()));
        }
        let mut grid = vec![vec![None; weeks.len()]; groups.len()];
        for (g, w, r) in rates {
            let gi = groups.iter().position(|x| x == g).expect("group listed");
            let wi = weeks.binary_search(w).expect("week listed");
            if grid[gi][wi].is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate rate for group {g}, week {w}"
                )));
            }
            grid[gi][wi] = r.is_finite().then_some(*r);
        }
        Ok(Panel {
            groups,
            weeks,
            rates: grid,
            covariates: BTreeMap::new(),
        })
    }

    /// Adds a covariate; rows for unknown groups or weeks are ignored.
    pub fn add_covariate(
        &mut self,
        name: &str,
        grid: Grid,
        rows: Vec<(String, i64, Vec<f64>)>,
    ) -> Result<()> {
        let mut curves = vec![vec![None; self.weeks.len()]; self.groups.len()];
        for (g, w, v) in rows {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{name}: curve of length {} on {} points",
                    v.len(),
                    grid.len()
                )));
            }
            let (Some(gi), Ok(wi)) = (
                self.groups.iter().position(|x| *x == g),
                self.weeks.binary_search(&w),
            ) else {
                continue;
            };
            curves[gi][wi] = v.iter().all(|x| x.is_finite()).then_some(v);
        }
        self.covariates
            .insert(name.to_string(), PanelCovariate { grid, curves });
        Ok(())
    }

    /// Adds the covariate `name` whose curve at week `w` is the response
    /// over weeks `w − len + 1 ..= w`, on the grid `−(len − 1), …, 0`.
    pub fn add_lagged_rate(&mut self, name: &str, len: usize) -> Result<()> {
        if len < 2 {
            return Err(Error::InvalidInput(
                "lagged curves need at least 2 weeks".into(),
            ));
        }
        let grid = Grid::uniform(-(len as f64 - 1.0), 0.0, len)?;
        let curves = self
            .rates
            .iter()
            .map(|series| {
                (0..series.len())
                    .map(|w| {
                        (w + 1 >= len)
                            .then(|| {
                                series[w + 1 - len..=w]
                                    .iter()
                                    .copied()
                                    .collect::<Option<Vec<f64>>>()
                            })
                            .flatten()
                    })
                    .collect()
            })
            .collect();
        self.covariates
            .insert(name.to_string(), PanelCovariate { grid, curves });
        Ok(())
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn weeks(&self) -> &[i64] {
        &self.weeks
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.keys().map(String::as_str).collect()
    }

    pub fn rate(&self, group: usize, week: usize) -> Option<f64> {
        self.rates[group][week]
    }

    /// Response rows `group,week,rate`.
    pub fn write_rates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["group", "week", "rate"]).map_err(io)?;
        for (g, series) in self.groups.iter().zip(&self.rates) {
            for (week, r) in self.weeks.iter().zip(series) {
                if let Some(r) = r {
                    w.write_record([g.clone(), week.to_string(), format!("{r}")])
                        .map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One covariate in wide format keyed by `group,week`.
    pub fn write_covariate_csv<W: Write>(&self, name: &str, out: W) -> Result<()> {
        let cov = self.covariate(name)?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["group".to_string(), "week".to_string()];
        header.extend(cov.grid.points().iter().map(|t| format!("{t}")));
        w.write_record(&header).map_err(io)?;
        for (g, series) in self.groups.iter().zip(&cov.curves) {
            for (week, c) in self.weeks.iter().zip(series) {
                if let Some(c) = c {
                    let row = [g.clone(), week.to_string()]
                        .into_iter()
                        .chain(c.iter().map(|v| format!("{v}")));
                    w.write_record(row.collect::<Vec<_>>()).map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    fn covariate(&self, name: &str) -> Result<&PanelCovariate> {
        self.covariates
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown covariate {name:?}")))
    }
}

/// Settings of the synthetic panel generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub groups: usize,
    pub weeks: usize,
    /// AR(1) parameter of each group's error series.
    pub phi: f64,
    /// Marginal standard deviation of the errors.
    pub noise_sd: f64,
    /// Points per daily covariate curve.
    pub points: usize,
    pub seed: u64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec {
            groups: 4,
            weeks: 120,
            phi: 0.9,
            noise_sd: 0.5,
            points: 14,
            seed: 0,
        }
    }
}

/// A flu-like panel: seasonal daily temperature (`temp`), solar radiation
/// (`sr`) and humidity (`hum`) curves per group and week. The response is
/// `1 + ⟨temp − 10, β⟩ + ε` with `β(t) = −0.2 (1 + t)` and AR(1) errors per
/// group; `hum` is unrelated to the response.
pub fn synthetic_panel(spec: &PanelSpec) -> Result<Panel> {
    if !(spec.phi.abs() < 1.0) {
        return Err(Error::Config(format!("phi out of (−1,1): {}", spec.phi)));
    }
    if spec.groups == 0 || spec.weeks < 2 || spec.points < 2 {
        return Err(Error::Config("panel needs groups, weeks and points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grid = Grid::unit(spec.points)?;
    let beta = grid.eval(|t| -0.2 * (1.0 + t));
    let m = spec.points;
    let mut rates = Vec::new();
    let mut temp = Vec::new();
    let mut sr = Vec::new();
    let mut hum = Vec::new();
    for g in 0..spec.groups {
        let name = format!("g{:02}", g + 1);
        let z: f64 = StandardNormal.sample(&mut rng);
        let offset = 2.0 * z;
        let errors = ar1_path(spec.weeks, spec.phi, spec.noise_sd.powi(2), &mut rng);
        let mut weather = 0.0;
        for (w, e) in errors.iter().enumerate() {
            let mut t_curve = Vec::with_capacity(m);
            let mut s_curve = Vec::with_capacity(m);
            let mut h_curve = Vec::with_capacity(m);
            for (j, t) in grid.points().iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                weather = 0.7 * weather + 1.5 * z;
                let season = (2.0 * std::f64::consts::PI * (w as f64 + t) / 52.0).cos();
                let tc = 13.0 + offset - 6.0 * season + weather;
                t_curve.push(tc);
                let zs: f64 = StandardNormal.sample(&mut rng);
                s_curve.push(150.0 - 80.0 * season + 6.0 * weather + 20.0 * zs);
                let zh: f64 = StandardNormal.sample(&mut rng);
                h_curve.push(75.0 + 5.0 * ((j as f64) * 0.9 + w as f64).sin() + 4.0 * zh);
            }
            let centered = Curve::new(grid.clone(), t_curve.iter().map(|v| v - 10.0).collect())?;
            let rate = 1.0 + inner_product(&centered, &beta)? + e;
            let week = w as i64 + 1;
            rates.push((name.clone(), week, rate));
            temp.push((name.clone(), week, t_curve));
            sr.push((name.clone(), week, s_curve));
            hum.push((name.clone(), week, h_curve));
        }
    }
    let mut panel = Panel::new(&rates)?;
    panel.add_covariate("temp", grid.clone(), temp)?;
    panel.add_covariate("sr", grid.clone(), sr)?;
    panel.add_covariate("hum", grid, hum)?;
    Ok(panel)
}

/// Settings of a rolling-origin evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    /// Training pairs per fit.
    pub n_train: usize,
    pub horizons: Vec<usize>,
    /// Number of origins.
    pub origins: usize,
    /// Week index (0-based position in the panel) of the first origin.
    /// Defaults to `n_train + max(horizons) − 1`, the first origin with a
    /// full window at every horizon.
    pub first_origin: Option<usize>,
    /// Covariate names per model.
    pub covariate_sets: Vec<Vec<String>>,
    /// Error structure of the FGLS fits.
    pub covariance: CovarianceFamily,
    pub basis: BasisFamily,
    /// Candidate basis dimensions; the basis default when `None`.
    pub k_range: Option<Vec<usize>>,
}

impl RollingConfig {
    pub fn new(n_train: usize, origins: usize, covariate_sets: Vec<Vec<String>>) -> Self {
        RollingConfig {
            n_train,
            horizons: vec![1, 2],
            origins,
            first_origin: None,
            covariate_sets,
            covariance: CovarianceFamily::Ar1 { theta: 0.0 },
            basis: BasisFamily::Fpc,
            k_range: None,
        }
    }

    /// Settings from `key = value` lines. `models` lists covariate sets
    /// separated by `;`, covariates within a set by `+`
    /// (`models = temp; sr; rate+temp`).
    pub fn from_config(text: &str) -> Result<Self> {
        let mut cfg = RollingConfig::new(104, 40, Vec::new());
        for (line, key, value) in parse_pairs(text)? {
            let at = |e: Error| match e {
                Error::Config(m) => Error::Config(format!("line {line}: {m}")),
                e => e,
            };
            match key.as_str() {
                "n_train" | "window" => cfg.n_train = number(&key)(&value).map_err(at)?,
                "horizons" | "h" => cfg.horizons = list(&value, number(&key)).map_err(at)?,
                "origins" | "j" => cfg.origins = number(&key)(&value).map_err(at)?,
                "first_origin" => cfg.first_origin = Some(number(&key)(&value).map_err(at)?),
                "models" => {
                    cfg.covariate_sets = value
                        .split(';')
                        .map(|set| {
                            set.split('+')
                                .map(|c| c.trim().to_string())
                                .filter(|c| !c.is_empty())
                                .collect::<Vec<_>>()
                        })
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                "covariance" => cfg.covariance = parse_covariance(&value).map_err(at)?,
                "basis" => cfg.basis = parse_basis(&value).map_err(at)?,
                "k" | "k_range" => cfg.k_range = Some(parse_k_range(&key, &value).map_err(at)?),
                _ => return Err(at(Error::Config(format!("unknown key {key:?}")))),
            }
        }
        Ok(cfg)
    }

    fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }

    fn first(&self) -> usize {
        self.first_origin
            .unwrap_or(self.n_train + self.max_horizon() - 1)
    }

    pub fn validate(&self, panel: &Panel) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be >= 1".into());
        }
        if self.n_train < 4 {
            return bad(format!("window of {} weeks is too short", self.n_train));
        }
        if self.origins == 0 {
            return bad("at least one origin is required".into());
        }
        let len = panel.weeks.len();
        if self.n_train + self.origins > len {
            return bad(format!(
                "window {} plus {} origins exceeds the {len} weeks of the panel",
                self.n_train, self.origins
            ));
        }
        if self.covariate_sets.is_empty() {
            return bad("no covariate sets".into());
        }
        for name in self.covariate_sets.iter().flatten() {
            panel.covariate(name)?;
        }
        Ok(())
    }

    fn options(&self, cov: CovarianceFamily) -> SelectOptions {
        let range = self
            .k_range
            .clone()
            .unwrap_or_else(|| SelectOptions::default_range(self.basis));
        SelectOptions {
            basis: self.basis,
            ..SelectOptions::fpc(range, cov)
        }
    }
}

/// A forecast that could not be made.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub set: usize,
    pub origin_week: i64,
    pub group: String,
    pub horizon: usize,
    pub reason: String,
}

/// Squared errors of one forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub set: usize,
    pub origin_week: i64,
    pub group: String,
    pub horizon: usize,
    pub flm: f64,
    pub fgls: f64,
    pub theta_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingReport {
    pub config: RollingConfig,
    /// `[set][horizon]` for FLM and FGLS.
    pub mspe_flm: Vec<Vec<f64>>,
    pub mspe_fgls: Vec<Vec<f64>>,
    /// Origins that contributed at least one forecast, `[set][horizon]`.
    pub origins_used: Vec<Vec<usize>>,
    pub forecasts: Vec<Forecast>,
    pub gaps: Vec<Gap>,
}

/// Training curves, responses and the curve at the origin for one group.
struct Window {
    x: Vec<FunctionalSample>,
    y: Vec<f64>,
    x0: Vec<FunctionalSample>,
    truth: f64,
}

fn window(
    panel: &Panel,
    names: &[String],
    group: usize,
    origin: usize,
    h: usize,
    n_train: usize,
) -> std::result::Result<Window, String> {
    let target = origin + h;
    let truth = panel
        .rates
        .get(group)
        .and_then(|s| s.get(target).copied().flatten())
        .ok_or_else(|| "no response at the target week".to_string())?;
    let first = (origin + 1)
        .checked_sub(n_train + h)
        .ok_or_else(|| "window starts before the panel".to_string())?;
    let weeks: Vec<usize> = (first..=origin - h).collect();
    let y = weeks
        .iter()
        .map(|&w| panel.rates[group][w + h])
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| "missing response in the window".to_string())?;
    let mut x = Vec::with_capacity(names.len());
    let mut x0 = Vec::with_capacity(names.len());
    for name in names {
        let cov = &panel.covariates[name];
        let rows = weeks
            .iter()
            .map(|&w| cov.curves[group][w].clone())
            .collect::<Option<Vec<Vec<f64>>>>()
            .ok_or_else(|| format!("missing {name} curve in the window"))?;
        let now = cov.curves[group][origin]
            .clone()
            .ok_or_else(|| format!("missing {name} curve at the origin"))?;
        let m = cov.grid.len();
        x.push(
            FunctionalSample::new(
                cov.grid.clone(),
                DMatrix::from_row_slice(rows.len(), m, &rows.concat()),
            )
            .map_err(|e| e.to_string())?,
        );
        x0.push(
            FunctionalSample::new(cov.grid.clone(), DMatrix::from_row_slice(1, m, &now))
                .map_err(|e| e.to_string())?,
        );
    }
    Ok(Window { x, y, x0, truth })
}

fn forecast(cfg: &RollingConfig, w: &Window, h: usize) -> Result<(f64, f64, Option<f64>)> {
    let mut out = [0.0; 2];
    let mut theta = None;
    for (slot, cov) in [CovarianceFamily::Identity, cfg.covariance.clone()]
        .into_iter()
        .enumerate()
    {
        let fit = select_model(&w.y, &w.x, &cfg.options(cov))?;
        let p = predict(&fit, &w.x0, &[h as i64])?;
        out[slot] = (w.truth - p.point[0]).powi(2);
        if slot == 1 {
            theta = fit.theta_hat();
        }
    }
    Ok((out[0], out[1], theta))
}

/// Refits FLM and FGLS for every covariate set, group, origin and horizon
/// and averages the squared forecast errors.
///
/// Each group is fitted on its own trailing window of `n_train` pairs
/// (curve at week `w`, response at `w + h`), so the serial error model runs
/// along that group's weeks. MSPE at a horizon is the mean over contributing
/// origins of the mean squared error across groups. Forecasts whose window
/// or target is incomplete, or whose fit fails, are logged as gaps.
pub fn rolling_forecast(panel: &Panel, cfg: &RollingConfig) -> Result<RollingReport> {
    cfg.validate(panel)?;
    let first = cfg.first();
    let mut tasks = Vec::new();
    for set in 0..cfg.covariate_sets.len() {
        for origin in first..first + cfg.origins {
            for group in 0..panel.groups.len() {
                for &h in &cfg.horizons {
                    tasks.push((set, origin, group, h));
                }
            }
        }
    }
    let outcomes: Vec<std::result::Result<Forecast, Gap>> = tasks
        .par_iter()
        .map(|&(set, origin, group, h)| {
            let origin_week = panel.weeks.get(origin).copied().unwrap_or(i64::MAX);
            let gap = |reason: String| Gap {
                set,
                origin_week,
                group: panel.groups[group].clone(),
                horizon: h,
                reason,
            };
            if origin >= panel.weeks.len() {
                return Err(gap("origin beyond the panel".into()));
            }
            let w = window(
                panel,
                &cfg.covariate_sets[set],
                group,
                origin,
                h,
                cfg.n_train,
            )
            .map_err(gap)?;
            let (flm, fgls, theta_hat) = forecast(cfg, &w, h).map_err(|e| gap(e.to_string()))?;
            Ok(Forecast {
                set,
                origin_week,
                group: panel.groups[group].clone(),
                horizon: h,
                flm,
                fgls,
                theta_hat,
            })
        })
        .collect();
    let mut forecasts = Vec::new();
    let mut gaps = Vec::new();
    for o in outcomes {
        match o {
            Ok(f) => forecasts.push(f),
            Err(g) => gaps.push(g),
        }
    }
    let sets = cfg.covariate_sets.len();
    let hs = cfg.horizons.len();
    let mut mspe_flm = vec![vec![f64::NAN; hs]; sets];
    let mut mspe_fgls = vec![vec![f64::NAN; hs]; sets];
    let mut origins_used = vec![vec![0; hs]; sets];
    for set in 0..sets {
        for (j, &h) in cfg.horizons.iter().enumerate() {
            let mut by_origin: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
            for f in forecasts.iter().filter(|f| f.set == set && f.horizon == h) {
                let e = by_origin.entry(f.origin_week).or_default();
                e.0 += f.flm;
                e.1 += f.fgls;
                e.2 += 1;
            }
            if by_origin.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no forecast could be made for covariates {:?} at horizon {h}",
                    cfg.covariate_sets[set]
                )));
            }
            let used = by_origin.len() as f64;
            mspe_flm[set][j] = by_origin.values().map(|e| e.0 / e.2 as f64).sum::<f64>() / used;
            mspe_fgls[set][j] = by_origin.values().map(|e| e.1 / e.2 as f64).sum::<f64>() / used;
            origins_used[set][j] = by_origin.len();
        }
    }
    Ok(RollingReport {
        config: cfg.clone(),
        mspe_flm,
        mspe_fgls,
        origins_used,
        forecasts,
        gaps,
    })
}

fn set_label(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    format!("({letter})")
}

impl RollingReport {
    /// Rows are covariate sets; columns FLM and FGLS at each horizon.
    pub fn write_table<W: Write>(&self, format: super::TableFormat, mut out: W) -> Result<()> {
        let mut header = vec!["Model".to_string(), "Covariates".to_string()];
        for h in &self.config.horizons {
            header.push(format!("n+{h} FLM"));
            header.push(format!("n+{h} FGLS"));
        }
        let rows: Vec<(Vec<String>, Vec<f64>)> = self
            .config
            .covariate_sets
            .iter()
            .enumerate()
            .map(|(i, set)| {
                let values = (0..self.config.horizons.len())
                    .flat_map(|j| [self.mspe_flm[i][j], self.mspe_fgls[i][j]])
                    .collect();
                (vec![set_label(i), set.join(" + ")], values)
            })
            .collect();
        match format {
            super::TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                let io = |e: csv::Error| Error::Io(e.to_string());
                w.write_record(&header).map_err(io)?;
                for (labels, values) in rows {
                    w.write_record(
                        labels
                            .into_iter()
                            .chain(values.iter().map(|v| g6(*v)))
                            .collect::<Vec<_>>(),
                    )
                    .map_err(io)?;
                }
                w.flush()?;
            }
            super::TableFormat::Markdown => {
                writeln!(out, "**Rolling-origin mean square prediction errors**\n")?;
                writeln!(out, "| {} |", header.join(" | "))?;
                let align: Vec<&str> = (0..header.len())
                    .map(|j| if j < 2 { ":--" } else { "--:" })
                    .collect();
                writeln!(out, "|{}|", align.join("|"))?;
                for (labels, values) in rows {
                    let cells: Vec<String> = labels
                        .into_iter()
                        .chain(values.iter().map(|v| format!("{v:.2}")))
                        .collect();
                    writeln!(out, "| {} |", cells.join(" | "))?;
                }
            }
        }
        Ok(())
    }

    /// Every squared error, one row per forecast.
    pub fn write_forecasts_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([
            "model",
            "origin_week",
            "group",
            "horizon",
            "sq_error_flm",
            "sq_error_fgls",
            "theta_hat",
        ])
        .map_err(io)?;
        for f in &self.forecasts {
            w.write_record([
                set_label(f.set),
                f.origin_week.to_string(),
                f.group.clone(),
                f.horizon.to_string(),
                g6(f.flm),
                g6(f.fgls),
                f.theta_hat.map_or_else(String::new, g6),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_gaps_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["model", "origin_week", "group", "horizon", "reason"])
            .map_err(io)?;
        for g in &self.gaps {
            w.write_record([
                set_label(g.set),
                g.origin_week.to_string(),
                g.group.clone(),
                g.horizon.to_string(),
                g.reason.clone(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
