//! Plain `key = value` configuration files.

use super::sim::SimConfig;
use super::Scenario;
use crate::basis::BasisFamily;
use crate::covmodels::CovarianceFamily;
use crate::error::{Error, Result};
use crate::fgls::{
    igls_model, select_model, FglsFit, GccvScale, IglsOptions, KSearch, Method, SelectOptions,
    ThetaSearch,
};
use crate::funcdata::FunctionalSample;

/// Splits `key = value` lines. Blank lines and `#` comments are skipped;
/// keys are lower-cased. Returns `(line, key, value)`.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
        })?;
        out.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

pub(crate) fn number<T: std::str::FromStr>(key: &str) -> impl Fn(&str) -> Result<T> + '_ {
    move |s| {
        s.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))
    }
}

pub(crate) fn parse_basis(s: &str) -> Result<BasisFamily> {
    match s.to_ascii_lowercase().as_str() {
        "fpc" | "pc" => Ok(BasisFamily::Fpc),
        "bspline" | "bsp" => Ok(BasisFamily::BSpline { order: 4 }),
        _ => Err(Error::Config(format!(
            "unknown basis {s:?} (expected fpc or bspline)"
        ))),
    }
}

pub(crate) fn parse_method(s: &str) -> Result<Method> {
    match s.to_ascii_lowercase().as_str() {
        "lm" => Ok(Method::Lm),
        "gls" => Ok(Method::Gls),
        "igls" => Ok(Method::Igls),
        _ => Err(Error::Config(format!(
            "unknown method {s:?} (expected lm, gls or igls)"
        ))),
    }
}

/// `fixed_point`, `gccv`, `fixed:<θ>` or `grid:<θ1>;<θ2>;…`.
pub(crate) fn parse_theta_search(s: &str) -> Result<ThetaSearch> {
    let lower = s.to_ascii_lowercase();
    let err = || Error::Config(format!("theta_search: cannot parse {s:?}"));
    match lower.split_once(':') {
        None if lower == "fixed_point" => Ok(ThetaSearch::ResidualFixedPoint),
        None if lower == "gccv" => Ok(ThetaSearch::GccvProfile),
        Some(("fixed", v)) => v.trim().parse().map(ThetaSearch::Fixed).map_err(|_| err()),
        Some(("grid", v)) => v
            .split(';')
            .map(|t| t.trim().parse().map_err(|_| err()))
            .collect::<Result<Vec<f64>>>()
            .map(ThetaSearch::Grid),
        _ => Err(err()),
    }
}

fn parse_scale(s: &str) -> Result<GccvScale> {
    match s.to_ascii_lowercase().as_str() {
        "observed" => Ok(GccvScale::Observed),
        "decorrelated" => Ok(GccvScale::Decorrelated),
        _ => Err(Error::Config(format!(
            "gccv_scale: expected observed or decorrelated, got {s:?}"
        ))),
    }
}

fn parse_k_search(s: &str) -> Result<KSearch> {
    match s.to_ascii_lowercase().as_str() {
        "first_local" => Ok(KSearch::FirstLocalMin),
        "global" => Ok(KSearch::GlobalMin),
        _ => Err(Error::Config(format!(
            "k_search: expected first_local or global, got {s:?}"
        ))),
    }
}

pub(crate) fn parse_covariance(s: &str) -> Result<CovarianceFamily> {
    match s.to_ascii_lowercase().as_str() {
        "ar1" => Ok(CovarianceFamily::Ar1 { theta: 0.0 }),
        "identity" => Ok(CovarianceFamily::Identity),
        "equicorrelated" => Ok(CovarianceFamily::Equicorrelated { theta: 0.0 }),
        _ => Err(Error::Config(format!(
            "unsupported covariance {s:?} (expected identity, ar1 or equicorrelated)"
        ))),
    }
}

/// A list of dimensions; `a..b` is the inclusive range.
pub(crate) fn parse_k_range(key: &str, s: &str) -> Result<Vec<usize>> {
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (number(key)(a.trim())?, number(key)(b.trim())?);
            if a > b {
                return Err(Error::Config(format!("{key}: empty range {s:?}")));
            }
            Ok((a..=b).collect())
        }
        None => list(s, number(key)),
    }
}

fn at_line(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config(m) => Error::Config(format!("line {line}: {m}")),
        e => e,
    }
}

fn theta_search_name(t: &ThetaSearch) -> String {
    match t {
        ThetaSearch::ResidualFixedPoint => "fixed_point".into(),
        ThetaSearch::GccvProfile => "gccv".into(),
        ThetaSearch::Fixed(v) => format!("fixed:{v}"),
        ThetaSearch::Grid(v) => format!(
            "grid:{}",
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        ),
    }
}

/// A grid of simulation cells: every combination of `snrs × phis × bases`
/// shares the remaining settings and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub scenario: Scenario,
    pub snrs: Vec<f64>,
    pub phis: Vec<f64>,
    pub bases: Vec<BasisFamily>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub replicas: usize,
    pub horizons: Vec<usize>,
    pub seed: u64,
    pub grid_points: usize,
    pub theta_search: ThetaSearch,
    pub gccv_scale: GccvScale,
    pub k_search: KSearch,
}

impl SimPlan {
    /// The full study of one scenario at desk scale.
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let base = SimConfig::new(scenario, 0.05, 0.0, BasisFamily::Fpc, seed);
        SimPlan {
            scenario,
            snrs: vec![0.05, 0.10, 0.20],
            phis: vec![0.0, 0.3, 0.6, 0.9],
            bases: vec![BasisFamily::Fpc, BasisFamily::BSpline { order: 4 }],
            methods: base.methods,
            n: base.n,
            replicas: base.replicas,
            horizons: base.horizons,
            seed,
            grid_points: base.grid_points,
            theta_search: base.theta_search,
            gccv_scale: base.gccv_scale,
            k_search: base.k_search,
        }
    }

    /// Applies one setting. Lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "snr" => self.snrs = list(value, number(key))?,
            "phi" => self.phis = list(value, number(key))?,
            "basis" => self.bases = list(value, parse_basis)?,
            "methods" | "method" => self.methods = list(value, parse_method)?,
            "n" => self.n = number(key)(value)?,
            "b" | "replicas" => self.replicas = number(key)(value)?,
            "horizons" | "h" => self.horizons = list(value, number(key))?,
            "seed" => self.seed = number(key)(value)?,
            "grid" | "grid_points" => self.grid_points = number(key)(value)?,
            "theta_search" => self.theta_search = parse_theta_search(value)?,
            "gccv_scale" => self.gccv_scale = parse_scale(value)?,
            "k_search" => self.k_search = parse_k_search(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by the settings in `text`.
    pub fn from_config(text: &str, seed: u64) -> Result<Self> {
        let mut plan = SimPlan::new(Scenario::A, seed);
        for (line, k, v) in parse_pairs(text)? {
            plan.set(&k, &v).map_err(at_line(line))?;
        }
        Ok(plan)
    }

    /// One validated configuration per cell, ordered by basis, snr, phi.
    pub fn cells(&self) -> Result<Vec<SimConfig>> {
        if self.snrs.is_empty() || self.phis.is_empty() || self.bases.is_empty() {
            return Err(Error::Config(
                "snr, phi and basis need at least one value".into(),
            ));
        }
        let mut cells = Vec::new();
        for &basis in &self.bases {
            for &snr in &self.snrs {
                for &phi in &self.phis {
                    let c = SimConfig {
                        scenario: self.scenario,
                        snr,
                        phi,
                        n: self.n,
                        replicas: self.replicas,
                        horizons: self.horizons.clone(),
                        basis,
                        methods: self.methods.clone(),
                        seed: self.seed,
                        grid_points: self.grid_points,
                        theta_search: self.theta_search.clone(),
                        gccv_scale: self.gccv_scale,
                        k_search: self.k_search,
                    };
                    c.validate()?;
                    cells.push(c);
                }
            }
        }
        Ok(cells)
    }

    /// The settings as `key = value` lines, readable by [`SimPlan::from_config`].
    pub fn to_config(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let basis = |b: &BasisFamily| match b {
            BasisFamily::Fpc => "fpc".to_string(),
            BasisFamily::BSpline { .. } => "bspline".to_string(),
        };
        [
            format!("scenario = {}", self.scenario),
            format!(
                "snr = {}",
                join(self.snrs.iter().map(|v| v.to_string()).collect())
            ),
            format!(
                "phi = {}",
                join(self.phis.iter().map(|v| v.to_string()).collect())
            ),
            format!("basis = {}", join(self.bases.iter().map(basis).collect())),
            format!(
                "methods = {}",
                join(
                    self.methods
                        .iter()
                        .map(|m| m.to_string().to_ascii_lowercase())
                        .collect()
                )
            ),
            format!("n = {}", self.n),
            format!("B = {}", self.replicas),
            format!(
                "horizons = {}",
                join(self.horizons.iter().map(|v| v.to_string()).collect())
            ),
            format!("seed = {}", self.seed),
            format!("grid = {}", self.grid_points),
            format!("theta_search = {}", theta_search_name(&self.theta_search)),
            format!(
                "gccv_scale = {}",
                match self.gccv_scale {
                    GccvScale::Observed => "observed",
                    GccvScale::Decorrelated => "decorrelated",
                }
            ),
            format!(
                "k_search = {}",
                match self.k_search {
                    KSearch::FirstLocalMin => "first_local",
                    KSearch::GlobalMin => "global",
                }
            ),
        ]
        .join("\n")
            + "\n"
    }
}

/// Settings of a single model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub method: Method,
    pub basis: BasisFamily,
    /// `None` uses [`SelectOptions::default_range`].
    pub k_range: Option<Vec<usize>>,
    /// Covariance family for GLS and iGLS; LM always uses the identity.
    pub covariance: CovarianceFamily,
    pub theta_search: ThetaSearch,
    pub gccv_scale: GccvScale,
    pub k_search: KSearch,
}

impl Default for FitConfig {
    fn default() -> Self {
        let opts = SelectOptions::fpc([1], CovarianceFamily::Identity);
        FitConfig {
            method: Method::Gls,
            basis: BasisFamily::Fpc,
            k_range: None,
            covariance: CovarianceFamily::Ar1 { theta: 0.0 },
            theta_search: opts.theta,
            gccv_scale: opts.scale,
            k_search: opts.k_search,
        }
    }
}

impl FitConfig {
    /// Applies one setting. `covariance` (alias `family`) names the family;
    /// `theta` fixes its parameter instead of searching for it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "method" => self.method = parse_method(value)?,
            "basis" => self.basis = parse_basis(value)?,
            "k" | "k_range" => self.k_range = Some(parse_k_range(key, value)?),
            "covariance" | "family" => self.covariance = parse_covariance(value)?,
            "theta" => self.theta_search = ThetaSearch::Fixed(number(key)(value)?),
            "theta_search" => self.theta_search = parse_theta_search(value)?,
            "gccv_scale" => self.gccv_scale = parse_scale(value)?,
            "k_search" => self.k_search = parse_k_search(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut cfg = FitConfig::default();
        for (line, k, v) in parse_pairs(text)? {
            cfg.set(&k, &v).map_err(at_line(line))?;
        }
        Ok(cfg)
    }

    pub fn options(&self) -> SelectOptions {
        let covariance = match self.method {
            Method::Lm => CovarianceFamily::Identity,
            _ => self.covariance.clone(),
        };
        let range = self
            .k_range
            .clone()
            .unwrap_or_else(|| SelectOptions::default_range(self.basis));
        SelectOptions {
            basis: self.basis,
            ..SelectOptions::fpc(range, covariance)
        }
        .theta(self.theta_search.clone())
        .scale(self.gccv_scale)
        .k_search(self.k_search)
    }

    /// Fits the configured method. iGLS iterates at the dimension GCCV
    /// selects for GLS.
    pub fn fit(&self, y: &[f64], covariates: &[FunctionalSample]) -> Result<FglsFit> {
        let opts = self.options();
        let fit = select_model(y, covariates, &opts)?;
        match self.method {
            Method::Igls if opts.covariance != CovarianceFamily::Identity => igls_model(
                y,
                covariates,
                self.basis,
                fit.k(),
                &opts.covariance,
                &IglsOptions::default(),
            ),
            _ => Ok(fit),
        }
    }
}
