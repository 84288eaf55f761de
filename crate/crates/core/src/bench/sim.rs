//! Monte-Carlo replicas of the functional linear model with AR(1) errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{make_beta, Scenario};
use crate::basis::BasisFamily;
use crate::covmodels::{estimate_theta, CovarianceFamily};
use crate::error::{Error, Result};
use crate::fgls::{
    igls_model, predict, select_model, FglsFit, GccvScale, IglsOptions, KSearch, Method,
    SelectOptions, ThetaSearch,
};
use crate::funcdata::{wiener_with_rng, Curve, FunctionalSample, Grid};

/// One cell of the simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub snr: f64,
    pub phi: f64,
    pub n: usize,
    pub replicas: usize,
    pub horizons: Vec<usize>,
    pub basis: BasisFamily,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Points of the uniform grid on `[0, 1]`.
    pub grid_points: usize,
    /// Covariance parameter search of the GLS fits.
    pub theta_search: ThetaSearch,
    pub gccv_scale: GccvScale,
    pub k_search: KSearch,
}

impl SimConfig {
    /// Desk-scale defaults: `n = 100`, 200 replicas, horizons 1, 5 and 10,
    /// all three methods, 101 grid points.
    pub fn new(scenario: Scenario, snr: f64, phi: f64, basis: BasisFamily, seed: u64) -> Self {
        let defaults = SelectOptions::fpc([1], CovarianceFamily::Identity);
        SimConfig {
            scenario,
            snr,
            phi,
            n: 100,
            replicas: 200,
            horizons: vec![1, 5, 10],
            basis,
            methods: vec![Method::Lm, Method::Gls, Method::Igls],
            seed,
            grid_points: 101,
            theta_search: defaults.theta,
            gccv_scale: defaults.scale,
            k_search: defaults.k_search,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad(format!("snr must be > 0, got {}", self.snr));
        }
        if !(self.phi.abs() < 1.0) {
            return bad(format!("phi out of (−1,1): {}", self.phi));
        }
        if self.n <= 20 {
            return bad(format!("n must be > 20, got {}", self.n));
        }
        if self.replicas == 0 {
            return bad("B must be >= 1".into());
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.grid_points < 2 {
            return bad("grid needs at least 2 points".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::unit(self.grid_points)
    }

    fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

/// The data of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub x: FunctionalSample,
    pub y: Vec<f64>,
    /// `⟨X_i, β⟩`.
    pub signal: Vec<f64>,
    /// Errors for the sample followed by the forward extension.
    pub errors: Vec<f64>,
    /// One fresh curve per horizon.
    pub forward_x: FunctionalSample,
    /// Truth at `n + h` for each horizon.
    pub forward_y: Vec<f64>,
}

/// Draws replica `index` of `cfg`.
///
/// Each replica uses its own ChaCha8 stream of `cfg.seed`, so replicas are
/// independent of the order they are generated in. The error variance is
/// `snr` times the sample variance of this replica's signal.
pub fn generate_replica(cfg: &SimConfig, index: usize) -> Result<Replica> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let beta = make_beta(cfg.scenario, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let x = wiener_with_rng(cfg.n, &grid, &mut rng);
    let signal: Vec<f64> = x.inner_products(&beta)?.iter().copied().collect();
    let var_e = cfg.snr * sample_variance(&signal);
    let errors = ar1_path(cfg.n + cfg.max_horizon(), cfg.phi, var_e, &mut rng);
    let y = signal.iter().zip(&errors).map(|(s, e)| s + e).collect();

    let forward_x = wiener_with_rng(cfg.horizons.len(), &grid, &mut rng);
    let forward_signal = forward_x.inner_products(&beta)?;
    let forward_y = cfg
        .horizons
        .iter()
        .zip(forward_signal.iter())
        .map(|(&h, s)| s + errors[cfg.n + h - 1])
        .collect();
    Ok(Replica {
        x,
        y,
        signal,
        errors,
        forward_x,
        forward_y,
    })
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Stationary AR(1) path with marginal variance `var`.
pub(crate) fn ar1_path<R: Rng>(len: usize, phi: f64, var: f64, rng: &mut R) -> Vec<f64> {
    let innov_sd = (var * (1.0 - phi * phi)).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut e = 0.0;
    for i in 0..len {
        let z: f64 = StandardNormal.sample(rng);
        e = if i == 0 {
            var.sqrt() * z
        } else {
            phi * e + innov_sd * z
        };
        out.push(e);
    }
    out
}

/// What one method produced on one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub method: Method,
    pub k: usize,
    /// `‖β − β̂‖²`.
    pub beta_error: f64,
    pub phi_hat: f64,
    /// Squared prediction error per horizon.
    pub sq_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord {
    pub index: usize,
    pub methods: Vec<MethodRecord>,
}

/// Averages of one method over the successful replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub replicas: usize,
    pub mean_k: f64,
    pub beta_mse: f64,
    pub phi_mse: f64,
    /// Per horizon, in the order of the configuration.
    pub mspe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    /// Successful replicas in index order.
    pub records: Vec<ReplicaRecord>,
    /// Replicas where some method failed, with the error.
    pub failures: Vec<(usize, Error)>,
    pub summary: Vec<MethodSummary>,
}

impl SimReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Summary restricted to replicas with index below `b`. Replica streams
    /// do not depend on the replica count, so this equals the report of the
    /// same configuration run with `b` replicas.
    pub fn truncated(&self, b: usize) -> SimReport {
        let records: Vec<ReplicaRecord> = self
            .records
            .iter()
            .filter(|r| r.index < b)
            .cloned()
            .collect();
        let failures = self.failures.iter().filter(|f| f.0 < b).cloned().collect();
        let config = SimConfig {
            replicas: b.min(self.config.replicas),
            ..self.config.clone()
        };
        let summary = summarize(&config, &records);
        SimReport {
            config,
            records,
            failures,
            summary,
        }
    }
}

fn fit_method(
    method: Method,
    cfg: &SimConfig,
    rep: &Replica,
    gls: Option<&FglsFit>,
) -> Result<FglsFit> {
    let range = SelectOptions::default_range(cfg.basis);
    let with = |cov| {
        SelectOptions {
            basis: cfg.basis,
            ..SelectOptions::fpc(range.clone(), cov)
        }
        .theta(cfg.theta_search.clone())
        .scale(cfg.gccv_scale)
        .k_search(cfg.k_search)
    };
    let covariates = std::slice::from_ref(&rep.x);
    match method {
        Method::Lm => select_model(&rep.y, covariates, &with(CovarianceFamily::Identity)),
        Method::Gls => select_model(
            &rep.y,
            covariates,
            &with(CovarianceFamily::Ar1 { theta: 0.0 }),
        ),
        Method::Igls => {
            let k = match gls {
                Some(f) => f.k(),
                None => select_model(
                    &rep.y,
                    covariates,
                    &with(CovarianceFamily::Ar1 { theta: 0.0 }),
                )?
                .k(),
            };
            igls_model(
                &rep.y,
                covariates,
                cfg.basis,
                k,
                &CovarianceFamily::Ar1 { theta: 0.0 },
                &IglsOptions::default(),
            )
        }
    }
}

fn record(cfg: &SimConfig, rep: &Replica, beta: &Curve, fit: &FglsFit) -> Result<MethodRecord> {
    let beta_error = beta.sub(fit.beta_hat())?.norm_sq();
    let phi_hat = match fit.theta_hat() {
        Some(t) => t,
        None => estimate_theta(
            fit.residuals().as_slice(),
            &CovarianceFamily::Ar1 { theta: 0.0 },
        )?
        .family
        .theta()
        .unwrap_or(0.0),
    };
    let mut sq_errors = Vec::with_capacity(cfg.horizons.len());
    for (j, &h) in cfg.horizons.iter().enumerate() {
        let x0 = rep.forward_x.select(&[j]);
        let p = predict(fit, &[x0], &[h as i64])?;
        sq_errors.push((rep.forward_y[j] - p.point[0]).powi(2));
    }
    Ok(MethodRecord {
        method: fit.method,
        k: fit.k(),
        beta_error,
        phi_hat,
        sq_errors,
    })
}

/// Fits every configured method on one replica.
pub fn run_replica(cfg: &SimConfig, index: usize) -> Result<ReplicaRecord> {
    let rep = generate_replica(cfg, index)?;
    let beta = make_beta(cfg.scenario, rep.x.grid());
    let mut gls: Option<FglsFit> = None;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut order = cfg.methods.clone();
    // iGLS reuses the GLS dimension, so GLS goes first.
    order.sort_by_key(|m| *m as u8);
    order.dedup();
    for m in order {
        let fit = fit_method(m, cfg, &rep, gls.as_ref())?;
        methods.push(record(cfg, &rep, &beta, &fit)?);
        if m == Method::Gls {
            gls = Some(fit);
        }
    }
    Ok(ReplicaRecord { index, methods })
}

fn summarize(cfg: &SimConfig, records: &[ReplicaRecord]) -> Vec<MethodSummary> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    first
        .methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let count = records.len() as f64;
            let mean = |f: &dyn Fn(&MethodRecord) -> f64| {
                records.iter().map(|r| f(&r.methods[j])).sum::<f64>() / count
            };
            MethodSummary {
                method: m.method,
                replicas: records.len(),
                mean_k: mean(&|r| r.k as f64),
                beta_mse: mean(&|r| r.beta_error),
                phi_mse: mean(&|r| (r.phi_hat - cfg.phi).powi(2)),
                mspe: (0..cfg.horizons.len())
                    .map(|h| mean(&|r| r.sq_errors[h]))
                    .collect(),
            }
        })
        .collect()
}

/// Runs every replica of `cfg` in parallel and averages per method.
///
/// Results are collected in replica order, so the report does not depend
/// on thread scheduling. A replica where any method fails is excluded from
/// every average and listed in `failures`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<ReplicaRecord>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_replica(cfg, i))
        .collect();
    let mut records = Vec::with_capacity(cfg.replicas);
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e) => failures.push((i, e)),
        }
    }
    let summary = summarize(cfg, &records);
    Ok(SimReport {
        config: cfg.clone(),
        records,
        failures,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(snr: f64, phi: f64) -> SimConfig {
        SimConfig {
            replicas: 4,
            ..SimConfig::new(Scenario::A, snr, phi, BasisFamily::Fpc, 7)
        }
    }

    #[test]
    fn vanishing_noise_reproduces_signal() {
        let rep = generate_replica(&cfg(1e-12, 0.5), 0).unwrap();
        let scale = sample_variance(&rep.signal).sqrt();
        for (y, s) in rep.y.iter().zip(&rep.signal) {
            assert!((y - s).abs() <= 1e-4 * scale, "{y} vs {s}");
        }
    }

    #[test]
    fn white_noise_has_no_lag1_correlation() {
        let c = SimConfig {
            n: 100,
            ..cfg(0.1, 0.0)
        };
        let pooled: Vec<f64> = (0..100)
            .flat_map(|i| {
                let r = generate_replica(&c, i).unwrap();
                r.errors[..c.n].to_vec()
            })
            .collect();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let num: f64 = pooled
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum();
        let den: f64 = pooled.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((num / den).abs() < 0.03, "rho = {}", num / den);
    }

    #[test]
    fn noise_is_calibrated_to_snr() {
        let c = cfg(0.2, 0.6);
        let ratios: Vec<f64> = (0..200)
            .map(|i| {
                let r = generate_replica(&c, i).unwrap();
                sample_variance(&r.errors[..c.n]) / sample_variance(&r.signal)
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / 200.0;
        assert!((mean / 0.2 - 1.0).abs() < 0.15, "ratio {mean}");
    }

    #[test]
    fn replicas_are_order_independent() {
        let c = cfg(0.1, 0.3);
        let a = generate_replica(&c, 3).unwrap();
        let _ = generate_replica(&c, 1).unwrap();
        assert_eq!(a, generate_replica(&c, 3).unwrap());
        assert_ne!(a.y, generate_replica(&c, 2).unwrap().y);
    }

    #[test]
    fn forward_truth_continues_the_error_path() {
        let c = cfg(0.1, 0.9);
        let r = generate_replica(&c, 0).unwrap();
        assert_eq!(r.errors.len(), c.n + 10);
        let beta = make_beta(Scenario::A, r.x.grid());
        let s = r.forward_x.inner_products(&beta).unwrap();
        assert_eq!(r.forward_y[2], s[2] + r.errors[c.n + 9]);
    }

    #[test]
    fn invalid_configs() {
        let err = SimConfig {
            phi: 1.2,
            ..cfg(0.1, 0.0)
        }
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("phi out of (−1,1)"));
        assert!(SimConfig {
            snr: 0.0,
            ..cfg(0.1, 0.0)
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            n: 20,
            ..cfg(0.1, 0.0)
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            replicas: 0,
            ..cfg(0.1, 0.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_complete() {
        let c = cfg(0.05, 0.9);
        let a = run_simulation(&c).unwrap();
        assert_eq!(a.records.len() + a.failures.len(), 4);
        assert_eq!(a, run_simulation(&c).unwrap());
        let truncated = a.truncated(2);
        let direct = run_simulation(&SimConfig { replicas: 2, ..c }).unwrap();
        assert_eq!(truncated, direct);
        for s in &a.summary {
            assert!(s.beta_mse >= 0.0 && s.phi_mse >= 0.0);
            assert!(s.mspe.iter().all(|v| *v >= 0.0));
        }
    }
}
