//! Iterative GLS: alternate a GLS fit with a residual update of `θ`.

use nalgebra::{DMatrix, DVector};

use super::select::{Method, Problem};
use super::{fit_gls, FglsFit, GlsFit};
use crate::basis::BasisFamily;
use crate::covmodels::{estimate_theta, CovarianceFamily, CovarianceSpec};
use crate::error::Result;
use crate::funcdata::FunctionalSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IglsOptions {
    /// Starting parameter for one-parameter families.
    pub theta0: f64,
    pub max_iter: usize,
    /// Stop once `max(|Δθ|, ‖Δb‖∞ / (1 + ‖b‖∞))` falls below this.
    pub tol: f64,
}

impl Default for IglsOptions {
    fn default() -> Self {
        IglsOptions {
            theta0: 0.0,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IglsFit {
    pub fit: GlsFit,
    /// Refits after the initial one.
    pub iterations: usize,
    pub converged: bool,
    /// Some residual update fell back to a default parameter.
    pub degenerate: bool,
}

/// Largest change between two parameter sets of the same family.
fn param_change(a: &CovarianceFamily, b: &CovarianceFamily) -> f64 {
    use CovarianceFamily::*;
    match (a, b) {
        (HeteroBlock { variances: va, .. }, HeteroBlock { variances: vb, .. }) => va
            .iter()
            .zip(vb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        (Spatial { range: ra, .. }, Spatial { range: rb, .. }) => {
            (ra - rb).abs() / (1.0 + ra.abs())
        }
        _ => match (a.theta(), b.theta()) {
            (Some(x), Some(y)) => (x - y).abs(),
            _ => 0.0,
        },
    }
}

pub(crate) fn iterate(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    start: &CovarianceSpec,
    opts: &IglsOptions,
) -> Result<IglsFit> {
    let mut family = start.family.clone();
    let mut fit = fit_gls(y, z, start)?;
    let mut degenerate = false;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let est = estimate_theta(fit.residuals.as_slice(), &family)?;
        degenerate |= est.degenerate;
        let next = fit_gls(
            y,
            z,
            &CovarianceSpec {
                family: est.family.clone(),
                sigma2: 1.0,
            },
        )?;
        let b_scale = 1.0 + next.b.amax();
        let change = param_change(&family, &est.family).max((&next.b - &fit.b).amax() / b_scale);
        fit = next;
        family = est.family;
        iterations += 1;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(IglsFit {
        fit,
        iterations,
        converged,
        degenerate,
    })
}

/// Iterative GLS on a fixed design.
///
/// Starts from `θ_0` (or the template's parameters for multi-parameter
/// families), then repeats: estimate the parameters from the current
/// residuals, refit. Non-convergence is reported through `converged`, with
/// the last iterate returned.
pub fn fit_igls(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    template: &CovarianceFamily,
    opts: &IglsOptions,
) -> Result<IglsFit> {
    let family = template
        .with_theta(opts.theta0)
        .unwrap_or_else(|| template.clone());
    iterate(
        y,
        z,
        &CovarianceSpec {
            family,
            sigma2: 1.0,
        },
        opts,
    )
}

/// Iterative GLS for functional covariates with a fixed basis dimension.
pub fn igls_model(
    y: &[f64],
    covariates: &[FunctionalSample],
    basis: BasisFamily,
    k: usize,
    template: &CovarianceFamily,
    opts: &IglsOptions,
) -> Result<FglsFit> {
    let problem = Problem::new(y, covariates)?;
    let bases = problem.bases(basis, k)?;
    let z = problem.design(&bases)?;
    let it = fit_igls(&problem.y, &z, template, opts)?;
    let score = it.fit.gccv_decorrelated;
    let mut fit = problem.finish(Method::Igls, bases, it.fit, score)?;
    fit.iterations = it.iterations;
    fit.converged = it.converged;
    Ok(fit)
}
