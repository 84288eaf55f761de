//! GCCV model selection over basis dimension and covariance parameter.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{fit_gls, GlsFit};
use crate::basis::{bspline_basis, design, fpc_basis, BasisFamily, BasisSpec};
use crate::covmodels::{estimate_theta, CovarianceFamily, CovarianceSpec};
use crate::error::{Error, Result};
use crate::funcdata::{center, Curve, FunctionalSample};
use crate::optim::grid_then_golden;

/// Search interval and step for profiling a scalar covariance parameter.
const THETA_LIMIT: f64 = 0.95;
const THETA_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Ordinary least squares, identity covariance.
    Lm,
    /// GLS with a selected covariance parameter.
    Gls,
    /// Iterative GLS.
    Igls,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lm => "LM",
            Method::Gls => "GLS",
            Method::Igls => "IGLS",
        })
    }
}

/// How the covariance parameter of a one-parameter family is chosen for
/// each candidate basis dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSearch {
    /// Use this value.
    Fixed(f64),
    /// The GCCV minimizer over these values (ties go to smaller `|θ|`).
    Grid(Vec<f64>),
    /// The GCCV minimizer over `[-0.95, 0.95]`: coarse grid of step 0.05,
    /// then golden-section refinement.
    GccvProfile,
    /// The `θ` whose GLS residuals reproduce it under the residual moment
    /// estimator, located by the same grid and golden-section search applied
    /// to `|ρ(ê(θ)) − θ|`. This is the fixed point iterative GLS converges to.
    ResidualFixedPoint,
}

/// Which residuals the GCCV score is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GccvScale {
    /// Observed residuals with `tr(C)` from the hat matrix.
    Observed,
    /// Whitened residuals, where the trace is the number of coefficients.
    Decorrelated,
}

/// How the basis dimension is picked from the candidate scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSearch {
    /// Smallest score over the whole range.
    GlobalMin,
    /// Walk the range upwards and stop once the score stops decreasing.
    FirstLocalMin,
}

/// Options for [`select_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub basis: BasisFamily,
    pub k_range: Vec<usize>,
    /// Family of `Σ(θ)`; parameter values act as the starting point.
    pub covariance: CovarianceFamily,
    pub theta: ThetaSearch,
    pub scale: GccvScale,
    pub k_search: KSearch,
}

impl SelectOptions {
    fn with(basis: BasisFamily, k: impl IntoIterator<Item = usize>, cov: CovarianceFamily) -> Self {
        SelectOptions {
            basis,
            k_range: k.into_iter().collect(),
            covariance: cov,
            theta: ThetaSearch::ResidualFixedPoint,
            scale: GccvScale::Decorrelated,
            k_search: KSearch::FirstLocalMin,
        }
    }

    /// FPC basis over the given dimensions.
    pub fn fpc(k: impl IntoIterator<Item = usize>, covariance: CovarianceFamily) -> Self {
        Self::with(BasisFamily::Fpc, k, covariance)
    }

    /// Cubic B-splines over the given dimensions.
    pub fn bspline(k: impl IntoIterator<Item = usize>, covariance: CovarianceFamily) -> Self {
        Self::with(BasisFamily::BSpline { order: 4 }, k, covariance)
    }

    /// The default search range: 1..=8 for FPC, 4..=11 for B-splines.
    pub fn default_range(basis: BasisFamily) -> Vec<usize> {
        match basis {
            BasisFamily::Fpc => (1..=8).collect(),
            BasisFamily::BSpline { order } => (order..order + 8).collect(),
        }
    }

    pub fn theta(mut self, theta: ThetaSearch) -> Self {
        self.theta = theta;
        self
    }

    pub fn scale(mut self, scale: GccvScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn k_search(mut self, k_search: KSearch) -> Self {
        self.k_search = k_search;
        self
    }
}

/// One functional covariate of a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub basis: BasisSpec,
    pub x_mean: Curve,
    pub beta_hat: Curve,
    /// Positions of this covariate's coefficients in `b`.
    pub coef_range: Range<usize>,
}

/// A fitted functional regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FglsFit {
    pub method: Method,
    pub components: Vec<Component>,
    pub gls: GlsFit,
    pub y_mean: f64,
    /// GCCV score the model was selected on.
    pub score: f64,
    /// Refits performed by iterative GLS; 0 otherwise.
    pub iterations: usize,
    pub converged: bool,
}

impl FglsFit {
    /// Basis dimension per covariate.
    pub fn k(&self) -> usize {
        self.components[0].basis.k()
    }

    pub fn basis_family(&self) -> BasisFamily {
        self.components[0].basis.family()
    }

    /// `β̂` of the first covariate.
    pub fn beta_hat(&self) -> &Curve {
        &self.components[0].beta_hat
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.gls.covariance
    }

    pub fn theta_hat(&self) -> Option<f64> {
        self.gls.covariance.family.theta()
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.gls.sigma2_hat
    }

    /// Fitted values on the response scale.
    pub fn fitted(&self) -> DVector<f64> {
        self.gls.fitted.add_scalar(self.y_mean)
    }

    pub fn residuals(&self) -> &DVector<f64> {
        &self.gls.residuals
    }

    /// `ȳ + Σ_c ⟨X_c − x̄_c, β̂_c⟩` for each row of the covariates.
    pub fn regression(&self, covariates: &[FunctionalSample]) -> Result<DVector<f64>> {
        if covariates.len() != self.components.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} covariates, got {}",
                self.components.len(),
                covariates.len()
            )));
        }
        let q = covariates[0].len();
        let mut out = DVector::from_element(q, self.y_mean);
        for (c, x) in self.components.iter().zip(covariates) {
            if x.len() != q {
                return Err(Error::DimensionMismatch(
                    "covariates have different numbers of curves".into(),
                ));
            }
            out += x.subtract(&c.x_mean)?.inner_products(&c.beta_hat)?;
        }
        Ok(out)
    }
}

/// Centered response and covariates shared by every candidate fit.
pub(crate) struct Problem {
    pub y: DVector<f64>,
    pub y_mean: f64,
    pub centered: Vec<FunctionalSample>,
    pub means: Vec<Curve>,
    fpc_cache: Vec<std::cell::OnceCell<Result<BasisSpec>>>,
}

impl Problem {
    pub fn new(y: &[f64], covariates: &[FunctionalSample]) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::InvalidInput(
                "at least one functional covariate is required".into(),
            ));
        }
        for x in covariates {
            if x.len() != y.len() {
                return Err(Error::LengthMismatch {
                    response: y.len(),
                    curves: x.len(),
                });
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite response at index {i}"
            )));
        }
        let n = y.len();
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 observations, got {n}"
            )));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let (centered, means) = covariates.iter().map(center).unzip();
        Ok(Problem {
            y: DVector::from_iterator(n, y.iter().map(|v| v - y_mean)),
            y_mean,
            centered,
            means,
            fpc_cache: (0..covariates.len()).map(|_| Default::default()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Per-covariate bases of dimension `k`.
    pub fn bases(&self, family: BasisFamily, k: usize) -> Result<Vec<BasisSpec>> {
        self.centered
            .iter()
            .enumerate()
            .map(|(i, x)| match family {
                BasisFamily::BSpline { order } => bspline_basis(x.grid(), k, order),
                BasisFamily::Fpc => {
                    let full = self.fpc_cache[i].get_or_init(|| {
                        let rank = x.len().saturating_sub(1).min(x.grid().len()).min(FPC_CACHE);
                        fpc_basis(x, rank.max(1))
                    });
                    match full {
                        Ok(b) if k <= b.k() => b.truncate(k),
                        _ => fpc_basis(x, k),
                    }
                }
            })
            .collect()
    }

    /// Column blocks of the design, one per covariate.
    pub fn design(&self, bases: &[BasisSpec]) -> Result<DMatrix<f64>> {
        let blocks = self
            .centered
            .iter()
            .zip(bases)
            .map(|(x, b)| design(x, b).map(|d| d.into_z()))
            .collect::<Result<Vec<_>>>()?;
        let n = self.n();
        let width: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut z = DMatrix::zeros(n, width);
        let mut col = 0;
        for b in blocks {
            z.columns_mut(col, b.ncols()).copy_from(&b);
            col += b.ncols();
        }
        Ok(z)
    }

    pub fn finish(
        &self,
        method: Method,
        bases: Vec<BasisSpec>,
        gls: GlsFit,
        score: f64,
    ) -> Result<FglsFit> {
        let mut start = 0;
        let mut components = Vec::with_capacity(bases.len());
        for (basis, mean) in bases.into_iter().zip(&self.means) {
            let k = basis.k();
            let b = gls.b.rows(start, k).clone_owned();
            let beta_hat = crate::basis::beta_curve(&b, &basis)?;
            components.push(Component {
                basis,
                x_mean: mean.clone(),
                beta_hat,
                coef_range: start..start + k,
            });
            start += k;
        }
        Ok(FglsFit {
            method,
            components,
            gls,
            y_mean: self.y_mean,
            score,
            iterations: 0,
            converged: true,
        })
    }
}

/// FPC components computed once per problem and truncated per candidate.
pub(crate) const FPC_CACHE: usize = 16;

fn score(fit: &GlsFit, scale: GccvScale) -> f64 {
    match scale {
        GccvScale::Observed => fit.gccv,
        GccvScale::Decorrelated => fit.gccv_decorrelated,
    }
}

fn fit_at(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    family: &CovarianceFamily,
    theta: f64,
) -> Result<GlsFit> {
    let family = family.with_theta(theta).unwrap_or_else(|| family.clone());
    fit_gls(
        y,
        z,
        &CovarianceSpec {
            family,
            sigma2: 1.0,
        },
    )
}

/// Chooses the covariance parameter for one design and returns the fit.
fn profile(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    family: &CovarianceFamily,
    search: &ThetaSearch,
    scale: GccvScale,
) -> Result<GlsFit> {
    let n = y.len();
    let Some((lo, hi)) = family.theta_bounds(n) else {
        return match search {
            ThetaSearch::ResidualFixedPoint => {
                let opts = super::IglsOptions::default();
                let start = CovarianceSpec {
                    family: family.clone(),
                    sigma2: 1.0,
                };
                super::igls::iterate(y, z, &start, &opts).map(|it| it.fit)
            }
            _ => fit_gls(
                y,
                z,
                &CovarianceSpec {
                    family: family.clone(),
                    sigma2: 1.0,
                },
            ),
        };
    };
    let (lo, hi) = (lo.max(-THETA_LIMIT), hi.min(THETA_LIMIT));
    let steps = ((hi - lo) / THETA_STEP).round().max(1.0) as usize;
    let gccv_at = |t: f64| fit_at(y, z, family, t).map_or(f64::INFINITY, |f| score(&f, scale));
    let theta = match search {
        ThetaSearch::Fixed(t) => *t,
        ThetaSearch::Grid(values) => {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            let mut best = (sorted.first().copied().unwrap_or(0.0), f64::INFINITY);
            for t in sorted {
                let s = gccv_at(t);
                if s < best.1 {
                    best = (t, s);
                }
            }
            best.0
        }
        ThetaSearch::GccvProfile => grid_then_golden(gccv_at, lo, hi, steps).0,
        ThetaSearch::ResidualFixedPoint => {
            let gap = |t: f64| match fit_at(y, z, family, t) {
                Ok(f) => match estimate_theta(f.residuals.as_slice(), family) {
                    Ok(est) => (est.family.theta().unwrap_or(0.0) - t).abs(),
                    Err(_) => f64::INFINITY,
                },
                Err(_) => f64::INFINITY,
            };
            grid_then_golden(gap, lo, hi, steps).0
        }
    };
    fit_at(y, z, family, theta)
}

/// Selects the basis dimension and covariance parameter by GCCV.
///
/// Inputs are centered first; the response mean is restored in
/// [`FglsFit::fitted`] and in predictions. Candidates that fail (rank
/// deficiency, `tr(C) ≥ n`) are skipped. Ties go to the smaller `K`.
pub fn select_model(
    y: &[f64],
    covariates: &[FunctionalSample],
    opts: &SelectOptions,
) -> Result<FglsFit> {
    if opts.k_range.is_empty() {
        return Err(Error::InvalidInput("empty basis dimension range".into()));
    }
    let problem = Problem::new(y, covariates)?;
    let method = match opts.covariance {
        CovarianceFamily::Identity => Method::Lm,
        _ => Method::Gls,
    };
    let mut ks = opts.k_range.clone();
    ks.sort_unstable();
    ks.dedup();

    let mut best: Option<(Vec<BasisSpec>, GlsFit, f64)> = None;
    for k in ks {
        let candidate = problem.bases(opts.basis, k).and_then(|bases| {
            let z = problem.design(&bases)?;
            let fit = profile(&problem.y, &z, &opts.covariance, &opts.theta, opts.scale)?;
            Ok((bases, fit))
        });
        let Ok((bases, fit)) = candidate else {
            continue;
        };
        let s = score(&fit, opts.scale);
        if !s.is_finite() {
            continue;
        }
        match &best {
            Some((_, _, b)) if s >= *b => {
                if opts.k_search == KSearch::FirstLocalMin {
                    break;
                }
            }
            _ => best = Some((bases, fit, s)),
        }
    }
    let (bases, fit, s) = best.ok_or(Error::NoAdmissibleModel)?;
    problem.finish(method, bases, fit, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdata::{simulate_wiener, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn single_candidate_equals_fit_gls() {
        let g = Grid::unit(51).unwrap();
        let x = simulate_wiener(40, &g, 1);
        let y = noise(40, 2);
        let opts = SelectOptions::fpc([3], CovarianceFamily::Ar1 { theta: 0.0 })
            .theta(ThetaSearch::Grid(vec![0.0]));
        let fit = select_model(&y, std::slice::from_ref(&x), &opts).unwrap();
        let (xc, _) = center(&x);
        let basis = fpc_basis(&xc, 3).unwrap();
        let z = design(&xc, &basis).unwrap().into_z();
        let yc = DVector::from_iterator(40, y.iter().map(|v| v - fit.y_mean));
        let direct = fit_gls(&yc, &z, &CovarianceSpec::ar1(0.0)).unwrap();
        assert_eq!(fit.gls, direct);
        assert_eq!(fit.k(), 3);
    }

    #[test]
    fn pure_noise_is_near_null_model() {
        let g = Grid::unit(101).unwrap();
        let x = simulate_wiener(100, &g, 3);
        let y = noise(100, 4);
        for opts in [
            SelectOptions::fpc(1..=8, CovarianceFamily::Identity),
            SelectOptions::fpc(1..=8, CovarianceFamily::Identity).k_search(KSearch::GlobalMin),
        ] {
            let fit = select_model(&y, std::slice::from_ref(&x), &opts).unwrap();
            let mean = y.iter().sum::<f64>() / 100.0;
            let null: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            assert!(
                (fit.score - null).abs() <= 0.05 * null,
                "score {} vs null {null}",
                fit.score
            );
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let g = Grid::unit(11).unwrap();
        let x = simulate_wiener(10, &g, 1);
        let err = select_model(
            &[1.0; 9],
            &[x],
            &SelectOptions::fpc([1], CovarianceFamily::Identity),
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                response: 9,
                curves: 10
            }
        );
    }

    #[test]
    fn no_admissible_model() {
        let g = Grid::unit(11).unwrap();
        let x = simulate_wiener(5, &g, 1);
        let err = select_model(
            &[1.0, 2.0, 0.0, 1.0, 3.0],
            &[x],
            &SelectOptions::fpc([7, 8], CovarianceFamily::Identity),
        )
        .unwrap_err();
        assert_eq!(err, Error::NoAdmissibleModel);
    }
}
