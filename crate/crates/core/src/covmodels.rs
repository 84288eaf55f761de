//! Parametric error covariance families `Σ(θ)`.
//!
//! The full error covariance is `σ² Σ(θ)`. Estimation never forms `Σ^{-1}`:
//! a [`Whitener`] applies `L^{-1}` with `Σ = L Lᵀ`, using a closed form for
//! AR(1) and diagonal structures and a Cholesky factor otherwise.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest admissible `|θ|` for AR(1) estimates.
pub const AR1_CLAMP: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceFamily {
    Identity,
    /// Unit diagonal and a common correlation `theta` off the diagonal.
    Equicorrelated {
        theta: f64,
    },
    /// Block-diagonal `diag(σ²_1 I_{n_1}, …, σ²_p I_{n_p})`.
    HeteroBlock {
        variances: Vec<f64>,
        sizes: Vec<usize>,
    },
    /// `Σ_ij = θ^{|i-j|}`.
    Ar1 {
        theta: f64,
    },
    /// Exponential correlation `exp(-d(s_i, s_j) / range)`.
    Spatial {
        range: f64,
        locations: Vec<Vec<f64>>,
    },
}

impl CovarianceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CovarianceFamily::Identity => "identity",
            CovarianceFamily::Equicorrelated { .. } => "equicorrelated",
            CovarianceFamily::HeteroBlock { .. } => "hetero_block",
            CovarianceFamily::Ar1 { .. } => "ar1",
            CovarianceFamily::Spatial { .. } => "spatial",
        }
    }

    /// The scalar parameter of one-parameter families.
    pub fn theta(&self) -> Option<f64> {
        match self {
            CovarianceFamily::Equicorrelated { theta } | CovarianceFamily::Ar1 { theta } => {
                Some(*theta)
            }
            _ => None,
        }
    }

    /// Same family with a new scalar parameter. `None` for families without one.
    pub fn with_theta(&self, theta: f64) -> Option<CovarianceFamily> {
        match self {
            CovarianceFamily::Equicorrelated { .. } => {
                Some(CovarianceFamily::Equicorrelated { theta })
            }
            CovarianceFamily::Ar1 { .. } => Some(CovarianceFamily::Ar1 { theta }),
            _ => None,
        }
    }

    /// Admissible scalar parameters for `n` observations, as a closed interval
    /// strictly inside the positive definite range.
    pub fn theta_bounds(&self, n: usize) -> Option<(f64, f64)> {
        match self {
            CovarianceFamily::Ar1 { .. } => Some((-AR1_CLAMP, AR1_CLAMP)),
            CovarianceFamily::Equicorrelated { .. } => {
                Some((-AR1_CLAMP / (n.max(2) - 1) as f64, AR1_CLAMP))
            }
            _ => None,
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidCovariance {
            family: self.name(),
            reason: reason.into(),
        }
    }

    /// Checks the parameter constraints for `n` observations.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            CovarianceFamily::Identity => Ok(()),
            CovarianceFamily::Equicorrelated { theta } => {
                let lower = if n > 1 { -1.0 / (n - 1) as f64 } else { -1.0 };
                if !(theta.is_finite() && *theta > lower && *theta < 1.0) {
                    return Err(self.invalid(format!(
                        "theta={theta} outside ({lower}, 1) required for n={n}"
                    )));
                }
                Ok(())
            }
            CovarianceFamily::HeteroBlock { variances, sizes } => {
                if variances.len() != sizes.len() || variances.is_empty() {
                    return Err(self.invalid("need one variance per block"));
                }
                if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(self.invalid(format!("block variance {v} must be > 0")));
                }
                let total: usize = sizes.iter().sum();
                if total != n {
                    return Err(self.invalid(format!("block sizes sum to {total}, expected {n}")));
                }
                Ok(())
            }
            CovarianceFamily::Ar1 { theta } => {
                if !(theta.is_finite() && theta.abs() < 1.0) {
                    return Err(self.invalid(format!("theta={theta} outside (-1, 1)")));
                }
                Ok(())
            }
            CovarianceFamily::Spatial { range, locations } => {
                if !(range.is_finite() && *range > 0.0) {
                    return Err(self.invalid(format!("range={range} must be > 0")));
                }
                if locations.len() != n {
                    return Err(self.invalid(format!(
                        "{} locations for {n} observations",
                        locations.len()
                    )));
                }
                let dim = locations.first().map_or(0, Vec::len);
                if locations
                    .iter()
                    .any(|s| s.len() != dim || s.iter().any(|v| !v.is_finite()))
                {
                    return Err(self.invalid("locations must be finite and share a dimension"));
                }
                Ok(())
            }
        }
    }
}

/// `σ² Σ(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub family: CovarianceFamily,
    pub sigma2: f64,
}

impl CovarianceSpec {
    pub fn new(family: CovarianceFamily, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidCovariance {
                family: family.name(),
                reason: format!("sigma2={sigma2} must be > 0"),
            });
        }
        Ok(CovarianceSpec { family, sigma2 })
    }

    pub fn identity() -> Self {
        CovarianceSpec {
            family: CovarianceFamily::Identity,
            sigma2: 1.0,
        }
    }

    pub fn ar1(theta: f64) -> Self {
        CovarianceSpec {
            family: CovarianceFamily::Ar1 { theta },
            sigma2: 1.0,
        }
    }

    /// Whitening transform for `Σ(θ)` of size `n`.
    pub fn whitener(&self, n: usize) -> Result<Whitener> {
        self.family.validate(n)?;
        match &self.family {
            CovarianceFamily::Identity => Ok(Whitener::Identity { n }),
            CovarianceFamily::Ar1 { theta } => Ok(Whitener::Ar1 { theta: *theta, n }),
            CovarianceFamily::HeteroBlock { variances, sizes } => {
                let inv_sd = sizes
                    .iter()
                    .zip(variances)
                    .flat_map(|(&s, v)| std::iter::repeat_n(1.0 / v.sqrt(), s))
                    .collect();
                Ok(Whitener::Diagonal { inv_sd })
            }
            _ => {
                let sigma = build_sigma(self, n)?;
                whiten(&sigma)
            }
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Materializes `Σ(θ)` (without the `σ²` scale) and checks positive definiteness.
pub fn build_sigma(spec: &CovarianceSpec, n: usize) -> Result<DMatrix<f64>> {
    let family = &spec.family;
    family.validate(n)?;
    let sigma = match family {
        CovarianceFamily::Identity => DMatrix::identity(n, n),
        CovarianceFamily::Equicorrelated { theta } => {
            DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { *theta })
        }
        CovarianceFamily::HeteroBlock { variances, sizes } => {
            let diag: Vec<f64> = sizes
                .iter()
                .zip(variances)
                .flat_map(|(&s, &v)| std::iter::repeat_n(v, s))
                .collect();
            DMatrix::from_diagonal(&DVector::from_vec(diag))
        }
        CovarianceFamily::Ar1 { theta } => {
            DMatrix::from_fn(n, n, |i, j| theta.powi(i.abs_diff(j) as i32))
        }
        CovarianceFamily::Spatial { range, locations } => DMatrix::from_fn(n, n, |i, j| {
            (-euclidean(&locations[i], &locations[j]) / range).exp()
        }),
    };
    if n > 0 && sigma.clone().cholesky().is_none() {
        return Err(family.invalid(format!(
            "parameters give a matrix that is not positive definite ({family:?})"
        )));
    }
    Ok(sigma)
}

/// Applies `L^{-1}` where `Σ = L Lᵀ`.
#[derive(Debug, Clone)]
pub enum Whitener {
    Identity {
        n: usize,
    },
    Diagonal {
        inv_sd: Vec<f64>,
    },
    /// `ṽ_1 = v_1`, `ṽ_i = (v_i − θ v_{i−1}) / sqrt(1 − θ²)`.
    Ar1 {
        theta: f64,
        n: usize,
    },
    Dense(Cholesky<f64, Dyn>),
}

impl Whitener {
    pub fn dim(&self) -> usize {
        match self {
            Whitener::Identity { n } | Whitener::Ar1 { n, .. } => *n,
            Whitener::Diagonal { inv_sd } => inv_sd.len(),
            Whitener::Dense(c) => c.l_dirty().nrows(),
        }
    }

    /// `L^{-1} A`, column by column.
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Whitener::Identity { .. } => a.clone(),
            Whitener::Diagonal { inv_sd } => {
                let mut out = a.clone();
                for (mut row, s) in out.row_iter_mut().zip(inv_sd) {
                    row *= *s;
                }
                out
            }
            Whitener::Ar1 { theta, .. } => {
                let s = (1.0 - theta * theta).sqrt();
                let mut out = a.clone();
                for i in (1..a.nrows()).rev() {
                    for j in 0..a.ncols() {
                        out[(i, j)] = (a[(i, j)] - theta * a[(i - 1, j)]) / s;
                    }
                }
                out
            }
            Whitener::Dense(c) => {
                let mut out = a.clone();
                c.l_dirty().solve_lower_triangular_mut(&mut out);
                out
            }
        }
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        DVector::from_column_slice(self.apply(&m).as_slice())
    }

    /// `L^{-ᵀ} A`.
    pub fn apply_transpose_inverse(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Whitener::Identity { .. } | Whitener::Diagonal { .. } => self.apply(a),
            Whitener::Ar1 { theta, .. } => {
                let s = (1.0 - theta * theta).sqrt();
                let n = a.nrows();
                let mut out = a.clone();
                for i in 0..n {
                    let c = if i == 0 { 1.0 } else { 1.0 / s };
                    for j in 0..a.ncols() {
                        let next = if i + 1 < n {
                            a[(i + 1, j)] * theta / s
                        } else {
                            0.0
                        };
                        out[(i, j)] = c * a[(i, j)] - next;
                    }
                }
                out
            }
            Whitener::Dense(c) => {
                let mut out = a.clone();
                c.l_dirty().tr_solve_lower_triangular_mut(&mut out);
                out
            }
        }
    }

    /// `Σ^{-1} A` via two triangular applications.
    pub fn solve(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_transpose_inverse(&self.apply(a))
    }

    /// The explicit `L^{-1}`, for inspection and tests.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.apply(&DMatrix::identity(n, n))
    }
}

/// Whitening transform of a dense symmetric positive definite matrix.
pub fn whiten(sigma: &DMatrix<f64>) -> Result<Whitener> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch(
            "covariance matrix must be square".into(),
        ));
    }
    sigma
        .clone()
        .cholesky()
        .map(Whitener::Dense)
        .ok_or(Error::NotPositiveDefinite)
}

/// Lag-1 sample autocorrelation. `None` for constant input.
pub fn lag1_autocorrelation(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if denom <= (1e-14 * scale).powi(2) * n as f64 || denom == 0.0 {
        return None;
    }
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Some(num / denom)
}

/// A residual-based parameter estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub family: CovarianceFamily,
    /// The residuals carried no information (constant or too few per block).
    pub degenerate: bool,
}

/// Moment estimate of the family parameters from residuals.
///
/// `template` supplies the family and any structural data (block sizes,
/// locations); its parameter values are ignored.
pub fn estimate_theta(residuals: &[f64], template: &CovarianceFamily) -> Result<ThetaEstimate> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 residuals to estimate covariance parameters, got {n}"
        )));
    }
    let est = |family| ThetaEstimate {
        family,
        degenerate: false,
    };
    let fallback = |family| ThetaEstimate {
        family,
        degenerate: true,
    };
    match template {
        CovarianceFamily::Identity => Ok(est(CovarianceFamily::Identity)),
        CovarianceFamily::Ar1 { .. } => Ok(match lag1_autocorrelation(residuals) {
            Some(r) => est(CovarianceFamily::Ar1 {
                theta: r.clamp(-AR1_CLAMP, AR1_CLAMP),
            }),
            None => fallback(CovarianceFamily::Ar1 { theta: 0.0 }),
        }),
        CovarianceFamily::Equicorrelated { .. } => {
            let ss: f64 = residuals.iter().map(|v| v * v).sum();
            if lag1_autocorrelation(residuals).is_none() || ss == 0.0 {
                return Ok(fallback(CovarianceFamily::Equicorrelated { theta: 0.0 }));
            }
            let total: f64 = residuals.iter().sum();
            // Σ_{i≠j} e_i e_j averaged, over the average e_i²
            let off = (total * total - ss) / (n * (n - 1)) as f64;
            let (lo, hi) = template.theta_bounds(n).expect("scalar family");
            let theta = (off / (ss / n as f64)).clamp(lo, hi);
            Ok(est(CovarianceFamily::Equicorrelated { theta }))
        }
        CovarianceFamily::HeteroBlock { sizes, .. } => {
            let total: usize = sizes.iter().sum();
            if total != n {
                return Err(template.invalid(format!("block sizes sum to {total}, expected {n}")));
            }
            let mut start = 0;
            let mut variances = Vec::with_capacity(sizes.len());
            for &s in sizes {
                let block = &residuals[start..start + s];
                start += s;
                variances.push(block.iter().map(|v| v * v).sum::<f64>() / s.max(1) as f64);
            }
            let pooled: f64 = variances
                .iter()
                .zip(sizes)
                .map(|(v, &s)| v * s as f64)
                .sum::<f64>()
                / n as f64;
            if pooled <= 0.0 {
                return Ok(fallback(CovarianceFamily::HeteroBlock {
                    variances: vec![1.0; sizes.len()],
                    sizes: sizes.clone(),
                }));
            }
            let floor = 1e-8;
            let degenerate = variances.iter().any(|v| *v / pooled < floor);
            let variances = variances.iter().map(|v| (v / pooled).max(floor)).collect();
            Ok(ThetaEstimate {
                family: CovarianceFamily::HeteroBlock {
                    variances,
                    sizes: sizes.clone(),
                },
                degenerate,
            })
        }
        CovarianceFamily::Spatial { range, locations } => {
            if locations.len() != n {
                return Err(
                    template.invalid(format!("{} locations for {n} residuals", locations.len()))
                );
            }
            Ok(match fit_exponential_range(residuals, locations) {
                Some(r) => est(CovarianceFamily::Spatial {
                    range: r,
                    locations: locations.clone(),
                }),
                None => fallback(CovarianceFamily::Spatial {
                    range: *range,
                    locations: locations.clone(),
                }),
            })
        }
    }
}

const CORRELOGRAM_BINS: usize = 10;

/// Least-squares fit of `exp(-d/r)` to the binned empirical correlogram.
fn fit_exponential_range(e: &[f64], locations: &[Vec<f64>]) -> Option<f64> {
    let n = e.len();
    let mean = e.iter().sum::<f64>() / n as f64;
    let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return None;
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&locations[i], &locations[j]);
            pairs.push((d, (e[i] - mean) * (e[j] - mean) / var));
        }
    }
    let dmax = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let dmin = pairs
        .iter()
        .map(|p| p.0)
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(dmax > 0.0) {
        return None;
    }
    let width = dmax / 2.0 / CORRELOGRAM_BINS as f64;
    let mut sums = [(0.0, 0.0, 0usize); CORRELOGRAM_BINS];
    for (d, c) in pairs {
        let b = (d / width) as usize;
        if b < CORRELOGRAM_BINS {
            sums[b].0 += d;
            sums[b].1 += c;
            sums[b].2 += 1;
        }
    }
    let bins: Vec<(f64, f64, f64)> = sums
        .iter()
        .filter(|s| s.2 > 0)
        .map(|s| (s.0 / s.2 as f64, s.1 / s.2 as f64, s.2 as f64))
        .collect();
    let loss = |log_r: f64| {
        let r = log_r.exp();
        bins.iter()
            .map(|(d, c, w)| w * (c - (-d / r).exp()).powi(2))
            .sum::<f64>()
    };
    let (lo, hi) = ((dmin / 10.0).ln(), (dmax * 10.0).ln());
    Some(crate::optim::grid_then_golden(loss, lo, hi, 40).0.exp())
}

/// Cross-covariance of `q` future observations with the `n` observed ones.
///
/// Returns `(Δ, Σ_0)` with `Δ` of size `q × n`. Only AR(1) defines a
/// cross-covariance for future indices; the other families return
/// `Δ = 0` and `Σ_0 = I`.
pub fn cross_cov(
    spec: &CovarianceSpec,
    n: usize,
    horizons: &[i64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if let Some(&h) = horizons.iter().find(|h| **h <= 0) {
        return Err(Error::InvalidHorizon(h));
    }
    let q = horizons.len();
    match spec.family {
        CovarianceFamily::Ar1 { theta } => {
            let delta = DMatrix::from_fn(q, n, |j, i| {
                theta.powi((n as i64 + horizons[j] - (i as i64 + 1)) as i32)
            });
            let sigma0 = DMatrix::from_fn(q, q, |j, k| {
                theta.powi((horizons[j] - horizons[k]).unsigned_abs() as i32)
            });
            Ok((delta, sigma0))
        }
        _ => Ok((DMatrix::zeros(q, n), DMatrix::identity(q, q))),
    }
}

/// Cross-covariance for new spatial locations under the exponential model.
pub fn spatial_cross_cov(
    range: f64,
    observed: &[Vec<f64>],
    new: &[Vec<f64>],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let rho = |a: &[f64], b: &[f64]| (-euclidean(a, b) / range).exp();
    let delta = DMatrix::from_fn(new.len(), observed.len(), |j, i| rho(&new[j], &observed[i]));
    let sigma0 = DMatrix::from_fn(new.len(), new.len(), |j, k| rho(&new[j], &new[k]));
    (delta, sigma0)
}
