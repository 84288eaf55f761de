//! Generalized least squares for the linearized functional model.
//!
//! [`fit_gls`] solves one GLS problem for a fixed covariance. The functional
//! layer on top ([`select_model`], [`fit_igls`], [`predict`]) handles
//! centering, basis construction, GCCV-driven selection of the basis
//! dimension and covariance parameter, and forecasting.

mod igls;
mod predict;
mod report;
mod select;

pub use igls::{fit_igls, igls_model, IglsFit, IglsOptions};
pub use predict::{predict, Prediction};
pub use report::{write_beta_csv, write_summary, ReportFormat};
pub use select::{
    select_model, Component, FglsFit, GccvScale, KSearch, Method, SelectOptions, ThetaSearch,
};

use nalgebra::{DMatrix, DVector};

use crate::covmodels::{whiten, CovarianceSpec};
use crate::error::{Error, Result};

/// Relative size of a QR pivot below which a column counts as dependent.
const RANK_TOL: f64 = 1e-9;

/// A GLS fit of `y = Z b + ε` with `Cov(ε) = σ² Σ(θ)` for a fixed `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsFit {
    pub b: DVector<f64>,
    /// `σ̂² (Zᵀ W Z)^{-1}`.
    pub cov_b: DMatrix<f64>,
    pub sigma2_hat: f64,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `tr(C)` with `C = 2 H Σ − H Σ Hᵀ` for the hat matrix `H`.
    pub df: f64,
    /// GCCV on the observed residuals.
    pub gccv: f64,
    /// The same criterion on whitened residuals, where `tr(C) = K`.
    pub gccv_decorrelated: f64,
    /// `r̃ᵀ r̃`, the GLS criterion at the estimate.
    pub whitened_rss: f64,
    /// The covariance used, with `sigma2` set to `σ̂²`.
    pub covariance: CovarianceSpec,
}

/// `RSS / (1 − tr/n)²`, or `+∞` when `tr ≥ n`.
pub fn gccv_value(rss: f64, trace: f64, n: usize) -> f64 {
    let n = n as f64;
    if trace >= n {
        return f64::INFINITY;
    }
    rss / (1.0 - trace / n).powi(2)
}

/// BLUE of `b` for the given covariance, via whitening and a QR solve.
pub fn fit_gls(y: &DVector<f64>, z: &DMatrix<f64>, spec: &CovarianceSpec) -> Result<GlsFit> {
    let (n, k) = z.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            response: y.len(),
            curves: n,
        });
    }
    if k == 0 || n <= k {
        return Err(Error::InvalidInput(format!(
            "need more observations than coefficients (n={n}, K={k})"
        )));
    }
    let w = spec.whitener(n)?;
    let zt = w.apply(z);
    let yt = w.apply_vec(y);

    let qr = zt.clone().qr();
    let r = qr.r();
    let dependent: Vec<usize> = (0..k)
        .filter(|&i| {
            let norm = zt.column(i).norm();
            norm == 0.0 || r[(i, i)].abs() <= RANK_TOL * norm
        })
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let qty = qr.q().tr_mul(&yt);
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { columns: vec![] })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { columns: vec![] })?;
    let g_inv = &r_inv * r_inv.transpose();

    let fitted = z * &b;
    let residuals = y - &fitted;
    let rt = &yt - &zt * &b;
    let whitened_rss = rt.norm_squared();
    let rss = residuals.norm_squared();
    // H Σ = Z G⁻¹ Zᵀ is symmetric and H Σ Hᵀ reduces to the same matrix
    let df = g_inv.component_mul(&z.tr_mul(z)).sum();
    let gccv = gccv_value(rss, df, n);
    let gccv_decorrelated = gccv_value(whitened_rss, k as f64, n);
    let sigma2_hat = if df < n as f64 {
        whitened_rss / (n as f64 - df)
    } else {
        f64::INFINITY
    };
    let cov_b = &g_inv * sigma2_hat;
    Ok(GlsFit {
        b,
        cov_b,
        sigma2_hat,
        fitted,
        residuals,
        df,
        gccv,
        gccv_decorrelated,
        whitened_rss,
        covariance: CovarianceSpec {
            family: spec.family.clone(),
            sigma2: sigma2_hat,
        },
    })
}

/// `rᵀ Σ^{-1} r` with `r = y − Z b`, computed by whitening.
pub fn gls_criterion(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if z.nrows() != y.len() || z.ncols() != b.len() || sigma.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "y has {} rows, Z is {}x{}, b has {}, Σ is {}x{}",
            y.len(),
            z.nrows(),
            z.ncols(),
            b.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let r = y - z * b;
    Ok(whiten(sigma)?.apply_vec(&r).norm_squared())
}

/// GCCV for an arbitrary smoother `S`:
/// `Σ (y − ŷ)² / (1 − tr(2 S Σ − S Σ Sᵀ)/n)²`.
pub fn gccv_score(
    y: &DVector<f64>,
    yhat: &DVector<f64>,
    s: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    let n = y.len();
    if yhat.len() != n || s.shape() != (n, n) || sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(
            "GCCV needs y, ŷ of length n and n×n smoother and covariance".into(),
        ));
    }
    let s_sigma = s * sigma;
    // tr(S Σ Sᵀ) = Σ_ij (S Σ)_ij S_ij
    let trace = 2.0 * s_sigma.trace() - s_sigma.component_mul(s).sum();
    Ok(gccv_value((y - yhat).norm_squared(), trace, n))
}
