//! Forecasts with the covariance correction term.

use nalgebra::{DMatrix, DVector};

use super::FglsFit;
use crate::covmodels::cross_cov;
use crate::error::{Error, Result};
use crate::funcdata::FunctionalSample;

/// Numerical slack before a negative variance is reported.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub horizons: Vec<i64>,
    /// `regression_part + correction_part`.
    pub point: DVector<f64>,
    /// `σ̂² (Σ_0 − Δ Σ^{-1} Δᵀ)`, projected onto the PSD cone.
    pub variance: DMatrix<f64>,
    /// `ȳ + ⟨X_0 − x̄, β̂⟩`.
    pub regression_part: DVector<f64>,
    /// `Δ Σ^{-1} (y − ŷ)`.
    pub correction_part: DVector<f64>,
    /// The variance had an eigenvalue below `-1e-10` that was clipped to 0.
    pub clipped: bool,
}

/// Predicts the responses of new curves observed `horizons` steps after the
/// end of the training sample. Row `j` of every covariate belongs to
/// horizon `horizons[j]`.
///
/// The variance treats `θ̂` and `β̂` as known, so it understates the
/// uncertainty of the plug-in forecast.
pub fn predict(fit: &FglsFit, new: &[FunctionalSample], horizons: &[i64]) -> Result<Prediction> {
    let q = horizons.len();
    if let Some(x) = new.iter().find(|x| x.len() != q) {
        return Err(Error::DimensionMismatch(format!(
            "{} new curves for {q} horizons",
            x.len()
        )));
    }
    for (c, x) in fit.components.iter().zip(new) {
        c.basis.grid().ensure_compatible(x.grid())?;
    }
    let regression_part = fit.regression(new)?;
    let residuals = &fit.gls.residuals;
    let n = residuals.len();
    let spec = &fit.gls.covariance;
    let (delta, sigma0) = cross_cov(spec, n, horizons)?;
    let (correction_part, explained) = if delta.iter().all(|v| *v == 0.0) {
        (DVector::zeros(q), DMatrix::zeros(q, q))
    } else {
        let w = spec.whitener(n)?;
        let r = DMatrix::from_column_slice(n, 1, residuals.as_slice());
        let sigma_inv_r = w.solve(&r);
        let correction = &delta * sigma_inv_r;
        let wd = w.apply(&delta.transpose());
        (
            DVector::from_column_slice(correction.as_slice()),
            wd.tr_mul(&wd),
        )
    };
    let raw = (sigma0 - explained) * fit.gls.sigma2_hat;
    let raw = (&raw + raw.transpose()) * 0.5;
    let eig = raw.clone().symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let scale = raw.amax().max(1.0);
    let (variance, clipped) = if q > 0 && min_eig < 0.0 {
        let clipped_vals = eig.eigenvalues.map(|v| v.max(0.0));
        let v = &eig.eigenvectors
            * DMatrix::from_diagonal(&clipped_vals)
            * eig.eigenvectors.transpose();
        (v, min_eig < -NEGATIVE_VARIANCE_TOL * scale)
    } else {
        (raw, false)
    };
    Ok(Prediction {
        horizons: horizons.to_vec(),
        point: &regression_part + &correction_part,
        variance,
        regression_part,
        correction_part,
        clipped,
    })
}
