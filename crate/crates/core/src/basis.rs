//! Finite bases for curves and coefficient functions.
//!
//! A [`BasisSpec`] stores its `K` functions evaluated on a grid as a `K × M`
//! matrix. Curves are reduced to coefficients with [`project`] and the
//! functional model collapses to an ordinary design matrix with
//! [`assemble_design`].

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::funcdata::{Curve, FunctionalSample, Grid};

const CENTERING_TOL: f64 = 1e-8;
const SIGN_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// Clamped B-splines of the given order (degree `order - 1`).
    BSpline { order: usize },
    /// Functional principal components of a sample.
    Fpc,
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisFamily::BSpline { order } => write!(f, "bspline(order={order})"),
            BasisFamily::Fpc => write!(f, "fpc"),
        }
    }
}

/// `K` basis functions evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    family: BasisFamily,
    grid: Grid,
    eval: DMatrix<f64>,
    eigenvalues: Option<Vec<f64>>,
}

impl BasisSpec {
    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of basis functions.
    pub fn k(&self) -> usize {
        self.eval.nrows()
    }

    /// The `K × M` evaluation matrix.
    pub fn eval(&self) -> &DMatrix<f64> {
        &self.eval
    }

    /// Covariance eigenvalues for FPC bases, nonincreasing.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    pub fn function(&self, k: usize) -> Curve {
        Curve::new(
            self.grid.clone(),
            self.eval.row(k).iter().copied().collect(),
        )
        .expect("basis rows are finite")
    }

    /// The first `k` functions. Only meaningful for nested families such
    /// as FPC; B-spline bases of different sizes do not nest.
    pub fn truncate(&self, k: usize) -> Result<BasisSpec> {
        if k == 0 || k > self.k() {
            return Err(Error::InvalidBasis(format!(
                "cannot truncate {} functions to {k}",
                self.k()
            )));
        }
        Ok(BasisSpec {
            family: self.family,
            grid: self.grid.clone(),
            eval: self.eval.rows(0, k).into_owned(),
            eigenvalues: self.eigenvalues.as_ref().map(|e| e[..k].to_vec()),
        })
    }

    /// Quadrature Gram matrix `⟨e_j, e_k⟩`.
    pub fn gram(&self) -> DMatrix<f64> {
        let weighted = weight_columns(&self.eval, self.grid.weights());
        &weighted * self.eval.transpose()
    }

    /// Writes one row per basis function, columns are grid points.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["basis".to_string()];
        header.extend(self.grid.points().iter().map(|t| format!("{t}")));
        w.write_record(&header)
            .map_err(|e| Error::Io(e.to_string()))?;
        for (k, row) in self.eval.row_iter().enumerate() {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Multiplies column `m` of `a` by `w[m]`.
fn weight_columns(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut col, wm) in out.column_iter_mut().zip(w) {
        col *= *wm;
    }
    out
}

/// Clamped uniform knot vector for `k` functions of the given order.
pub fn clamped_knots(a: f64, b: f64, k: usize, order: usize) -> Vec<f64> {
    let interior = k - order;
    let mut knots = vec![a; order];
    let h = (b - a) / (interior + 1) as f64;
    knots.extend((1..=interior).map(|j| a + j as f64 * h));
    knots.extend(std::iter::repeat_n(b, order));
    knots
}

/// Nonzero B-spline values at `t` for the knot span `span`:
/// `out[r] = B_{span - order + 1 + r}(t)`.
fn nonzero_basis(knots: &[f64], span: usize, t: f64, order: usize, out: &mut [f64]) {
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..order {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// `K` clamped B-splines of the given order on uniform knots over the grid.
pub fn bspline_basis(grid: &Grid, k: usize, order: usize) -> Result<BasisSpec> {
    if order < 2 {
        return Err(Error::InvalidBasis(format!(
            "order must be >= 2, got {order}"
        )));
    }
    if k < order {
        return Err(Error::InvalidBasis(format!(
            "B-spline basis needs K >= order (K={k}, order={order})"
        )));
    }
    let (a, b) = (grid.start(), grid.end());
    let knots = clamped_knots(a, b, k, order);
    let mut eval = DMatrix::zeros(k, grid.len());
    let mut vals = vec![0.0; order];
    for (m, &t) in grid.points().iter().enumerate() {
        // span index s with knots[s] <= t < knots[s+1], last span at t = b
        let span = if t >= b {
            k - 1
        } else {
            let upper = knots[order..=k].partition_point(|&u| u <= t);
            order - 1 + upper
        };
        nonzero_basis(&knots, span, t, order, &mut vals);
        for (r, v) in vals.iter().enumerate() {
            eval[(span + 1 - order + r, m)] = *v;
        }
    }
    Ok(BasisSpec {
        family: BasisFamily::BSpline { order },
        grid: grid.clone(),
        eval,
        eigenvalues: None,
    })
}

/// Leading `k` functional principal components of a centered sample.
///
/// The covariance operator is discretized as `D^{1/2} Cov D^{1/2}` with `D`
/// the quadrature weights, so eigenfunctions come out orthonormal in `L²`.
/// Each eigenfunction has a nonnegative integral (ties: nonnegative value at
/// the first grid point).
pub fn fpc_basis(sample: &FunctionalSample, k: usize) -> Result<BasisSpec> {
    let n = sample.len();
    let m = sample.grid().len();
    if k == 0 {
        return Err(Error::InvalidBasis("K must be >= 1".into()));
    }
    let attainable = n.saturating_sub(1).min(m);
    if k > attainable {
        return Err(Error::RankExceeded {
            requested: k,
            attainable,
        });
    }
    let scale = sample.values().amax().max(1.0);
    let mean = sample.mean();
    if mean
        .values()
        .iter()
        .any(|v| v.abs() > CENTERING_TOL * scale)
    {
        return Err(Error::InvalidInput(
            "FPC basis needs a centered sample".into(),
        ));
    }
    let w = sample.grid().weights();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut a = weight_columns(sample.values(), &sqrt_w);
    a /= (n as f64).sqrt();
    let (values, vectors) = weighted_eigen(&a, k)?;

    let mut eval = DMatrix::zeros(k, m);
    let mut eigenvalues = Vec::with_capacity(k);
    for (row, (lambda, v)) in values.into_iter().zip(vectors).enumerate() {
        eigenvalues.push(lambda.max(0.0));
        let mut f: Vec<f64> = (0..m).map(|j| v[j] / sqrt_w[j]).collect();
        let integral: f64 = f.iter().zip(w).map(|(a, b)| a * b).sum();
        let flip = if integral.abs() <= SIGN_TIE_TOL {
            f[0] < 0.0
        } else {
            integral < 0.0
        };
        if flip {
            f.iter_mut().for_each(|v| *v = -*v);
        }
        for (j, v) in f.into_iter().enumerate() {
            eval[(row, j)] = v;
        }
    }
    for i in 1..eigenvalues.len() {
        eigenvalues[i] = eigenvalues[i].min(eigenvalues[i - 1]);
    }
    Ok(BasisSpec {
        family: BasisFamily::Fpc,
        grid: sample.grid().clone(),
        eval,
        eigenvalues: Some(eigenvalues),
    })
}

/// Leading `k` eigenpairs of `AᵀA` for an `n × M` matrix `A`, largest first.
///
/// Uses the `M × M` problem directly when it is not much larger than the
/// `n × n` one; otherwise solves `A Aᵀ` and maps the eigenvectors back,
/// which requires the leading `k` eigenvalues to be nonzero.
fn weighted_eigen(a: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let (n, m) = a.shape();
    let leading = |eig: nalgebra::SymmetricEigen<f64, nalgebra::Dyn>| {
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        idx.truncate(k);
        let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors: Vec<DVector<f64>> = idx
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        (values, vectors)
    };
    if m <= 2 * n.max(1) || m <= 400 {
        return Ok(leading(a.tr_mul(a).symmetric_eigen()));
    }
    let (values, small) = leading((a * a.transpose()).symmetric_eigen());
    let top = values.first().copied().unwrap_or(0.0);
    let attainable = values.iter().filter(|v| **v > 1e-12 * top).count();
    if attainable < k {
        return Err(Error::RankExceeded {
            requested: k,
            attainable,
        });
    }
    let vectors = values
        .iter()
        .zip(small)
        .map(|(lambda, u)| a.tr_mul(&u) / lambda.sqrt())
        .collect();
    Ok((values, vectors))
}

/// Coefficients of each curve in the basis, one row per curve.
///
/// FPC: inner products with the eigenfunctions. B-spline: least squares
/// under the quadrature weights.
pub fn project(sample: &FunctionalSample, basis: &BasisSpec) -> Result<DMatrix<f64>> {
    sample.grid().ensure_compatible(basis.grid())?;
    let weighted = weight_columns(&basis.eval, basis.grid.weights());
    // K × n inner products ⟨ψ_k, X_i⟩
    let ip = &weighted * sample.values().transpose();
    match basis.family {
        BasisFamily::Fpc => Ok(ip.transpose()),
        BasisFamily::BSpline { .. } => {
            let gram = &weighted * basis.eval.transpose();
            let chol = gram.cholesky().ok_or(Error::SingularGram)?;
            Ok(chol.solve(&ip).transpose())
        }
    }
}

/// The linearized regression problem for one functional covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    z: DMatrix<f64>,
    coef: DMatrix<f64>,
    basis_x: BasisSpec,
    basis_beta: BasisSpec,
}

impl DesignMatrix {
    /// The `n × K_β` regression matrix.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// The `n × K_x` coefficient matrix of the predictor expansion.
    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn basis_x(&self) -> &BasisSpec {
        &self.basis_x
    }

    pub fn basis_beta(&self) -> &BasisSpec {
        &self.basis_beta
    }

    pub fn into_z(self) -> DMatrix<f64> {
        self.z
    }
}

/// `Z = C Ψ_w φᵀ`, i.e. `Z_ik = ⟨Σ_j C_ij ψ_j, φ_k⟩`.
pub fn assemble_design(
    coef: &DMatrix<f64>,
    basis_x: &BasisSpec,
    basis_beta: &BasisSpec,
) -> Result<DesignMatrix> {
    basis_x.grid.ensure_compatible(&basis_beta.grid)?;
    if coef.ncols() != basis_x.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficient columns for a basis of {} functions",
            coef.ncols(),
            basis_x.k()
        )));
    }
    let cross = weight_columns(&basis_x.eval, basis_x.grid.weights()) * basis_beta.eval.transpose();
    Ok(DesignMatrix {
        z: coef * cross,
        coef: coef.clone(),
        basis_x: basis_x.clone(),
        basis_beta: basis_beta.clone(),
    })
}

/// Projects a sample and assembles the design with one shared basis.
pub fn design(sample: &FunctionalSample, basis: &BasisSpec) -> Result<DesignMatrix> {
    let coef = project(sample, basis)?;
    assemble_design(&coef, basis, basis)
}

/// `β̂(t_m) = Σ_k b_k φ_k(t_m)`.
pub fn beta_curve(b: &DVector<f64>, basis_beta: &BasisSpec) -> Result<Curve> {
    if b.len() != basis_beta.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a basis of {} functions",
            b.len(),
            basis_beta.k()
        )));
    }
    let values = basis_beta.eval.tr_mul(b);
    Curve::new(basis_beta.grid.clone(), values.iter().copied().collect())
}
