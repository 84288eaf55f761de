//! Reference implementations built from explicit inverses and plain loops.
#![allow(dead_code)]

use funcgls::covmodels::CovarianceFamily;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ` written out entry by entry from each family's definition.
pub fn sigma(family: &CovarianceFamily, n: usize) -> DMatrix<f64> {
    match family {
        CovarianceFamily::Identity => DMatrix::identity(n, n),
        CovarianceFamily::Equicorrelated { theta } => {
            DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { *theta })
        }
        CovarianceFamily::Ar1 { theta } => {
            DMatrix::from_fn(n, n, |i, j| theta.powi((i as i32 - j as i32).abs()))
        }
        CovarianceFamily::HeteroBlock { variances, sizes } => {
            let mut m = DMatrix::zeros(n, n);
            let mut i = 0;
            for (v, s) in variances.iter().zip(sizes) {
                for _ in 0..*s {
                    m[(i, i)] = *v;
                    i += 1;
                }
            }
            m
        }
        CovarianceFamily::Spatial { range, locations } => DMatrix::from_fn(n, n, |i, j| {
            let d: f64 = locations[i]
                .iter()
                .zip(&locations[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (-d / range).exp()
        }),
    }
}

pub struct DenseFit {
    pub b: DVector<f64>,
    pub fitted: DVector<f64>,
    /// `tr(2 S Σ − S Σ Sᵀ)` with `S = Z (Zᵀ W Z)⁻¹ Zᵀ W`.
    pub trace_c: f64,
    pub gccv: f64,
}

/// GLS by explicit inversion of `Σ` and `Zᵀ W Z`.
pub fn dense_gls(y: &DVector<f64>, z: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DenseFit {
    let n = y.len() as f64;
    let w = sigma.clone().try_inverse().expect("Σ invertible");
    let g = (z.transpose() * &w * z)
        .try_inverse()
        .expect("Zᵀ W Z invertible");
    let b = &g * z.transpose() * &w * y;
    let s = z * &g * z.transpose() * &w;
    let fitted = &s * y;
    let c = 2.0 * &s * sigma - &s * sigma * s.transpose();
    let trace_c = c.trace();
    let rss: f64 = (y - &fitted).iter().map(|r| r * r).sum();
    let gccv = rss / (1.0 - trace_c / n).powi(2);
    DenseFit {
        b,
        fitted,
        trace_c,
        gccv,
    }
}

/// Ordinary least squares with the classical GCV score.
pub fn ols_gcv(y: &DVector<f64>, z: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>, f64) {
    let n = y.len() as f64;
    let zt = z.transpose();
    let b = (&zt * z).try_inverse().expect("ZᵀZ invertible") * &zt * y;
    let fitted = z * &b;
    let hat = z * (&zt * z).try_inverse().unwrap() * &zt;
    let rss: f64 = (y - &fitted).iter().map(|r| r * r).sum();
    (b, fitted, rss / (1.0 - hat.trace() / n).powi(2))
}

/// Biased distance correlation with every mean recomputed inside the loops.
pub fn naive_dcor(
    dx: &dyn Fn(usize, usize) -> f64,
    dy: &dyn Fn(usize, usize) -> f64,
    n: usize,
) -> f64 {
    let centered = |d: &dyn Fn(usize, usize) -> f64| {
        let mut out = vec![vec![0.0; n]; n];
        for k in 0..n {
            for l in 0..n {
                let (mut row, mut col, mut all) = (0.0, 0.0, 0.0);
                for m in 0..n {
                    row += d(k, m);
                    col += d(m, l);
                    for p in 0..n {
                        all += d(m, p);
                    }
                }
                let nf = n as f64;
                out[k][l] = d(k, l) - row / nf - col / nf + all / (nf * nf);
            }
        }
        out
    };
    let (a, b) = (centered(dx), centered(dy));
    let v = |u: &Vec<Vec<f64>>, w: &Vec<Vec<f64>>| {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += u[k][l] * w[k][l];
            }
        }
        s / (n * n) as f64
    };
    let (xy, xx, yy) = (v(&a, &b), v(&a, &a), v(&b, &b));
    if xx * yy <= 0.0 {
        return 0.0;
    }
    (xy.max(0.0) / (xx * yy).sqrt()).sqrt()
}

/// Cox–de Boor recursion for the `i`-th B-spline of `order` on `knots`,
/// right-continuous except at the last knot.
pub fn cox_de_boor(knots: &[f64], i: usize, order: usize, t: f64) -> f64 {
    let last = *knots.last().unwrap();
    if order == 1 {
        let (a, b) = (knots[i], knots[i + 1]);
        let inside = (a <= t && t < b) || (t == last && b == last && a < b);
        return if inside { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + order - 1] - knots[i];
    if d1 > 0.0 {
        v += (t - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, t);
    }
    let d2 = knots[i + order] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + order] - t) / d2 * cox_de_boor(knots, i + 1, order - 1, t);
    }
    v
}

/// A member of every covariance family for `n` observations, kept well
/// inside the positive definite range.
pub fn families(n: usize, seed: u64) -> Vec<CovarianceFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lower = -1.0 / (n as f64 - 1.0);
    let split = rng.random_range(1..n);
    vec![
        CovarianceFamily::Identity,
        CovarianceFamily::Equicorrelated {
            theta: rng.random_range(0.8 * lower..0.9),
        },
        CovarianceFamily::HeteroBlock {
            variances: vec![rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)],
            sizes: vec![split, n - split],
        },
        CovarianceFamily::Ar1 {
            theta: rng.random_range(-0.95..0.95),
        },
        CovarianceFamily::Spatial {
            range: rng.random_range(0.1..1.0),
            locations: (0..n)
                .map(|i| {
                    vec![
                        0.5 * i as f64 + rng.random_range(0.0..0.2),
                        rng.random_range(0.0..1.0),
                    ]
                })
                .collect(),
        },
    ]
}

/// `y` and a full-rank `Z` with entries in (−1, 1).
pub fn system(n: usize, k: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    (y, z)
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}
