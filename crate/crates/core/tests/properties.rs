//! Structural invariants of curves, bases, covariances, fits and dCor.

mod oracle;

use funcgls::basis::{assemble_design, bspline_basis, fpc_basis, project};
use funcgls::covmodels::{build_sigma, estimate_theta, whiten, CovarianceFamily, CovarianceSpec};
use funcgls::dcor::{distance_correlation, DistanceMatrix, Sample};
use funcgls::fgls::{fit_gls, predict, select_model, SelectOptions};
use funcgls::funcdata::{center, inner_product, simulate_wiener, Curve, FunctionalSample, Grid};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn curve(grid: &Grid, coefs: &[f64]) -> Curve {
    grid.eval(|t| {
        coefs
            .iter()
            .enumerate()
            .map(|(j, c)| c * (j as f64 * 2.1 * t).cos())
            .sum()
    })
}

fn coefs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 4)
}

fn grid_points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..20).prop_map(|steps| {
        let mut t = vec![-0.5];
        for s in steps {
            t.push(t.last().unwrap() + s);
        }
        t
    })
}

fn ar1_noise(n: usize, theta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut e = Vec::with_capacity(n);
    let z: f64 = StandardNormal.sample(rng);
    let mut prev = z / (1.0 - theta * theta).sqrt();
    for _ in 0..n {
        e.push(prev);
        let z: f64 = StandardNormal.sample(rng);
        prev = theta * prev + z;
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_weights_sum_to_span(points in grid_points()) {
        let g = Grid::new(points).unwrap();
        let total: f64 = g.weights().iter().sum();
        prop_assert!(g.weights().iter().all(|w| *w >= 0.0));
        prop_assert!((total - g.span()).abs() <= 1e-10 * g.span());
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear(a in coefs(), b in coefs(), c in coefs(), s in -2.0f64..2.0) {
        let g = Grid::unit(31).unwrap();
        let (f, h, k) = (curve(&g, &a), curve(&g, &b), curve(&g, &c));
        let fh = inner_product(&f, &h).unwrap();
        prop_assert!((fh - inner_product(&h, &f).unwrap()).abs() < 1e-10);
        let combo = Curve::new(g.clone(), f.values().iter().zip(k.values()).map(|(x, y)| s * x + y).collect()).unwrap();
        let lhs = inner_product(&combo, &h).unwrap();
        let rhs = s * fh + inner_product(&k, &h).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        prop_assert!(f.norm_sq() >= 0.0);
        prop_assert!((f.norm_sq() - inner_product(&f, &f).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fpc_eigenvalues_and_orthonormality(n in 10usize..60, k in 1usize..6, seed in 0u64..1000) {
        let g = Grid::unit(41).unwrap();
        let (x, _) = center(&simulate_wiener(n, &g, seed));
        let basis = fpc_basis(&x, k).unwrap();
        let ev = basis.eigenvalues().unwrap();
        prop_assert!(ev.iter().all(|v| *v >= 0.0));
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        let gram = basis.gram();
        prop_assert!((gram - DMatrix::identity(k, k)).amax() < 1e-8);
    }

    #[test]
    fn design_is_linear_in_coefficients(seed in 0u64..1000, s in -3.0f64..3.0) {
        let g = Grid::unit(25).unwrap();
        let bx = bspline_basis(&g, 6, 4).unwrap();
        let bb = bspline_basis(&g, 5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || DMatrix::from_fn(7, 6, |_, _| StandardNormal.sample(&mut rng));
        let (c1, c2) = (draw(), draw());
        let z = |c: &DMatrix<f64>| assemble_design(c, &bx, &bb).unwrap().into_z();
        let lhs = z(&(&c1 * s + &c2));
        let rhs = z(&c1) * s + z(&c2);
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn sigma_is_symmetric_pd_and_whitens(n in 2usize..=30, seed in any::<u64>()) {
        for family in oracle::families(n, seed) {
            let spec = CovarianceSpec::new(family.clone(), 1.0).unwrap();
            let s = build_sigma(&spec, n).unwrap();
            prop_assert!((&s - s.transpose()).amax() <= 1e-14);
            prop_assert!(s.clone().cholesky().is_some());
            for w in [whiten(&s).unwrap(), spec.whitener(n).unwrap()] {
                let round = w.apply(&w.apply(&s).transpose());
                prop_assert!((round - DMatrix::identity(n, n)).amax() < 1e-8, "{family:?}");
            }
        }
    }

    #[test]
    fn hat_matrix_is_an_oblique_projection(n in 6usize..25, seed in any::<u64>()) {
        let (y, z) = oracle::system(n, 3, seed);
        let theta = (seed % 19) as f64 / 10.0 - 0.9;
        let spec = CovarianceSpec::new(CovarianceFamily::Ar1 { theta }, 1.0).unwrap();
        let fit = fit_gls(&y, &z, &spec).unwrap();
        let w = oracle::sigma(&spec.family, n).try_inverse().unwrap();
        let h = &z * (z.transpose() * &w * &z).try_inverse().unwrap() * z.transpose() * &w;
        prop_assert!((&h * &y - &fit.fitted).amax() < 1e-8);
        prop_assert!((&h * &h - &h).amax() < 1e-8);
        prop_assert!((&w * &h - h.transpose() * &w).amax() < 1e-8);
        prop_assert!((&fit.fitted + &fit.residuals - &y).amax() < 1e-14);
    }

    #[test]
    fn selected_fits_are_well_formed(n in 25usize..60, seed in 0u64..500, theta in -0.8f64..0.9) {
        let g = Grid::unit(31).unwrap();
        let x = simulate_wiener(n, &g, seed);
        let beta = g.eval(|t| (3.0 * t).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = ar1_noise(n, theta, &mut rng);
        let y: Vec<f64> = x.inner_products(&beta).unwrap().iter().zip(&noise).map(|(s, e)| s + 0.2 * e).collect();
        let fit = select_model(&y, std::slice::from_ref(&x), &SelectOptions::fpc(1..=5, CovarianceFamily::Ar1 { theta: 0.0 })).unwrap();
        let fitted = fit.fitted();
        for i in 0..n {
            prop_assert!((fitted[i] + fit.residuals()[i] - y[i]).abs() < 1e-12);
        }
        prop_assert!(fit.gls.df > 0.0 && fit.gls.df < n as f64);
        prop_assert!(fit.gls.gccv >= 0.0);
        let cov = &fit.gls.cov_b;
        prop_assert!((cov - cov.transpose()).amax() < 1e-12 * cov.amax().max(1.0));
        prop_assert!(cov.clone().symmetric_eigen().eigenvalues.iter().all(|v| *v >= -1e-12));

        let new = simulate_wiener(3, &g, seed + 1);
        let p = predict(&fit, &[new], &[1, 2, 3]).unwrap();
        prop_assert_eq!(&p.point, &(&p.regression_part + &p.correction_part));
        prop_assert!(p.variance.clone().symmetric_eigen().eigenvalues.iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn identity_prediction_is_the_regression(n in 20usize..50, seed in 0u64..500) {
        let g = Grid::unit(21).unwrap();
        let x = simulate_wiener(n, &g, seed);
        let y: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let fit = select_model(&y, &[x], &SelectOptions::fpc(1..=3, CovarianceFamily::Identity)).unwrap();
        let new = simulate_wiener(2, &g, seed + 7);
        let p = predict(&fit, std::slice::from_ref(&new), &[1, 4]).unwrap();
        prop_assert_eq!(&p.point, &fit.regression(&[new]).unwrap());
        prop_assert!(p.correction_part.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dcor_symmetric_invariant_and_bounded(n in 3usize..25, seed in any::<u64>(), a in 0.1f64..5.0, neg in any::<bool>(), c in -10.0f64..10.0) {
        let (y, m) = oracle::system(n, 2, seed);
        let ys: Vec<f64> = y.iter().copied().collect();
        let r_xy = distance_correlation(Sample::Vectors(&m), Sample::Scalars(&ys)).unwrap();
        let r_yx = distance_correlation(Sample::Scalars(&ys), Sample::Vectors(&m)).unwrap();
        prop_assert_eq!(r_xy.r, r_yx.r);
        prop_assert!((0.0..=1.0).contains(&r_xy.r));
        prop_assert!(r_xy.v2_xx >= 0.0 && r_xy.v2_yy >= 0.0);
        let a = if neg { -a } else { a };
        let moved = m.map(|v| a * v + c);
        let r_moved = distance_correlation(Sample::Vectors(&moved), Sample::Scalars(&ys)).unwrap();
        prop_assert!((r_moved.r - r_xy.r).abs() < 1e-10);
    }

    #[test]
    fn distance_matrices_are_metrics(n in 2usize..15, seed in 0u64..1000) {
        let g = Grid::unit(11).unwrap();
        let d = DistanceMatrix::from_curves(&simulate_wiener(n, &g, seed));
        let d = d.matrix();
        for i in 0..n {
            prop_assert_eq!(d[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
                prop_assert!(d[(i, j)] >= 0.0);
                for k in 0..n {
                    prop_assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_distinct_points_have_unit_dcor(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0) {
        prop_assume!((a - b).abs() > 1e-6 && (c - d).abs() > 1e-6);
        let r = distance_correlation(Sample::Scalars(&[a, b]), Sample::Scalars(&[c, d])).unwrap().r;
        prop_assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wiener_increments_have_the_right_moments() {
    let g = Grid::unit(11).unwrap();
    let n = 10_000;
    let x = simulate_wiener(n, &g, 99);
    let v = x.values();
    for m in 1..g.len() {
        let dt = g.points()[m] - g.points()[m - 1];
        let inc: Vec<f64> = (0..n)
            .map(|i| (v[(i, m)] - v[(i, m - 1)]) / dt.sqrt())
            .collect();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(
            mean.abs() < 4.0 / (n as f64).sqrt(),
            "step {m}: mean {mean}"
        );
        assert!((var - 1.0).abs() < 0.06, "step {m}: var {var}");
    }
}

#[test]
fn fpc_scores_are_uncorrelated() {
    let g = Grid::unit(51).unwrap();
    let (centered, _) = center(&simulate_wiener(1000, &g, 5));
    let basis = fpc_basis(&centered, 4).unwrap();
    let scores = project(&centered, &basis).unwrap();
    for a in 0..4 {
        for b in a + 1..4 {
            let (u, v) = (scores.column(a), scores.column(b));
            let corr = u.dot(&v) / (u.norm() * v.norm());
            assert!(corr.abs() < 0.05, "components {a},{b}: {corr}");
        }
    }
}

#[test]
fn ar1_moment_estimator_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for theta in [0.0, 0.3, 0.6, 0.9] {
        let mse = (0..200)
            .map(|_| {
                let e = ar1_noise(1000, theta, &mut rng);
                let est = estimate_theta(&e, &CovarianceFamily::Ar1 { theta: 0.0 }).unwrap();
                (est.family.theta().unwrap() - theta).powi(2)
            })
            .sum::<f64>()
            / 200.0;
        assert!(mse < 0.01, "theta {theta}: mse {mse}");
    }
}

#[test]
fn gls_beats_ols_under_strong_ar1() {
    // sampling variance of each coefficient over 500 replicas
    let n = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            1.0
        } else {
            (i as f64 * 0.37).sin() + 0.02 * i as f64
        }
    });
    let spec = CovarianceSpec::new(CovarianceFamily::Ar1 { theta: 0.9 }, 1.0).unwrap();
    let (mut gls, mut ols) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let e = ar1_noise(n, 0.9, &mut rng);
        let y = DVector::from_vec(e);
        gls.push(fit_gls(&y, &z, &spec).unwrap().b);
        ols.push(fit_gls(&y, &z, &CovarianceSpec::identity()).unwrap().b);
    }
    let var = |bs: &[DVector<f64>], j: usize| {
        let m = bs.iter().map(|b| b[j]).sum::<f64>() / bs.len() as f64;
        bs.iter().map(|b| (b[j] - m).powi(2)).sum::<f64>() / (bs.len() - 1) as f64
    };
    for j in 0..2 {
        assert!(
            var(&gls, j) <= 1.05 * var(&ols, j),
            "coefficient {j}: {} vs {}",
            var(&gls, j),
            var(&ols, j)
        );
    }
}

#[test]
fn fpc_rows_are_orthonormal_on_uneven_grids() {
    let g = Grid::new(vec![0.0, 0.05, 0.2, 0.3, 0.6, 0.65, 0.9, 1.0]).unwrap();
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            g.points()
                .iter()
                .map(|t| ((i + 1) as f64 * t).sin() + 0.1 * i as f64 * t * t)
                .collect()
        })
        .collect();
    let (x, _) = center(&FunctionalSample::from_rows(g, &rows).unwrap());
    let basis = fpc_basis(&x, 3).unwrap();
    assert!((basis.gram() - DMatrix::identity(3, 3)).amax() < 1e-8);
}
