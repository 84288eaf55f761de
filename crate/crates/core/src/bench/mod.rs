//! Monte-Carlo benchmarks and rolling forecasts.
//!
//! [`run_simulation`] evaluates LM, GLS and iGLS on replicas of a functional
//! linear model with AR(1) errors; [`SimStudy`] runs a grid of cells and
//! renders the summary tables. [`rolling_forecast`] replays a rolling-origin
//! evaluation on panel data.

mod config;
mod rolling;
mod sim;
mod tables;

pub use config::{parse_pairs, FitConfig, SimPlan};
pub use rolling::{
    read_panel_covariate, read_panel_rates, rolling_forecast, synthetic_panel, Panel, PanelSpec,
    RollingConfig, RollingReport,
};
pub use sim::{
    generate_replica, run_replica, run_simulation, MethodRecord, MethodSummary, Replica,
    ReplicaRecord, SimConfig, SimReport,
};
pub use tables::{SimStudy, TableFormat};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fgls::FglsFit;
use crate::funcdata::{Curve, FunctionalSample, Grid};

/// The two coefficient functions of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// `2 sin(πt/2) + 4 sin(3πt/2) + 5 sin(5πt/2)`, spanned by the first three
    /// Wiener eigenfunctions.
    A,
    /// `log(15t² + 10) + cos(4πt)`.
    B,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            _ => Err(Error::Config(format!(
                "unknown scenario {s:?} (expected A or B)"
            ))),
        }
    }
}

/// `β` of the scenario evaluated on `grid`.
pub fn make_beta(scenario: Scenario, grid: &Grid) -> Curve {
    match scenario {
        Scenario::A => grid.eval(|t| {
            2.0 * (0.5 * PI * t).sin() + 4.0 * (1.5 * PI * t).sin() + 5.0 * (2.5 * PI * t).sin()
        }),
        Scenario::B => grid.eval(|t| (15.0 * t * t + 10.0).ln() + (4.0 * PI * t).cos()),
    }
}

/// Degrees below a threshold: `min(x(t) − thres, 0)` pointwise.
pub fn threshold_transform(curves: &FunctionalSample, thres: f64) -> FunctionalSample {
    curves.map(|v| (v - thres).min(0.0))
}

/// Projections `v_i = ⟨X_i, β̂⟩` and the mean curve of each quartile group.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributions {
    pub v: Vec<f64>,
    /// Row indices of each group, lowest projections first.
    pub groups: [Vec<usize>; 4],
    pub means: [Curve; 4],
}

/// Splits the curves by the quartiles of their projection on `β̂`.
///
/// Curve `i` with rank `r` (0-based, ties in index order) goes to the first
/// group `g` with `(r + 1)/n ≤ (g + 1)/4`, so every group is non-empty.
pub fn contribution_quartiles(fit: &FglsFit, sample: &FunctionalSample) -> Result<Contributions> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 curves for quartiles, got {n}"
        )));
    }
    let v: Vec<f64> = sample
        .inner_products(fit.beta_hat())?
        .iter()
        .copied()
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut groups: [Vec<usize>; 4] = Default::default();
    for (r, &i) in order.iter().enumerate() {
        let g = (0..4).find(|g| 4 * (r + 1) <= n * (g + 1)).unwrap_or(3);
        groups[g].push(i);
    }
    let means = groups.clone().map(|rows| sample.select(&rows).mean());
    Ok(Contributions { v, groups, means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodels::CovarianceFamily;
    use crate::fgls::{select_model, SelectOptions};

    #[test]
    fn beta_values() {
        let g = Grid::unit(3).unwrap();
        let a = make_beta(Scenario::A, &g);
        assert!(a.values()[0].abs() < 1e-15);
        assert!((a.values()[2] - 3.0).abs() < 1e-12);
        let b = make_beta(Scenario::B, &g);
        assert!((b.values()[0] - (10f64.ln() + 1.0)).abs() < 1e-12);
        assert!((b.values()[0] - 3.302585).abs() < 1e-6);
    }

    #[test]
    fn thresholds() {
        let g = Grid::unit(5).unwrap();
        let s = FunctionalSample::from_rows(
            g,
            &[
                vec![25.0; 5],
                vec![7.0; 5],
                vec![8.0, 10.0, 12.0, 9.5, 10.0],
            ],
        )
        .unwrap();
        let t = threshold_transform(&s, 10.0);
        assert!(t.values().row(0).iter().all(|v| *v == 0.0));
        assert!(t.values().row(1).iter().all(|v| *v == -3.0));
        let mixed: Vec<f64> = t.values().row(2).iter().copied().collect();
        assert_eq!(mixed, vec![-2.0, 0.0, 0.0, -0.5, 0.0]);
    }

    fn constant_fit(beta: f64, levels: &[f64]) -> (FglsFit, FunctionalSample) {
        let g = Grid::unit(11).unwrap();
        let rows: Vec<Vec<f64>> = levels
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (0..11)
                    .map(|j| c + 0.01 * ((i * 7 + j * 3) % 5) as f64)
                    .collect()
            })
            .collect();
        let x = FunctionalSample::from_rows(g.clone(), &rows).unwrap();
        let y: Vec<f64> = levels.iter().map(|c| 2.0 * c).collect();
        let mut fit = select_model(
            &y,
            std::slice::from_ref(&x),
            &SelectOptions::fpc([1], CovarianceFamily::Identity),
        )
        .unwrap();
        fit.components[0].beta_hat = g.eval(|_| beta);
        (fit, x)
    }

    #[test]
    fn quartiles_of_constant_curves() {
        let levels = [5.0, 1.0, 7.0, 3.0, 2.0, 8.0, 6.0, 4.0];
        let (fit, x) = constant_fit(1.0, &levels);
        let c = contribution_quartiles(&fit, &x).unwrap();
        for (v, i) in c.v.iter().zip(0..) {
            assert!((v - x.curve(i).integral()).abs() < 1e-12);
        }
        assert_eq!(c.groups, [vec![1, 4], vec![3, 7], vec![0, 6], vec![2, 5]]);
        let first = c.means[0].integral();
        assert!((first - 1.5).abs() < 0.05, "{first}");
    }

    #[test]
    fn zero_beta_splits_by_index() {
        let (fit, x) = constant_fit(0.0, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = contribution_quartiles(&fit, &x).unwrap();
        assert!(c.v.iter().all(|v| *v == 0.0));
        assert_eq!(c.groups, [vec![0], vec![1], vec![2], vec![3, 4]]);
        assert!(c
            .means
            .iter()
            .all(|m| m.values().iter().all(|v| v.is_finite())));
    }

    #[test]
    fn four_curves_one_per_group() {
        let (fit, x) = constant_fit(1.0, &[4.0, 3.0, 2.0, 1.0]);
        let c = contribution_quartiles(&fit, &x).unwrap();
        assert_eq!(c.groups, [vec![3], vec![2], vec![1], vec![0]]);
        let (fit, x) = constant_fit(1.0, &[4.0, 3.0, 2.0]);
        assert!(contribution_quartiles(&fit, &x).is_err());
    }
}
