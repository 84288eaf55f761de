//! Grid-sampled functional data.
//!
//! Every curve lives on a [`Grid`]: a strictly increasing set of evaluation
//! points carrying trapezoid quadrature weights. Inner products, norms and
//! projections are all computed with those weights, so that a curve sampled
//! on `M` points behaves like an element of `L²[a, b]`.

mod io;

pub use io::{read_long_csv, read_response_csv, read_wide_csv, write_wide_csv, WideTable};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const GRID_MATCH_TOL: f64 = 1e-12;

/// Evaluation points `t_1 < ... < t_M` over `[a, b]` with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from strictly increasing points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite point at index {i}")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        let m = points.len();
        let mut weights = vec![0.0; m];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[m - 1] = (points[m - 1] - points[m - 2]) / 2.0;
        for i in 1..m - 1 {
            weights[i] = (points[i + 1] - points[i - 1]) / 2.0;
        }
        Ok(Grid { points, weights })
    }

    /// `m` equispaced points on `[a, b]`.
    pub fn uniform(a: f64, b: f64, m: usize) -> Result<Self> {
        if m < 2 || !(b > a) {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs m >= 2 and b > a (m={m}, a={a}, b={b})"
            )));
        }
        let h = (b - a) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| a + i as f64 * h).collect();
        points[m - 1] = b;
        Grid::new(points)
    }

    /// The default simulation grid: 101 equispaced points on `[0, 1]`.
    pub fn unit(m: usize) -> Result<Self> {
        Grid::uniform(0.0, 1.0, m)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.end() - self.start()
    }

    /// Two grids are compatible when their points agree to within `1e-12`.
    pub fn is_compatible(&self, other: &Grid) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= GRID_MATCH_TOL * (1.0 + a.abs()))
    }

    pub fn ensure_compatible(&self, other: &Grid) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids)
        }
    }

    /// Quadrature inner product of two value vectors sampled on this grid.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "curve lengths {} and {} on a grid of {} points",
                f.len(),
                g.len(),
                self.len()
            )));
        }
        Ok(self.dot_unchecked(f, g))
    }

    pub(crate) fn dot_unchecked(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Evaluates a function at every grid point.
    pub fn eval(&self, f: impl Fn(f64) -> f64) -> Curve {
        Curve {
            grid: self.clone(),
            values: self.points.iter().map(|&t| f(t)).collect(),
        }
    }
}

/// A single function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("curve has non-finite values".into()));
        }
        Ok(Curve { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Curve {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Squared `L²` norm under the grid quadrature.
    pub fn norm_sq(&self) -> f64 {
        self.grid.dot_unchecked(&self.values, &self.values)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Integral of the curve over the grid interval.
    pub fn integral(&self) -> f64 {
        self.grid
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `self - other` on a shared grid.
    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(Curve {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// `∫ f g` approximated by the trapezoid rule on the shared grid.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.grid.ensure_compatible(&g.grid)?;
    Ok(f.grid.dot_unchecked(&f.values, &g.values))
}

/// `n` curves evaluated on a shared grid, one curve per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    values: DMatrix<f64>,
    ids: Option<Vec<String>>,
}

impl FunctionalSample {
    pub fn new(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} columns for a grid of {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value in curve {r} at grid index {c}"
            )));
        }
        Ok(FunctionalSample {
            grid,
            values,
            ids: None,
        })
    }

    pub fn from_rows(grid: Grid, rows: &[Vec<f64>]) -> Result<Self> {
        let m = grid.len();
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "curve {i} has {} values for a grid of {m} points",
                rows[i].len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        FunctionalSample::new(grid, values)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} curves",
                ids.len(),
                self.len()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The `n × M` matrix of evaluations.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Number of curves.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.row(i).iter().copied().collect(),
        }
    }

    /// Pointwise mean curve. Zero curve for an empty sample.
    pub fn mean(&self) -> Curve {
        let n = self.len();
        let values = if n == 0 {
            vec![0.0; self.grid.len()]
        } else {
            self.values
                .column_iter()
                .map(|c| c.sum() / n as f64)
                .collect()
        };
        Curve {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Subtracts `curve` from every row.
    pub fn subtract(&self, curve: &Curve) -> Result<FunctionalSample> {
        self.grid.ensure_compatible(&curve.grid)?;
        let mut values = self.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            col.add_scalar_mut(-curve.values[j]);
        }
        Ok(FunctionalSample {
            grid: self.grid.clone(),
            values,
            ids: self.ids.clone(),
        })
    }

    /// Inner products `⟨X_i, f⟩` for every curve.
    pub fn inner_products(&self, f: &Curve) -> Result<DVector<f64>> {
        self.grid.ensure_compatible(&f.grid)?;
        let wf = DVector::from_iterator(
            self.grid.len(),
            self.grid.weights.iter().zip(&f.values).map(|(w, v)| w * v),
        );
        Ok(&self.values * wf)
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> FunctionalSample {
        FunctionalSample {
            grid: self.grid.clone(),
            values: self.values.map(f),
            ids: self.ids.clone(),
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> FunctionalSample {
        let values = self.values.select_rows(rows);
        let ids = self
            .ids
            .as_ref()
            .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect());
        FunctionalSample {
            grid: self.grid.clone(),
            values,
            ids,
        }
    }

    /// Stacks the curves of several samples sharing one grid.
    pub fn concat(samples: &[&FunctionalSample]) -> Result<FunctionalSample> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        let m = first.grid.len();
        let n: usize = samples.iter().map(|s| s.len()).sum();
        let mut values = DMatrix::zeros(n, m);
        let mut row = 0;
        for s in samples {
            first.grid.ensure_compatible(&s.grid)?;
            values.rows_mut(row, s.len()).copy_from(&s.values);
            row += s.len();
        }
        Ok(FunctionalSample {
            grid: first.grid.clone(),
            values,
            ids: None,
        })
    }
}

/// A scalar response paired with a functional sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarResponse {
    y: DVector<f64>,
}

impl ScalarResponse {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite response at index {i}"
            )));
        }
        Ok(ScalarResponse {
            y: DVector::from_vec(y),
        })
    }

    /// Checks the pairing with a functional sample.
    pub fn paired_with(self, sample: &FunctionalSample) -> Result<Self> {
        if self.y.len() != sample.len() {
            return Err(Error::LengthMismatch {
                response: self.y.len(),
                curves: sample.len(),
            });
        }
        Ok(self)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Removes the pointwise mean; returns the centered sample and the mean curve.
pub fn center(sample: &FunctionalSample) -> (FunctionalSample, Curve) {
    let mean = sample.mean();
    let centered = sample
        .subtract(&mean)
        .expect("mean curve shares the sample grid");
    (centered, mean)
}

/// Standard Brownian paths on `grid`, deterministic in `seed`.
///
/// `W(t_1)` is zero when the grid starts at 0 and `N(0, t_1)` otherwise;
/// increments are independent with variance `t_{m+1} - t_m`.
pub fn simulate_wiener(n: usize, grid: &Grid, seed: u64) -> FunctionalSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    wiener_with_rng(n, grid, &mut rng)
}

pub(crate) fn wiener_with_rng<R: rand::Rng>(
    n: usize,
    grid: &Grid,
    rng: &mut R,
) -> FunctionalSample {
    let t = grid.points();
    let m = t.len();
    let sd: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let start_sd = t[0].max(0.0).sqrt();
    let mut values = DMatrix::zeros(n, m);
    for i in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        let mut acc = start_sd * z;
        values[(i, 0)] = acc;
        for j in 1..m {
            let z: f64 = StandardNormal.sample(rng);
            acc += sd[j - 1] * z;
            values[(i, j)] = acc;
        }
    }
    FunctionalSample {
        grid: grid.clone(),
        values,
        ids: None,
    }
}
