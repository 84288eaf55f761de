//! Scalar-on-function regression with correlated errors.
//!
//! Curves sampled on a [`Grid`](funcdata::Grid) are reduced to a design
//! matrix through a finite basis, and the coefficient function is estimated
//! by generalized least squares under a parametric error covariance.
//! Model dimension and the covariance parameter are selected by generalized
//! correlated cross-validation (GCCV).
//!
//! ```
//! use funcgls::prelude::*;
//!
//! let grid = Grid::unit(101)?;
//! let x = simulate_wiener(80, &grid, 1);
//! let beta = grid.eval(|t| (std::f64::consts::PI * t).sin());
//! let y: Vec<f64> = x.inner_products(&beta)?.iter().copied().collect();
//! let opts = SelectOptions::fpc(1..=4, CovarianceFamily::Identity);
//! let fit = select_model(&y, &[x], &opts)?;
//! assert!(fit.k() >= 1);
//! # Ok::<(), funcgls::Error>(())
//! ```

pub mod basis;
pub mod bench;
pub mod covmodels;
pub mod dcor;
mod error;
pub mod fgls;
pub mod funcdata;
pub mod numfmt;
pub mod optim;

pub use error::{Error, Result};

/// The types most programs need.
pub mod prelude {
    pub use crate::basis::{bspline_basis, fpc_basis, project, BasisFamily, BasisSpec};
    pub use crate::covmodels::{CovarianceFamily, CovarianceSpec};
    pub use crate::fgls::{
        fit_gls, fit_igls, predict, select_model, FglsFit, GccvScale, KSearch, Method,
        SelectOptions, ThetaSearch,
    };
    pub use crate::funcdata::{center, simulate_wiener, Curve, FunctionalSample, Grid};
    pub use crate::{Error, Result};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/functional-data.md")]
    mod functional_data {}
    #[doc = include_str!("../../../book/src/bases.md")]
    mod bases {}
    #[doc = include_str!("../../../book/src/covariance.md")]
    mod covariance {}
    #[doc = include_str!("../../../book/src/gls-gccv.md")]
    mod gls_gccv {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/dcor.md")]
    mod dcor {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/rolling.md")]
    mod rolling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
