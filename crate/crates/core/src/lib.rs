//! Risk-neutral density estimation with piecewise-constant densities.
//!
//! Heights of a step density on the log-price, knotted at every distinct
//! strike, are fitted to European option quotes by (weighted) least squares
//! under nonnegativity and unit mass. The fitted density prices options,
//! flags quotes that sit outside leave-one-out bootstrap bands, and supplies
//! the log-price moments used to value variance swaps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convergence;
pub mod density;
pub mod design;
pub mod error;
pub mod market_data;
pub mod mispricing;
pub mod pricing;
pub mod solver;
pub mod synth;
pub mod varswap;

pub use density::{project_density, KnotGrid, PiecewiseDensity, ReferenceDensity};
pub use design::DesignSystem;
pub use error::{Error, Result};
pub use market_data::{OptionChain, OptionQuote, RateCurve, Side, SpotSeries};
pub use solver::{fit, FitConfig, FitResult, Objective, OptionScope};
