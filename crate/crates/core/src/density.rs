//! Step-function density of the log-price.
//!
//! The knots are the distinct strikes `K_1 < … < K_q` extended by
//! `K_0 = K_1 / c_K` and `K_{q+1} = c_K K_q`. Height `a_l` applies on
//! `(log K_{l-1}, log K_l]`, and the heights carry unit mass:
//! `Σ a_l log(K_l / K_{l-1}) = 1`.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the unit-mass constraint.
pub const MASS_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_C_K: f64 = 1.5;

/// The extended strike grid shared by densities and design matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    c_k: f64,
    /// `K_0 … K_{q+1}`.
    knots: Vec<f64>,
    /// `log K_0 … log K_{q+1}`.
    log_knots: Vec<f64>,
    /// `log(K_l / K_{l-1})` for `l = 1 … q+1`; both ends are exactly `log c_K`.
    widths: Vec<f64>,
}

impl KnotGrid {
    pub fn new(strikes: &[f64], c_k: f64) -> Result<Self> {
        if strikes.is_empty() {
            return Err(Error::Grid("no strikes".into()));
        }
        if !(c_k.is_finite() && c_k > 1.0) {
            return Err(Error::Grid(format!("c_K = {c_k} must exceed 1")));
        }
        if strikes.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Grid("strikes must be positive and finite".into()));
        }
        if strikes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Grid("strikes must be strictly increasing".into()));
        }
        let q = strikes.len();
        let log_c = c_k.ln();

        let mut knots = Vec::with_capacity(q + 2);
        knots.push(strikes[0] / c_k);
        knots.extend_from_slice(strikes);
        knots.push(strikes[q - 1] * c_k);

        let mut log_knots = Vec::with_capacity(q + 2);
        log_knots.push(strikes[0].ln() - log_c);
        log_knots.extend(strikes.iter().map(|k| k.ln()));
        log_knots.push(strikes[q - 1].ln() + log_c);

        let mut widths = Vec::with_capacity(q + 1);
        widths.push(log_c);
        widths.extend(strikes.windows(2).map(|w| (w[1] / w[0]).ln()));
        widths.push(log_c);

        Ok(Self { c_k, knots, log_knots, widths })
    }

    pub fn c_k(&self) -> f64 {
        self.c_k
    }

    /// Number of market strikes.
    pub fn q(&self) -> usize {
        self.knots.len() - 2
    }

    pub fn strikes(&self) -> &[f64] {
        &self.knots[1..self.knots.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn log_knots(&self) -> &[f64] {
        &self.log_knots
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn span(&self) -> f64 {
        self.log_knots[self.log_knots.len() - 1] - self.log_knots[0]
    }
}

/// A valid step density: nonnegative heights with unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    grid: KnotGrid,
    heights: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(grid: KnotGrid, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != grid.q() + 1 {
            return Err(Error::InvalidDensity(format!(
                "{} heights for {} intervals",
                heights.len(),
                grid.q() + 1
            )));
        }
        if let Some((l, h)) = heights.iter().enumerate().find(|(_, h)| !(h.is_finite() && **h >= 0.0)) {
            return Err(Error::InvalidDensity(format!("height {l} is {h}")));
        }
        let density = Self { grid, heights };
        let mass = density.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!("total mass {mass} differs from 1")));
        }
        Ok(density)
    }

    pub fn from_strikes(strikes: &[f64], c_k: f64, heights: Vec<f64>) -> Result<Self> {
        Self::new(KnotGrid::new(strikes, c_k)?, heights)
    }

    /// Builds a density from interval probabilities, `mass_l = a_l · width_l`.
    pub fn from_masses(grid: KnotGrid, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.q() + 1 {
            return Err(Error::InvalidDensity("mass vector length mismatch".into()));
        }
        let heights = masses.iter().zip(grid.widths()).map(|(m, w)| m / w).collect();
        Self::new(grid, heights)
    }

    /// Constant height over `[log K_0, log K_{q+1}]`.
    pub fn uniform(grid: KnotGrid) -> Result<Self> {
        let height = 1.0 / grid.span();
        let heights = vec![height; grid.q() + 1];
        Self::new(grid, heights)
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn c_k(&self) -> f64 {
        self.grid.c_k
    }

    pub fn q(&self) -> usize {
        self.grid.q()
    }

    pub fn strikes(&self) -> &[f64] {
        self.grid.strikes()
    }

    /// Probability carried by each interval.
    pub fn masses(&self) -> Vec<f64> {
        self.heights.iter().zip(&self.grid.widths).map(|(a, w)| a * w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.heights.iter().zip(&self.grid.widths).map(|(a, w)| a * w).sum()
    }

    /// `E[log S_T]`.
    pub fn mean_log(&self) -> f64 {
        self.intervals().map(|(lo, hi, a)| a * (hi - lo) * (hi + lo) / 2.0).sum()
    }

    /// `E[(log S_T)^2]`.
    pub fn second_moment_log(&self) -> f64 {
        self.intervals()
            .map(|(lo, hi, a)| a * (hi - lo) * (hi * hi + hi * lo + lo * lo) / 3.0)
            .sum()
    }

    pub fn variance_log(&self) -> f64 {
        let mean = self.mean_log();
        self.second_moment_log() - mean * mean
    }

    /// `E[S_T] = ∫ e^y f(y) dy`.
    pub fn first_price_moment(&self) -> f64 {
        let k = &self.grid.knots;
        self.heights.iter().enumerate().map(|(l, a)| a * (k[l + 1] - k[l])).sum()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let u = &self.grid.log_knots;
        if y <= u[0] || y > u[u.len() - 1] {
            return 0.0;
        }
        // first knot index with log_knot >= y; the interval ending there owns y
        let idx = u.partition_point(|&v| v < y);
        self.heights[idx - 1]
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let u = &self.grid.log_knots;
        let mut acc = 0.0;
        for (l, a) in self.heights.iter().enumerate() {
            if y >= u[l + 1] {
                acc += a * self.grid.widths[l];
            } else {
                if y > u[l] {
                    acc += a * (y - u[l]);
                }
                break;
            }
        }
        acc.min(1.0)
    }

    /// `E[(K - S_T)^+]` for any strike, on or off the grid.
    pub fn expected_put_payoff(&self, strike: f64) -> f64 {
        let k = &self.grid.knots;
        let u = &self.grid.log_knots;
        let log_strike = strike.ln();
        let mut acc = 0.0;
        for (l, a) in self.heights.iter().enumerate() {
            if *a == 0.0 || strike <= k[l] {
                continue;
            }
            let (upper, log_upper) = if strike >= k[l + 1] { (k[l + 1], u[l + 1]) } else { (strike, log_strike) };
            let width = if upper == k[l + 1] { self.grid.widths[l] } else { log_upper - u[l] };
            acc += a * (strike * width - (upper - k[l]));
        }
        acc.max(0.0)
    }

    /// `E[(S_T - K)^+]` for any strike, on or off the grid.
    pub fn expected_call_payoff(&self, strike: f64) -> f64 {
        let k = &self.grid.knots;
        let u = &self.grid.log_knots;
        let log_strike = strike.ln();
        let mut acc = 0.0;
        for (l, a) in self.heights.iter().enumerate() {
            if *a == 0.0 || strike >= k[l + 1] {
                continue;
            }
            let (lower, log_lower) = if strike <= k[l] { (k[l], u[l]) } else { (strike, log_strike) };
            let width = if lower == k[l] { self.grid.widths[l] } else { u[l + 1] - log_lower };
            acc += a * ((k[l + 1] - lower) - strike * width);
        }
        acc.max(0.0)
    }

    fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let u = &self.grid.log_knots;
        self.heights.iter().enumerate().map(move |(l, a)| (u[l], u[l + 1], *a))
    }
}

/// A reference law for the log-price, used to generate oracle prices and
/// as the input to [`project_density`].
pub trait ReferenceDensity {
    fn pdf(&self, y: f64) -> f64;
    fn cdf(&self, y: f64) -> f64;
    /// `E[(K - S_T)^+]`, undiscounted.
    fn expected_put_payoff(&self, strike: f64) -> f64;
    /// `E[(S_T - K)^+]`, undiscounted.
    fn expected_call_payoff(&self, strike: f64) -> f64;
}

impl ReferenceDensity for PiecewiseDensity {
    fn pdf(&self, y: f64) -> f64 {
        PiecewiseDensity::pdf(self, y)
    }
    fn cdf(&self, y: f64) -> f64 {
        PiecewiseDensity::cdf(self, y)
    }
    fn expected_put_payoff(&self, strike: f64) -> f64 {
        PiecewiseDensity::expected_put_payoff(self, strike)
    }
    fn expected_call_payoff(&self, strike: f64) -> f64 {
        PiecewiseDensity::expected_call_payoff(self, strike)
    }
}

/// Averages a reference density over each grid interval. Mass below `K_1`
/// is placed on `(log K_0, log K_1]` and mass above `K_q` on
/// `(log K_q, log K_{q+1}]`. Interval masses come from CDF differences.
pub fn project_density<D: ReferenceDensity + ?Sized>(
    reference: &D,
    strikes: &[f64],
    c_k: f64,
) -> Result<PiecewiseDensity> {
    let grid = KnotGrid::new(strikes, c_k)?;
    let mut cdfs = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let value = reference.cdf(k.ln());
        if !value.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&value) {
            return Err(Error::InvalidDensity(format!("reference cdf({}) = {value}", k.ln())));
        }
        if cdfs.last().is_some_and(|&prev: &f64| value < prev - 1e-12) {
            return Err(Error::InvalidDensity("reference cdf is decreasing".into()));
        }
        cdfs.push(value.clamp(0.0, 1.0));
    }
    let q = strikes.len();
    let mut masses = Vec::with_capacity(q + 1);
    masses.push(cdfs[0]);
    masses.extend(cdfs.windows(2).map(|w| (w[1] - w[0]).max(0.0)));
    masses.push(1.0 - cdfs[q - 1]);
    PiecewiseDensity::from_masses(grid, &masses)
}

/// Sidecar metadata written next to a density CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetadata {
    pub c_k: f64,
    pub trade_date: Option<NaiveDate>,
    pub expiry_date: Option<NaiveDate>,
    pub objective: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityRow {
    log_knot_lower: f64,
    log_knot_upper: f64,
    height: f64,
}

/// One row per interval: `log_knot_lower,log_knot_upper,height`.
pub fn write_density_csv<W: Write>(writer: W, density: &PiecewiseDensity) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (lo, hi, height) in density.intervals() {
        wtr.serialize(DensityRow { log_knot_lower: lo, log_knot_upper: hi, height })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `(lower, upper, height)` triples back from a density CSV.
pub fn read_density_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<DensityRow>() {
        let row = row?;
        out.push((row.log_knot_lower, row.log_knot_upper, row.height));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> KnotGrid {
        KnotGrid::new(&[90.0, 100.0, 110.0], 1.5).unwrap()
    }

    #[test]
    fn grid_edges_are_log_ck() {
        let g = grid();
        assert_eq!(g.widths()[0], 1.5f64.ln());
        assert_eq!(g.widths()[3], 1.5f64.ln());
        assert!((g.knots()[0] - 60.0).abs() < 1e-12);
        assert!((g.knots()[4] - 165.0).abs() < 1e-12);
        assert!(g.log_knots().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(KnotGrid::new(&[100.0, 90.0], 1.5), Err(Error::Grid(_))));
        assert!(matches!(KnotGrid::new(&[100.0, 100.0], 1.5), Err(Error::Grid(_))));
        assert!(matches!(KnotGrid::new(&[100.0], 1.0), Err(Error::Grid(_))));
    }

    #[test]
    fn uniform_has_unit_mass() {
        let d = PiecewiseDensity::uniform(grid()).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_heights_are_rejected() {
        let err = PiecewiseDensity::new(grid(), vec![0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::InvalidDensity(_)));
    }

    #[test]
    fn negative_height_is_rejected() {
        let d = PiecewiseDensity::uniform(grid()).unwrap();
        let mut h = d.heights().to_vec();
        h[1] = -1e-3;
        assert!(PiecewiseDensity::new(grid(), h).is_err());
    }

    #[test]
    fn uniform_moments() {
        // a single interior interval [ln 100, ln 121] carrying all mass
        let g = KnotGrid::new(&[100.0, 121.0], 1.5).unwrap();
        let w = g.widths()[1];
        let d = PiecewiseDensity::new(g, vec![0.0, 1.0 / w, 0.0]).unwrap();
        let (u, v) = (100f64.ln(), 121f64.ln());
        assert!((d.mean_log() - 4.700480365792417).abs() < 1e-12);
        assert!((d.mean_log() - (u + v) / 2.0).abs() < 1e-13);
        assert!((d.second_moment_log() - (u * u + u * v + v * v) / 3.0).abs() < 1e-12);
        assert!((d.first_price_moment() - 21.0 / w).abs() < 1e-12);
    }

    #[test]
    fn uniform_first_price_moment() {
        let g = grid();
        let (lo, hi) = (g.knots()[0], g.knots()[4]);
        let d = PiecewiseDensity::uniform(g).unwrap();
        let expected = (hi - lo) / (hi / lo).ln();
        assert!((d.first_price_moment() - expected).abs() < 1e-10);
    }

    #[test]
    fn cdf_and_pdf_agree_with_heights() {
        let d = PiecewiseDensity::uniform(grid()).unwrap();
        let u = d.grid().log_knots().to_vec();
        assert_eq!(d.cdf(u[0] - 1.0), 0.0);
        assert!((d.cdf(u[4]) - 1.0).abs() < 1e-14);
        assert_eq!(d.pdf(u[0]), 0.0);
        assert_eq!(d.pdf(u[1]), d.heights()[0]);
        assert_eq!(d.pdf(u[4] + 1e-9), 0.0);
    }

    #[test]
    fn projecting_a_step_density_is_identity() {
        let g = grid();
        let d = PiecewiseDensity::from_masses(g.clone(), &[0.1, 0.3, 0.4, 0.2]).unwrap();
        let p = project_density(&d, g.strikes(), g.c_k()).unwrap();
        for (a, b) in d.heights().iter().zip(p.heights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_a_flat_density_recovers_the_level() {
        let g = grid();
        let flat = PiecewiseDensity::uniform(g.clone()).unwrap();
        let p = project_density(&flat, g.strikes(), g.c_k()).unwrap();
        for h in p.heights() {
            assert!((h - 1.0 / g.span()).abs() < 1e-12);
        }
    }

    #[test]
    fn payoff_at_grid_strike_below_support_is_zero() {
        let d = PiecewiseDensity::from_masses(grid(), &[0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(d.expected_put_payoff(90.0), 0.0);
        assert_eq!(d.expected_call_payoff(110.0), 0.0);
    }

    #[test]
    fn density_csv_has_one_row_per_interval() {
        let d = PiecewiseDensity::uniform(grid()).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("log_knot_lower,log_knot_upper,height\n"));
        let rows = read_density_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].0, d.grid().log_knots()[0]);
    }
}
