//! Design matrices mapping density heights to undiscounted option prices.
//!
//! Raw form, over all `q+1` heights:
//!
//! ```text
//! Xp[i,l] = [K_i log(K_l/K_{l-1}) - (K_l - K_{l-1})] · 1(K_i >= K_l)
//! Xc[i,l] = [(K_l - K_{l-1}) - K_i log(K_l/K_{l-1})] · 1(K_i <  K_l)
//! ```
//!
//! Reduced form eliminates the top height through the unit-mass constraint,
//! leaving `q` coefficients plus an offset column per row. Indicators compare
//! knot indices, never prices.

use std::io::Write;

use crate::density::{KnotGrid, PiecewiseDensity, MASS_TOLERANCE};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn dot_row(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for i in 0..self.rows {
            wtr.write_record(self.row(i).iter().map(|v| format!("{v:e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Raw and reduced design matrices for one strike grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    grid: KnotGrid,
    raw_put: RowMatrix,
    raw_call: RowMatrix,
    reduced_put: RowMatrix,
    put_offset: Vec<f64>,
    reduced_call: RowMatrix,
    call_offset: Vec<f64>,
}

/// Raw `q × (q+1)` put and call matrices.
pub fn build_raw(grid: &KnotGrid) -> (RowMatrix, RowMatrix) {
    let q = grid.q();
    let k = grid.knots();
    let w = grid.widths();
    let mut put = RowMatrix::zeros(q, q + 1);
    let mut call = RowMatrix::zeros(q, q + 1);
    for i in 0..q {
        let strike = k[i + 1];
        for l in 0..=q {
            let dk = k[l + 1] - k[l];
            // strike i sits on knot i+1; interval l ends on knot l+1
            if l <= i {
                put.set(i, l, strike * w[l] - dk);
            } else {
                call.set(i, l, dk - strike * w[l]);
            }
        }
    }
    (put, call)
}

/// Folds the top height into the first `q` coefficients and an offset.
pub fn reduce(raw: &RowMatrix, grid: &KnotGrid) -> (RowMatrix, Vec<f64>) {
    let q = grid.q();
    let w = grid.widths();
    let log_c = grid.c_k().ln();
    let mut reduced = RowMatrix::zeros(raw.rows(), q);
    let mut offset = Vec::with_capacity(raw.rows());
    for i in 0..raw.rows() {
        let tail = raw.get(i, q);
        for (l, wl) in w[..q].iter().enumerate() {
            reduced.set(i, l, raw.get(i, l) - wl / log_c * tail);
        }
        offset.push(tail / log_c);
    }
    (reduced, offset)
}

impl DesignSystem {
    pub fn new(grid: KnotGrid) -> Self {
        let (raw_put, raw_call) = build_raw(&grid);
        let (reduced_put, put_offset) = reduce(&raw_put, &grid);
        let (reduced_call, call_offset) = reduce(&raw_call, &grid);
        Self { grid, raw_put, raw_call, reduced_put, put_offset, reduced_call, call_offset }
    }

    pub fn from_strikes(strikes: &[f64], c_k: f64) -> Result<Self> {
        Ok(Self::new(KnotGrid::new(strikes, c_k)?))
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.grid.q()
    }

    pub fn raw_put(&self) -> &RowMatrix {
        &self.raw_put
    }

    pub fn raw_call(&self) -> &RowMatrix {
        &self.raw_call
    }

    pub fn reduced_put(&self) -> &RowMatrix {
        &self.reduced_put
    }

    pub fn reduced_call(&self) -> &RowMatrix {
        &self.reduced_call
    }

    pub fn put_offset(&self) -> &[f64] {
        &self.put_offset
    }

    pub fn call_offset(&self) -> &[f64] {
        &self.call_offset
    }

    /// The top height implied by the unit-mass constraint.
    pub fn implied_top_height(&self, heights: &[f64]) -> f64 {
        let w = self.grid.widths();
        let inner: f64 = heights.iter().zip(w).map(|(a, w)| a * w).sum();
        (1.0 - inner) / self.grid.c_k().ln()
    }

    /// Discounted `(puts, calls)` at every grid strike from the first `q`
    /// heights, via the reduced matrices.
    pub fn discounted_prices(&self, heights: &[f64], cum_rate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let q = self.q();
        if heights.len() != q {
            return Err(Error::Grid(format!("{} heights for {q} reduced columns", heights.len())));
        }
        if let Some(h) = heights.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
            return Err(Error::InvalidDensity(format!("negative height {h}")));
        }
        let top = self.implied_top_height(heights);
        if top < -MASS_TOLERANCE / self.grid.c_k().ln() {
            return Err(Error::InfeasibleHeights(top));
        }
        let disc = (-cum_rate).exp();
        let puts = (0..q)
            .map(|i| disc * (self.reduced_put.dot_row(i, heights) + self.put_offset[i]))
            .collect();
        let calls = (0..q)
            .map(|i| disc * (self.reduced_call.dot_row(i, heights) + self.call_offset[i]))
            .collect();
        Ok((puts, calls))
    }

    /// Discounted `(puts, calls)` for a density on this grid.
    pub fn prices_for(&self, density: &PiecewiseDensity, cum_rate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if density.grid() != &self.grid {
            return Err(Error::Grid("density grid differs from design grid".into()));
        }
        self.discounted_prices(&density.heights()[..self.q()], cum_rate)
    }

    /// Discounted `(puts, calls)` through the raw matrices and all `q+1` heights.
    pub fn raw_prices(&self, heights: &[f64], cum_rate: f64) -> (Vec<f64>, Vec<f64>) {
        let disc = (-cum_rate).exp();
        let q = self.q();
        let puts = (0..q).map(|i| disc * self.raw_put.dot_row(i, heights)).collect();
        let calls = (0..q).map(|i| disc * self.raw_call.dot_row(i, heights)).collect();
        (puts, calls)
    }
}
