//! Least-squares fit of the step-density heights.
//!
//! The fit minimizes
//!
//! ```text
//! 1/(m+n) · Σ_j w_j (fitted_j - market_j)^2
//! ```
//!
//! with `w_j = 1` (LS) or `w_j = market_j^-2` (WLS), over nonnegative heights
//! with unit mass. The top height is eliminated through the mass constraint,
//! which leaves `q` variables, `q` bounds and one inequality
//! `1 - Σ_{l≤q} a_l log(K_l/K_{l-1}) >= 0`. The QP is solved by a primal
//! active-set method in interval-probability coordinates with lowest-index
//! pivoting. Optimality is certified separately by [`check_kkt`] on the full
//! `q+1` height vector and the raw design matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::{PiecewiseDensity, MASS_TOLERANCE};
use crate::design::DesignSystem;
use crate::error::{Error, Result};
use crate::market_data::{OptionChain, Side};
use crate::pricing::{classify_moneyness, Moneyness};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-11;
/// Steps with every mass component below this are zero steps.
const STEP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Plain least squares on prices.
    #[default]
    Ls,
    /// Least squares on relative errors (weights `1 / price^2`).
    Wls,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionScope {
    #[default]
    All,
    /// Only out-of-the-money quotes enter the objective.
    Otm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: Objective,
    pub scope: OptionScope,
    pub c_k: f64,
    /// Bound on [`check_kkt`] for an accepted fit.
    pub kkt_tolerance: f64,
    /// Active-set iteration cap; zero picks `50 (q + 1) + 100`.
    pub max_iterations: usize,
    /// Optional Tikhonov term `ridge/2 · ||a||^2`.
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: Objective::Ls,
            scope: OptionScope::All,
            c_k: crate::density::DEFAULT_C_K,
            kkt_tolerance: 1e-8,
            max_iterations: 0,
            ridge: 0.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_k.is_finite() && self.c_k > 1.0) {
            return Err(Error::InvalidInput(format!("c_K = {} must exceed 1", self.c_k)));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidInput("kkt tolerance must be positive".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidInput("ridge must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One term of the objective. `multiplicity` counts repeated draws of the
/// same quote in a bootstrap resample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub strike_index: usize,
    pub side: Side,
    pub price: f64,
    pub multiplicity: f64,
}

impl Observation {
    pub fn new(strike_index: usize, side: Side, price: f64) -> Self {
        Self { strike_index, side, price, multiplicity: 1.0 }
    }
}

/// Quotes of a chain that enter the objective under `scope`.
pub fn chain_observations(chain: &OptionChain, scope: OptionScope) -> Vec<Observation> {
    chain
        .quotes()
        .iter()
        .filter(|q| match scope {
            OptionScope::All => true,
            OptionScope::Otm => {
                classify_moneyness(chain.strikes()[q.strike_index], chain.spot(), q.side) == Moneyness::Otm
            }
        })
        .map(|q| Observation::new(q.strike_index, q.side, q.price))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub density: PiecewiseDensity,
    /// Value of the LS or WLS objective, including the `1/(m+n)` factor.
    pub objective: f64,
    /// Discounted fitted put price at every grid strike.
    pub fitted_puts: Vec<f64>,
    /// Discounted fitted call price at every grid strike.
    pub fitted_calls: Vec<f64>,
    pub kkt_residual: f64,
    /// Height indices (0-based, `0..=q`) held at zero.
    pub active_set: Vec<usize>,
    pub iterations: usize,
}

impl FitResult {
    pub fn fitted_price(&self, strike_index: usize, side: Side) -> f64 {
        match side {
            Side::Put => self.fitted_puts[strike_index],
            Side::Call => self.fitted_calls[strike_index],
        }
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            c_k: self.density.c_k(),
            strikes: self.density.strikes().to_vec(),
            heights: self.density.heights().to_vec(),
            objective: self.objective,
            kkt_residual: self.kkt_residual,
            active_set: self.active_set.clone(),
            iterations: self.iterations,
        }
    }
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub c_k: f64,
    pub strikes: Vec<f64>,
    pub heights: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub active_set: Vec<usize>,
    pub iterations: usize,
}

/// The weighted least-squares problem for one design and quote set.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    design: &'a DesignSystem,
    observations: Vec<Observation>,
    cum_rate: f64,
    /// Per-observation objective weight, before the `1/(m+n)` factor.
    weights: Vec<f64>,
    count: f64,
    ridge: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        design: &'a DesignSystem,
        observations: Vec<Observation>,
        cum_rate: f64,
        mode: Objective,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput("no quotes in the objective".into()));
        }
        let q = design.q();
        let mut weights = Vec::with_capacity(observations.len());
        for obs in &observations {
            if obs.strike_index >= q {
                return Err(Error::Grid(format!("strike index {} outside grid of {q}", obs.strike_index)));
            }
            if !(obs.multiplicity > 0.0 && obs.multiplicity.is_finite()) {
                return Err(Error::InvalidInput("multiplicity must be positive".into()));
            }
            if !obs.price.is_finite() {
                return Err(Error::InvalidInput("non-finite market price".into()));
            }
            let base = match mode {
                Objective::Ls => 1.0,
                Objective::Wls => {
                    if obs.price <= 0.0 {
                        return Err(Error::ZeroPriceWeight {
                            strike: design.grid().strikes()[obs.strike_index],
                        });
                    }
                    obs.price.powi(-2)
                }
            };
            weights.push(base * obs.multiplicity);
        }
        let count = observations.iter().map(|o| o.multiplicity).sum();
        Ok(Self { design, observations, cum_rate, weights, count, ridge: 0.0 })
    }

    /// Multiplies every objective weight by `factor`.
    pub fn scale_objective(mut self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "objective scale must be positive");
        for w in &mut self.weights {
            *w *= factor;
        }
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn design(&self) -> &DesignSystem {
        self.design
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn cum_rate(&self) -> f64 {
        self.cum_rate
    }

    fn raw_row(&self, obs: &Observation) -> &[f64] {
        match obs.side {
            Side::Put => self.design.raw_put().row(obs.strike_index),
            Side::Call => self.design.raw_call().row(obs.strike_index),
        }
    }

    /// Objective value for a full `q+1` height vector.
    pub fn objective(&self, heights: &[f64]) -> f64 {
        let disc = (-self.cum_rate).exp();
        let sum: f64 = self
            .observations
            .iter()
            .zip(&self.weights)
            .map(|(obs, w)| {
                let fitted = disc * dot(self.raw_row(obs), heights);
                w * (fitted - obs.price).powi(2)
            })
            .sum();
        sum / self.count
    }

    /// Weighted raw design (rows `sqrt(w_j) e^{-R} X_j`) and its targets.
    fn weighted_raw(&self) -> (DMatrix<f64>, DVector<f64>) {
        let disc = (-self.cum_rate).exp();
        let cols = self.design.q() + 1;
        let rows = self.observations.len();
        let mut a = DMatrix::zeros(rows, cols);
        let mut t = DVector::zeros(rows);
        for (j, (obs, w)) in self.observations.iter().zip(&self.weights).enumerate() {
            let s = w.sqrt();
            for (l, x) in self.raw_row(obs).iter().enumerate() {
                a[(j, l)] = s * disc * x;
            }
            t[j] = s * obs.price;
        }
        (a, t)
    }

    /// Reduced problem in interval-probability coordinates `b_l = a_l w_l`,
    /// `l < q`, with the ridge rows appended.
    fn mass_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let disc = (-self.cum_rate).exp();
        let q = self.design.q();
        let widths = self.design.grid().widths();
        let log_c = self.design.grid().c_k().ln();
        let ridge_rows = if self.ridge > 0.0 { q + 1 } else { 0 };
        let rows = self.observations.len() + ridge_rows;
        let mut a = DMatrix::zeros(rows, q);
        let mut t = DVector::zeros(rows);
        for (j, (obs, w)) in self.observations.iter().zip(&self.weights).enumerate() {
            let s = w.sqrt();
            let (reduced, offset) = match obs.side {
                Side::Put => (self.design.reduced_put(), self.design.put_offset()),
                Side::Call => (self.design.reduced_call(), self.design.call_offset()),
            };
            for l in 0..q {
                a[(j, l)] = s * disc * reduced.get(obs.strike_index, l) / widths[l];
            }
            t[j] = s * (obs.price - disc * offset[obs.strike_index]);
        }
        if self.ridge > 0.0 {
            let r = self.ridge.sqrt();
            let base = self.observations.len();
            for l in 0..q {
                a[(base + l, l)] = r / widths[l];
            }
            // top height (1 - Σ b) / log c_K
            for l in 0..q {
                a[(base + q, l)] = -r / log_c;
            }
            t[base + q] = -r / log_c;
        }
        (a, t)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a chain on its own strike grid.
pub fn fit(chain: &OptionChain, design: &DesignSystem, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if design.grid().strikes() != chain.strikes() {
        return Err(Error::Grid("design grid differs from chain strikes".into()));
    }
    let observations = chain_observations(chain, config.scope);
    fit_observations(design, observations, chain.cum_rate(), config)
}

/// Fits an explicit set of observations on `design`'s grid.
pub fn fit_observations(
    design: &DesignSystem,
    observations: Vec<Observation>,
    cum_rate: f64,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    let problem = FitProblem::new(design, observations, cum_rate, config.mode)?.with_ridge(config.ridge);
    solve(&problem, config, None)
}

/// Runs the active-set method. `start` is an optional feasible `q+1`
/// height vector; the default start is the uniform density.
pub fn solve(problem: &FitProblem<'_>, config: &FitConfig, start: Option<&[f64]>) -> Result<FitResult> {
    let design = problem.design;
    let grid = design.grid();
    let q = design.q();
    let widths = grid.widths();

    let mut x = match start {
        None => DVector::from_iterator(q, widths[..q].iter().map(|w| w / grid.span())),
        Some(heights) => {
            let density = PiecewiseDensity::new(grid.clone(), heights.to_vec())?;
            DVector::from_iterator(q, density.masses()[..q].iter().copied())
        }
    };

    let (a, t) = problem.mass_system();
    let col_norm = (0..q).map(|l| a.column(l).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let target_norm = t.norm();
    let max_iterations = if config.max_iterations == 0 { 50 * (q + 1) + 100 } else { config.max_iterations };

    let mut bound_active: Vec<bool> = x.iter().map(|v| *v <= 0.0).collect();
    let mut slack_active = 1.0 - x.sum() <= 0.0;
    let mut iterations = 0;
    // set after a full unblocked step: the free subproblem is then solved
    let mut at_minimum = false;

    loop {
        if iterations >= max_iterations {
            let heights = heights_from_masses(&x, grid.widths(), grid.c_k(), slack_active);
            return Err(Error::SolverStalled {
                iterations,
                kkt_residual: kkt_residual(problem, &heights),
                objective: problem.objective(&heights),
            });
        }
        iterations += 1;

        let r = &a * &x - &t;
        let free: Vec<usize> = (0..q).filter(|&l| !bound_active[l]).collect();
        let p = if at_minimum { DVector::zeros(q) } else { subproblem_step(&a, &r, &free, slack_active) };

        if p.amax() <= STEP_TOLERANCE {
            at_minimum = false;
            let g = a.transpose() * &r;
            let nu = if slack_active && !free.is_empty() {
                -free.iter().map(|&l| g[l]).sum::<f64>() / free.len() as f64
            } else {
                0.0
            };
            let tol = col_norm * (1e-10 * r.norm()).max(1e-14 * target_norm);
            // lowest index first; the slack constraint has index q
            let release = (0..q)
                .find(|&l| bound_active[l] && g[l] + nu < -tol)
                .or_else(|| (slack_active && nu < -tol).then_some(q));
            match release {
                None => break,
                Some(l) if l < q => bound_active[l] = false,
                Some(_) => slack_active = false,
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for &l in &free {
            if p[l] < 0.0 {
                let ratio = (-x[l] / p[l]).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(l);
                }
            }
        }
        if !slack_active {
            let slack = (1.0 - x.sum()).max(0.0);
            let dslack = -p.sum();
            if dslack < 0.0 {
                let ratio = slack / -dslack;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(q);
                }
            }
        }
        x += alpha * &p;
        match blocking {
            Some(l) if l < q => {
                x[l] = 0.0;
                bound_active[l] = true;
            }
            Some(_) => slack_active = true,
            None => at_minimum = true,
        }
        for l in 0..q {
            if x[l] < 0.0 {
                x[l] = 0.0;
                bound_active[l] = true;
            }
        }
    }

    let mut heights = heights_from_masses(&x, grid.widths(), grid.c_k(), slack_active);
    if problem.ridge == 0.0 {
        polish_min_norm(problem, &mut heights);
    }
    finish(problem, heights, iterations, config)
}

fn heights_from_masses(x: &DVector<f64>, widths: &[f64], c_k: f64, slack_active: bool) -> Vec<f64> {
    let q = x.len();
    let mut heights: Vec<f64> = (0..q).map(|l| x[l].max(0.0) / widths[l]).collect();
    let top = if slack_active { 0.0 } else { (1.0 - x.sum()).max(0.0) / c_k.ln() };
    heights.push(top);
    heights
}

/// Minimizer of `||A_F p_F + r||` over the free coordinates, holding the
/// probability sum fixed when the slack constraint is active.
fn subproblem_step(a: &DMatrix<f64>, r: &DVector<f64>, free: &[usize], slack_active: bool) -> DVector<f64> {
    let q = a.ncols();
    let mut p = DVector::zeros(q);
    if free.is_empty() || (slack_active && free.len() == 1) {
        return p;
    }
    let rows = a.nrows();
    let (cols, pivot) = if slack_active {
        (&free[..free.len() - 1], Some(free[free.len() - 1]))
    } else {
        (free, None)
    };
    let mut m = DMatrix::zeros(rows, cols.len());
    for (c, &l) in cols.iter().enumerate() {
        match pivot {
            Some(j) => m.set_column(c, &(a.column(l) - a.column(j))),
            None => m.set_column(c, &a.column(l)),
        }
    }
    let y = min_norm_solve(m, &(-r));
    for (c, &l) in cols.iter().enumerate() {
        p[l] = y[c];
    }
    if let Some(j) = pivot {
        p[j] = -y.sum();
    }
    p
}

fn min_norm_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = m.ncols();
    // tall systems: solve on the square R factor
    let (m, rhs) = if m.nrows() > n {
        let qr = m.qr();
        let mut qtb = rhs.clone();
        qr.q_tr_mul(&mut qtb);
        (qr.r(), qtb.rows(0, n).into_owned())
    } else {
        (m, rhs.clone())
    };
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(n);
    }
    svd.solve(&rhs, smax * RANK_TOLERANCE).expect("svd computed with u and v")
}

/// Moves the heights to the smallest-norm point of the optimal face that
/// keeps the current support, without changing the fitted prices.
fn polish_min_norm(problem: &FitProblem<'_>, heights: &mut [f64]) {
    let (a, _) = problem.weighted_raw();
    let widths = problem.design.grid().widths();
    let col_norm = (0..a.ncols()).map(|l| a.column(l).norm()).fold(0.0, f64::max);
    if col_norm == 0.0 {
        return;
    }
    for _ in 0..heights.len() {
        let support: Vec<usize> = (0..heights.len()).filter(|&l| heights[l] > 0.0).collect();
        if support.len() < 2 {
            return;
        }
        // stack data rows with the mass row, padded so V is complete
        let rows = (a.nrows() + 1).max(support.len());
        let mut m = DMatrix::zeros(rows, support.len());
        for (c, &l) in support.iter().enumerate() {
            for i in 0..a.nrows() {
                m[(i, c)] = a[(i, l)];
            }
            m[(a.nrows(), c)] = col_norm * widths[l];
        }
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested v");
        let smax = svd.singular_values.max();
        let current = DVector::from_iterator(support.len(), support.iter().map(|&l| heights[l]));
        let mut direction = DVector::zeros(support.len());
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s <= smax * RANK_TOLERANCE {
                let v = v_t.row(k).transpose();
                direction -= v.dot(&current) * &v;
            }
        }
        if direction.amax() <= 1e-14 * current.amax() {
            return;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for c in 0..support.len() {
            if direction[c] < 0.0 {
                let ratio = -current[c] / direction[c];
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(c);
                }
            }
        }
        for (c, &l) in support.iter().enumerate() {
            heights[l] = (current[c] + alpha * direction[c]).max(0.0);
        }
        match blocking {
            Some(c) => heights[support[c]] = 0.0,
            None => return,
        }
    }
}

fn finish(problem: &FitProblem<'_>, heights: Vec<f64>, iterations: usize, config: &FitConfig) -> Result<FitResult> {
    let design = problem.design;
    let kkt = kkt_residual(problem, &heights);
    let objective = problem.objective(&heights);
    if !(kkt <= config.kkt_tolerance) {
        return Err(Error::SolverStalled { iterations, kkt_residual: kkt, objective });
    }
    let active_set = (0..heights.len()).filter(|&l| heights[l] == 0.0).collect();
    let density = PiecewiseDensity::new(design.grid().clone(), heights)?;
    debug_assert!((density.total_mass() - 1.0).abs() <= MASS_TOLERANCE);
    let (fitted_puts, fitted_calls) = design.prices_for(&density, problem.cum_rate)?;
    Ok(FitResult { density, objective, fitted_puts, fitted_calls, kkt_residual: kkt, active_set, iterations })
}

/// Projected stationarity residual of a fit, scaled by the largest weighted
/// design-column norm.
pub fn check_kkt(result: &FitResult, problem: &FitProblem<'_>) -> f64 {
    kkt_residual(problem, result.density.heights())
}

/// KKT residual for any feasible `q+1` height vector: zero heights are
/// active; the multiplier of the mass constraint is the least-squares fit
/// over the inactive gradient components.
pub fn kkt_residual(problem: &FitProblem<'_>, heights: &[f64]) -> f64 {
    let (a, t) = problem.weighted_raw();
    let h = DVector::from_column_slice(heights);
    let mut g = a.transpose() * (&a * &h - &t);
    if problem.ridge > 0.0 {
        g += problem.ridge * &h;
    }
    let widths = problem.design.grid().widths();
    let scale = (0..a.ncols()).map(|l| a.column(l).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let inactive: Vec<usize> = (0..heights.len()).filter(|&l| heights[l] > 0.0).collect();
    let (num, den) = inactive
        .iter()
        .fold((0.0, 0.0), |(n, d), &l| (n + g[l] * widths[l], d + widths[l] * widths[l]));
    let lambda = if den > 0.0 { num / den } else { 0.0 };

    let mut worst: f64 = 0.0;
    for l in 0..heights.len() {
        let reduced = g[l] - lambda * widths[l];
        let violation = if heights[l] > 0.0 { reduced.abs() } else { (-reduced).max(0.0) };
        worst = worst.max(violation);
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::KnotGrid;

    fn synth(strikes: &[f64], masses: &[f64], cum_rate: f64) -> (DesignSystem, Vec<Observation>, PiecewiseDensity) {
        let grid = KnotGrid::new(strikes, 1.5).unwrap();
        let truth = PiecewiseDensity::from_masses(grid.clone(), masses).unwrap();
        let design = DesignSystem::new(grid);
        let (puts, calls) = design.prices_for(&truth, cum_rate).unwrap();
        let mut obs = Vec::new();
        for i in 0..strikes.len() {
            obs.push(Observation::new(i, Side::Call, calls[i]));
            obs.push(Observation::new(i, Side::Put, puts[i]));
        }
        (design, obs, truth)
    }

    #[test]
    fn recovers_an_interior_density() {
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let masses = [0.05, 0.15, 0.3, 0.25, 0.15, 0.1];
        let (design, obs, truth) = synth(&strikes, &masses, 0.01);
        let fit = fit_observations(&design, obs, 0.01, &FitConfig::default()).unwrap();
        assert!(fit.objective < 1e-20, "objective {}", fit.objective);
        assert!(fit.kkt_residual < 1e-10);
        for (a, b) in fit.density.heights().iter().zip(truth.heights()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn recovers_a_density_with_empty_intervals() {
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let masses = [0.0, 0.2, 0.5, 0.0, 0.3, 0.0];
        let (design, obs, truth) = synth(&strikes, &masses, 0.0);
        let fit = fit_observations(&design, obs.clone(), 0.0, &FitConfig::default()).unwrap();
        assert!(fit.objective < 1e-20);
        for o in &obs {
            assert!((fit.fitted_price(o.strike_index, o.side) - o.price).abs() < 1e-9);
        }
        for (a, b) in fit.density.heights().iter().zip(truth.heights()) {
            assert!((a - b).abs() < 1e-10);
        }
        for l in [0, 3, 5] {
            assert!(fit.density.heights()[l] < 1e-12);
        }
    }

    #[test]
    fn kkt_flags_a_perturbed_point() {
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let masses = [0.05, 0.15, 0.3, 0.25, 0.15, 0.1];
        let (design, obs, truth) = synth(&strikes, &masses, 0.0);
        let problem = FitProblem::new(&design, obs, 0.0, Objective::Ls).unwrap();
        assert!(kkt_residual(&problem, truth.heights()) < 1e-10);

        let mut h = truth.heights().to_vec();
        h[2] += 1e-3;
        let mass: f64 = h.iter().zip(design.grid().widths()).map(|(a, w)| a * w).sum();
        for v in &mut h {
            *v /= mass;
        }
        assert!(kkt_residual(&problem, &h) > 1e-8);
    }

    #[test]
    fn zero_price_under_wls_is_rejected() {
        let design = DesignSystem::from_strikes(&[90.0, 100.0], 1.5).unwrap();
        let obs = vec![Observation::new(0, Side::Call, 0.0), Observation::new(1, Side::Call, 1.0)];
        let err = FitProblem::new(&design, obs, 0.0, Objective::Wls).unwrap_err();
        assert!(matches!(err, Error::ZeroPriceWeight { .. }));
    }

    #[test]
    fn iteration_cap_reports_a_stall() {
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let masses = [0.0, 0.2, 0.5, 0.0, 0.3, 0.0];
        let (design, obs, _) = synth(&strikes, &masses, 0.0);
        let config = FitConfig { max_iterations: 1, ..FitConfig::default() };
        let err = fit_observations(&design, obs, 0.0, &config).unwrap_err();
        assert!(matches!(err, Error::SolverStalled { iterations: 1, .. }));
    }

    #[test]
    fn ridge_fit_is_feasible() {
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let masses = [0.05, 0.15, 0.3, 0.25, 0.15, 0.1];
        let (design, obs, _) = synth(&strikes, &masses, 0.0);
        let config = FitConfig { ridge: 1e-6, ..FitConfig::default() };
        let fit = fit_observations(&design, obs, 0.0, &config).unwrap();
        assert!((fit.density.total_mass() - 1.0).abs() < 1e-8);
        assert!(fit.objective < 1e-6);
    }
}
