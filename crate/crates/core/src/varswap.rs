//! Variance swaps from a term structure of risk-neutral log-price moments,
//! and replication from variance-future quotes.
//!
//! Pillar distances are calendar days from the trade date. Each future
//! trading day of the swap is mapped to a calendar offset before the curve is
//! read; without an explicit calendar, trading day `k` sits at offset `k`.

use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::density::PiecewiseDensity;
use crate::error::{Error, Result};

/// Default trading days per year.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Variance-future quotes are squared volatility in percent.
const IUG_SCALE: f64 = 100.0 * 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pillar {
    /// Calendar days from the trade date.
    pub days: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Moments of `log S` at pillar dates, anchored at the current log spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    log_spot: f64,
    pillars: Vec<Pillar>,
}

impl MomentCurve {
    pub fn new(spot: f64, pillars: Vec<Pillar>) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::InvalidInput(format!("spot {spot} must be positive")));
        }
        let mut prev = 0.0;
        for p in &pillars {
            if !(p.days > prev && p.days.is_finite()) {
                return Err(Error::InvalidInput(format!("pillar days must be positive and increasing, got {}", p.days)));
            }
            if !p.mean.is_finite() {
                return Err(Error::InvalidInput(format!("pillar mean {} at day {}", p.mean, p.days)));
            }
            if !(p.variance >= 0.0 && p.variance.is_finite()) {
                return Err(Error::MomentInversion { day: p.days, variance: p.variance });
            }
            prev = p.days;
        }
        Ok(Self { log_spot: spot.ln(), pillars })
    }

    pub fn log_spot(&self) -> f64 {
        self.log_spot
    }

    pub fn pillars(&self) -> &[Pillar] {
        &self.pillars
    }

    pub fn last_day(&self) -> f64 {
        self.pillars.last().map_or(0.0, |p| p.days)
    }

    /// Piecewise-linear interpolation of `f` over the pillars, with `anchor`
    /// as the value at day 0.
    fn bracket(&self, n0: f64, anchor: f64, f: impl Fn(&Pillar) -> f64) -> Result<f64> {
        if !(n0 >= 0.0) {
            return Err(Error::InvalidInput(format!("day {n0} precedes the trade date")));
        }
        if n0 == 0.0 {
            return Ok(anchor);
        }
        let last = self.last_day();
        if n0 > last {
            return Err(Error::ExtrapolationRefused { requested: n0, last });
        }
        let i = self.pillars.partition_point(|p| p.days < n0);
        let hi = &self.pillars[i];
        if hi.days == n0 {
            return Ok(f(hi));
        }
        let (n_lo, x_lo) = if i == 0 { (0.0, anchor) } else { (self.pillars[i - 1].days, f(&self.pillars[i - 1])) };
        let x_hi = f(hi);
        Ok(x_lo + (n0 - n_lo) / (hi.days - n_lo) * (x_hi - x_lo))
    }

    /// `E log S` at `n0` days, linear in the mean between nodes.
    pub fn interp_mean(&self, n0: f64) -> Result<f64> {
        self.bracket(n0, self.log_spot, |p| p.mean)
    }

    /// `V log S` at `n0` days, linear in the standard deviation between nodes.
    pub fn interp_variance(&self, n0: f64) -> Result<f64> {
        if let Some(p) = self.pillars.iter().find(|p| p.days == n0) {
            return Ok(p.variance);
        }
        let sd = self.bracket(n0, 0.0, |p| p.variance.sqrt())?;
        Ok(sd * sd)
    }

    /// `E (log S)^2` at `n0` days.
    pub fn second_moment_at(&self, n0: f64) -> Result<f64> {
        let m = self.interp_mean(n0)?;
        Ok(m * m + self.interp_variance(n0)?)
    }
}

/// Pillars from fitted densities keyed by calendar days to expiry. Pillars
/// with negative variance are dropped and returned alongside the curve.
pub fn build_curve_from_densities(
    densities: &[(f64, &PiecewiseDensity)],
    spot: f64,
) -> Result<(MomentCurve, Vec<Error>)> {
    let mut sorted: Vec<(f64, &PiecewiseDensity)> = densities.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pillars = Vec::with_capacity(sorted.len());
    let mut dropped = Vec::new();
    for (days, density) in sorted {
        let mean = density.mean_log();
        let variance = density.second_moment_log() - mean * mean;
        if variance < 0.0 {
            warn!("dropping pillar at day {days}: negative variance {variance:e}");
            dropped.push(Error::MomentInversion { day: days, variance });
            continue;
        }
        if pillars.last().is_some_and(|p: &Pillar| p.days == days) {
            return Err(Error::InvalidInput(format!("two densities at day {days}")));
        }
        pillars.push(Pillar { days, mean, variance });
    }
    Ok((MomentCurve::new(spot, pillars)?, dropped))
}

/// Contract terms and state of a variance swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSwapSpec {
    pub n_var: f64,
    /// Annualized variance strike.
    pub sigma_strike_sq: f64,
    /// Trading days per year.
    pub a: f64,
    /// Trading days in the swap.
    pub total_days: usize,
    /// Daily log returns observed so far; their count is the elapsed days.
    pub realized_returns: Vec<f64>,
    pub cum_rate: f64,
    /// Calendar-day offsets from today of the remaining trading days, one
    /// per day; `None` places trading day `k` at offset `k`.
    pub calendar: Option<Vec<f64>>,
}

impl VarSwapSpec {
    pub fn new(n_var: f64, sigma_strike_sq: f64, total_days: usize) -> Self {
        Self {
            n_var,
            sigma_strike_sq,
            a: TRADING_DAYS_PER_YEAR,
            total_days,
            realized_returns: Vec::new(),
            cum_rate: 0.0,
            calendar: None,
        }
    }

    pub fn observed_days(&self) -> usize {
        self.realized_returns.len()
    }

    pub fn remaining_days(&self) -> usize {
        self.total_days.saturating_sub(self.observed_days())
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_days == 0 {
            return Err(Error::InvalidInput("swap needs at least one trading day".into()));
        }
        if self.observed_days() > self.total_days {
            return Err(Error::InvalidInput(format!(
                "{} realized returns exceed the {} swap days",
                self.observed_days(),
                self.total_days
            )));
        }
        if !(self.a > 0.0) {
            return Err(Error::InvalidInput(format!("trading days per year {} must be positive", self.a)));
        }
        if let Some(cal) = &self.calendar {
            if cal.len() != self.remaining_days() {
                return Err(Error::InvalidInput(format!(
                    "calendar has {} offsets for {} remaining days",
                    cal.len(),
                    self.remaining_days()
                )));
            }
            let mut prev = 0.0;
            for &c in cal {
                if !(c > prev) {
                    return Err(Error::InvalidInput("calendar offsets must be positive and increasing".into()));
                }
                prev = c;
            }
        }
        Ok(())
    }

    fn offset(&self, k: usize) -> f64 {
        match &self.calendar {
            Some(cal) if k > 0 => cal[k - 1],
            _ => k as f64,
        }
    }

    fn realized_sum(&self) -> f64 {
        self.realized_returns.iter().map(|r| r * r).sum()
    }

    fn settle(&self, variance_sum: f64) -> f64 {
        let t = self.total_days as f64;
        (-self.cum_rate).exp() * self.n_var * (self.a / t * variance_sum - self.sigma_strike_sq)
    }
}

/// Risk-neutral expectation of the remaining `sum R_i^2`, from curve moments.
pub fn expected_future_variance(spec: &VarSwapSpec, curve: &MomentCurve) -> Result<f64> {
    let remaining = spec.remaining_days();
    if remaining == 0 {
        return Ok(0.0);
    }
    if curve.pillars().is_empty() {
        return Err(Error::ExtrapolationRefused { requested: spec.offset(remaining), last: 0.0 });
    }
    let log_spot = curve.log_spot();
    let mut cross = 0.0;
    let mut prev = log_spot;
    for k in 1..=remaining {
        let m = curve.interp_mean(spec.offset(k))?;
        cross += prev * m - prev * prev;
        prev = m;
    }
    let end = curve.second_moment_at(spec.offset(remaining))?;
    Ok(end - log_spot * log_spot - 2.0 * cross)
}

/// Discounted fair value of a variance swap given the moment curve.
pub fn varswap_price(spec: &VarSwapSpec, curve: &MomentCurve) -> Result<f64> {
    spec.validate()?;
    let future = expected_future_variance(spec, curve)?;
    Ok(spec.settle(spec.realized_sum() + future))
}

/// Value of a swap whose every return is known.
pub fn realized_price(spec: &VarSwapSpec, all_returns: &[f64]) -> Result<f64> {
    spec.validate()?;
    if all_returns.len() != spec.total_days {
        return Err(Error::InvalidInput(format!(
            "{} returns for a {}-day swap",
            all_returns.len(),
            spec.total_days
        )));
    }
    Ok(spec.settle(all_returns.iter().map(|r| r * r).sum()))
}

/// Quoted squared volatility of returns `R_M..R_{N_e}`, in percent squared.
pub fn iug(future_returns: &[f64], a: f64) -> f64 {
    if future_returns.is_empty() {
        return 0.0;
    }
    let sum: f64 = future_returns.iter().map(|r| r * r).sum();
    sum * a / future_returns.len() as f64 * IUG_SCALE
}

/// Swap value from returns `R_1..R_{M-1}` plus a variance-future quote
/// covering days `M..=N_e`. `M = N_e + 1` is a fully realized contract and
/// ignores the quote.
pub fn replicate_from_future(realized: &[f64], iug: f64, m: usize, n_e: usize, spec: &VarSwapSpec) -> Result<f64> {
    if m < 1 || m > n_e + 1 {
        return Err(Error::InvalidInput(format!("need 1 ≤ M ≤ N_e + 1, got M = {m}, N_e = {n_e}")));
    }
    if realized.len() != m - 1 {
        return Err(Error::InvalidInput(format!("{} realized returns for M = {m}", realized.len())));
    }
    if spec.total_days == 0 || !(spec.a > 0.0) {
        return Err(Error::InvalidInput("invalid swap terms".into()));
    }
    let past: f64 = realized.iter().map(|r| r * r).sum();
    let future = iug * (n_e + 1 - m) as f64 / spec.a / IUG_SCALE;
    Ok(spec.settle(past + future))
}

/// One variance-future observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFutureQuote {
    pub trade_date: NaiveDate,
    pub start_date: NaiveDate,
    pub expiry_date: NaiveDate,
    /// Empty when the contract did not trade.
    pub iug: Option<f64>,
    /// Trading days already realized, `M - 1`.
    pub realized_days: usize,
    /// Expected trading days over the contract, `N_e`.
    pub expected_days: usize,
}

impl VarianceFutureQuote {
    pub fn m(&self) -> usize {
        self.realized_days + 1
    }
}

/// `trade_date,start_date,expiry_date,iug,realized_days,expected_days`
pub fn read_variance_futures<R: Read>(reader: R) -> Result<Vec<VarianceFutureQuote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let quote: VarianceFutureQuote = row?;
        if quote.realized_days > quote.expected_days {
            return Err(Error::InvalidInput(format!(
                "{} realized days exceed {} expected days",
                quote.realized_days, quote.expected_days
            )));
        }
        out.push(quote);
    }
    Ok(out)
}

pub fn write_variance_futures<W: Write>(writer: W, quotes: &[VarianceFutureQuote]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for q in quotes {
        wtr.serialize(q)?;
    }
    wtr.flush()?;
    Ok(())
}
