//! Leave-one-out fair prices with bootstrap confidence bands.
//!
//! Each quote is priced from a density fitted to every other quote. The
//! remaining quotes are then resampled with replacement `B` times, each
//! resample is refitted, and the percentile interval of the resulting fair
//! prices decides whether the held-out market price is over, under or fair.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{KnotGrid, PiecewiseDensity};
use crate::design::DesignSystem;
use crate::error::{Error, Result};
use crate::market_data::{MarketQuote, OptionChain, Side};
use crate::pricing::{classify_moneyness, price_at_strike, Moneyness};
use crate::solver::{fit_observations, FitConfig, Observation, OptionScope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MispricingConfig {
    pub fit: FitConfig,
    /// Bootstrap resamples per quote.
    pub resamples: usize,
    /// Two-sided confidence level of the percentile interval.
    pub level: f64,
    pub seed: u64,
}

impl Default for MispricingConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), resamples: 50, level: 0.95, seed: 0 }
    }
}

impl MispricingConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.resamples < 2 {
            return Err(Error::InvalidInput("B ≥ 2 bootstrap resamples required".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    #[serde(rename = "under")]
    Under,
    #[serde(rename = "over")]
    Over,
    #[serde(rename = "fair")]
    Fair,
}

impl Flag {
    pub fn classify(market: f64, lower: f64, upper: f64) -> Self {
        if market > upper {
            Flag::Over
        } else if market < lower {
            Flag::Under
        } else {
            Flag::Fair
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Flag::Under => "under",
            Flag::Over => "over",
            Flag::Fair => "fair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MispricingRow {
    pub strike: f64,
    pub side: Side,
    pub market: f64,
    pub loo_fair: Option<f64>,
    /// `(market - fair) / fair`.
    pub rel_diff: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub flag: Option<Flag>,
    /// Why the row has no flag, when it has none.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MispricingReport {
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
    pub rows: Vec<MispricingRow>,
}

impl MispricingReport {
    /// `strike,side,market,loo_fair,rel_diff,ci_lower,ci_upper,flag`; failed
    /// rows leave the fitted columns empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["strike", "side", "market", "loo_fair", "rel_diff", "ci_lower", "ci_upper", "flag"])?;
        for row in &self.rows {
            wtr.write_record([
                row.strike.to_string(),
                row.side.flag().to_string(),
                row.market.to_string(),
                opt(row.loo_fair),
                opt(row.rel_diff),
                opt(row.ci.map(|c| c.0)),
                opt(row.ci.map(|c| c.1)),
                row.flag.map(|f| f.label().to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fits `quotes` (with repeat counts) on the grid of their distinct strikes.
pub fn fit_quote_sample(
    quotes: &[(MarketQuote, usize)],
    spot: f64,
    cum_rate: f64,
    config: &FitConfig,
) -> Result<PiecewiseDensity> {
    let mut strikes: Vec<f64> = quotes.iter().map(|(q, _)| q.strike).collect();
    strikes.sort_by(f64::total_cmp);
    strikes.dedup();
    let design = DesignSystem::new(KnotGrid::new(&strikes, config.c_k)?);
    let observations: Vec<Observation> = quotes
        .iter()
        .filter(|(q, _)| match config.scope {
            OptionScope::All => true,
            OptionScope::Otm => classify_moneyness(q.strike, spot, q.side) == Moneyness::Otm,
        })
        .map(|(q, count)| Observation {
            strike_index: strikes.partition_point(|&k| k < q.strike),
            side: q.side,
            price: q.price,
            multiplicity: *count as f64,
        })
        .collect();
    Ok(fit_observations(&design, observations, cum_rate, config)?.density)
}

fn held_out(quotes: &[MarketQuote], target: usize) -> Vec<MarketQuote> {
    quotes.iter().enumerate().filter(|(j, _)| *j != target).map(|(_, q)| *q).collect()
}

fn loo_price(chain: &OptionChain, quotes: &[MarketQuote], target: usize, config: &FitConfig) -> Result<f64> {
    let rest: Vec<(MarketQuote, usize)> = held_out(quotes, target).into_iter().map(|q| (q, 1)).collect();
    let density = fit_quote_sample(&rest, chain.spot(), chain.cum_rate(), config)?;
    let q = quotes[target];
    Ok(price_at_strike(&density, q.strike, q.side, chain.cum_rate()))
}

/// Fair price of every quote (in chain order) from a fit to the others.
pub fn leave_one_out(chain: &OptionChain, config: &FitConfig) -> Result<Vec<Result<f64>>> {
    config.validate()?;
    let quotes = chain.market_quotes();
    if quotes.len() < 3 {
        return Err(Error::InvalidInput(format!("leave-one-out needs ≥ 3 quotes, chain has {}", quotes.len())));
    }
    Ok((0..quotes.len())
        .into_par_iter()
        .map(|j| loo_price(chain, &quotes, j, config))
        .collect())
}

/// Linear-interpolation percentile of sorted data, `p ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The `B` bootstrap fair prices of quote `target`, in resample order.
/// Failed resample fits are `None`.
pub fn bootstrap_prices(
    chain: &OptionChain,
    target: usize,
    resamples: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<Vec<Option<f64>>> {
    let quotes = chain.market_quotes();
    if target >= quotes.len() {
        return Err(Error::InvalidInput(format!("quote {target} outside chain")));
    }
    let rest = held_out(&quotes, target);
    if rest.is_empty() {
        return Err(Error::InvalidInput("nothing left to resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(target as u64);
    let draws: Vec<Vec<usize>> = (0..resamples)
        .map(|_| (0..rest.len()).map(|_| rng.random_range(0..rest.len())).collect())
        .collect();

    let goal = quotes[target];
    Ok(draws
        .into_par_iter()
        .map(|draw| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for j in draw {
                *counts.entry(j).or_default() += 1;
            }
            let sample: Vec<(MarketQuote, usize)> = counts.into_iter().map(|(j, c)| (rest[j], c)).collect();
            fit_quote_sample(&sample, chain.spot(), chain.cum_rate(), config)
                .ok()
                .map(|d| price_at_strike(&d, goal.strike, goal.side, chain.cum_rate()))
        })
        .collect())
}

/// Percentile interval at `level` from resample fits of the other quotes.
pub fn bootstrap_ci(
    chain: &OptionChain,
    target: usize,
    resamples: usize,
    level: f64,
    seed: u64,
    config: &FitConfig,
) -> Result<(f64, f64)> {
    MispricingConfig { fit: *config, resamples, level, seed }.validate()?;
    let prices = bootstrap_prices(chain, target, resamples, seed, config)?;
    interval(&prices, level)
}

fn interval(prices: &[Option<f64>], level: f64) -> Result<(f64, f64)> {
    let mut ok: Vec<f64> = prices.iter().flatten().copied().collect();
    let failed = prices.len() - ok.len();
    if 2 * failed > prices.len() {
        return Err(Error::BootstrapUnstable { failed, total: prices.len() });
    }
    ok.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((percentile(&ok, alpha), percentile(&ok, 1.0 - alpha)))
}

/// Leave-one-out price, bootstrap band and flag for every quote.
pub fn scan(chain: &OptionChain, config: &MispricingConfig) -> Result<MispricingReport> {
    config.validate()?;
    let quotes = chain.market_quotes();
    if quotes.len() < 3 {
        return Err(Error::InvalidInput(format!("leave-one-out needs ≥ 3 quotes, chain has {}", quotes.len())));
    }
    let rows = (0..quotes.len())
        .into_par_iter()
        .map(|j| {
            let quote = quotes[j];
            let mut row = MispricingRow {
                strike: quote.strike,
                side: quote.side,
                market: quote.price,
                loo_fair: None,
                rel_diff: None,
                ci: None,
                flag: None,
                failure: None,
            };
            let fair = match loo_price(chain, &quotes, j, &config.fit) {
                Ok(v) => v,
                Err(e) => {
                    row.failure = Some(e.to_string());
                    return row;
                }
            };
            row.loo_fair = Some(fair);
            row.rel_diff = Some((quote.price - fair) / fair);
            let band = bootstrap_prices(chain, j, config.resamples, config.seed, &config.fit)
                .and_then(|prices| interval(&prices, config.level));
            match band {
                Ok((lo, hi)) => {
                    row.ci = Some((lo, hi));
                    row.flag = Some(Flag::classify(quote.price, lo, hi));
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(MispricingReport { seed: config.seed, resamples: config.resamples, level: config.level, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert!((percentile(&v, 0.125) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn flags_partition() {
        assert_eq!(Flag::classify(2.0, 0.5, 1.5), Flag::Over);
        assert_eq!(Flag::classify(0.1, 0.5, 1.5), Flag::Under);
        assert_eq!(Flag::classify(1.5, 0.5, 1.5), Flag::Fair);
        assert_eq!(Flag::classify(1.0, 1.0, 1.0), Flag::Fair);
    }

    #[test]
    fn unstable_when_most_fits_fail() {
        let prices = [None, None, Some(1.0)];
        assert!(matches!(interval(&prices, 0.95), Err(Error::BootstrapUnstable { failed: 2, total: 3 })));
        let prices = [None, Some(2.0), Some(1.0)];
        assert_eq!(interval(&prices, 0.95).unwrap(), (1.025, 1.975));
    }

    #[test]
    fn degenerate_sample_gives_zero_width() {
        let prices = vec![Some(3.25); 50];
        assert_eq!(interval(&prices, 0.95).unwrap(), (3.25, 3.25));
    }

    #[test]
    fn bootstrap_needs_two_resamples() {
        let config = MispricingConfig { resamples: 1, ..MispricingConfig::default() };
        assert!(config.validate().is_err());
    }
}
