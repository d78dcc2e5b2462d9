//! Synthetic option chains with known answers: closed-form lognormal prices,
//! or exact prices from a random feasible piecewise-constant density.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::density::{write_density_csv, KnotGrid, PiecewiseDensity, ReferenceDensity};
use crate::error::{Error, Result};
use crate::market_data::{
    weekday_offsets, write_option_quotes, write_rate_curve, write_spot_series, OptionQuote, RateCurve, Side,
    SpotSeries,
};
use crate::varswap::{iug, write_variance_futures, VarianceFutureQuote, TRADING_DAYS_PER_YEAR};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `log S_T ~ N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("lognormal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(Self { mu, sigma })
    }

    /// The law whose forward is `spot · e^R`, with total log-volatility
    /// `sigma` over the life of the option.
    pub fn risk_neutral(spot: f64, cum_rate: f64, sigma: f64) -> Result<Self> {
        Self::new(spot.ln() + cum_rate - 0.5 * sigma * sigma, sigma)
    }

    pub fn forward(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn mean_log(&self) -> f64 {
        self.mu
    }

    pub fn variance_log(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Log-price `mu + z sigma`.
    pub fn quantile_log(&self, z: f64) -> f64 {
        self.mu + z * self.sigma
    }

    pub fn call_price(&self, strike: f64, cum_rate: f64) -> f64 {
        (-cum_rate).exp() * self.expected_call_payoff(strike)
    }

    pub fn put_price(&self, strike: f64, cum_rate: f64) -> f64 {
        (-cum_rate).exp() * self.expected_put_payoff(strike)
    }

    fn d1_d2(&self, strike: f64) -> (f64, f64) {
        let d1 = (self.mu + self.sigma * self.sigma - strike.ln()) / self.sigma;
        (d1, d1 - self.sigma)
    }
}

impl ReferenceDensity for LogNormal {
    fn pdf(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn cdf(&self, y: f64) -> f64 {
        norm_cdf((y - self.mu) / self.sigma)
    }

    fn expected_put_payoff(&self, strike: f64) -> f64 {
        let (d1, d2) = self.d1_d2(strike);
        strike * norm_cdf(-d2) - self.forward() * norm_cdf(-d1)
    }

    fn expected_call_payoff(&self, strike: f64) -> f64 {
        let (d1, d2) = self.d1_d2(strike);
        self.forward() * norm_cdf(d1) - strike * norm_cdf(d2)
    }
}

/// `n` strikes evenly spaced in log-price over `mu ± span_sd · sigma`.
pub fn log_spaced_strikes(law: &LogNormal, span_sd: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![law.mu.exp()];
    }
    let lo = law.quantile_log(-span_sd);
    let hi = law.quantile_log(span_sd);
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Random interval masses summing to one; each interval is empty with
/// probability `zero_prob`, but at least one is not.
pub fn random_masses<R: Rng + ?Sized>(rng: &mut R, intervals: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let mut masses: Vec<f64> = (0..intervals)
            .map(|_| {
                if rng.random::<f64>() < zero_prob {
                    0.0
                } else {
                    Exp1.sample(rng)
                }
            })
            .collect();
        let total: f64 = masses.iter().sum();
        if total > 0.0 {
            masses.iter_mut().for_each(|m| *m /= total);
            return masses;
        }
    }
}

pub fn random_density<R: Rng + ?Sized>(rng: &mut R, grid: KnotGrid, zero_prob: f64) -> Result<PiecewiseDensity> {
    let masses = random_masses(rng, grid.q() + 1, zero_prob);
    PiecewiseDensity::from_masses(grid, &masses)
}

/// Where and when a synthetic chain trades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub trade_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub spot: f64,
    /// Continuously compounded rate per calendar day.
    pub daily_rate: f64,
    pub strikes: Vec<f64>,
}

impl ChainSpec {
    pub fn days(&self) -> i64 {
        (self.expiry_date - self.trade_date).num_days()
    }

    pub fn cum_rate(&self) -> f64 {
        self.daily_rate * self.days() as f64
    }

    pub fn rates(&self) -> Result<RateCurve> {
        RateCurve::flat(self.trade_date, self.expiry_date, self.daily_rate)
    }
}

/// Prices at or below this fraction of the strike are rounding noise around
/// zero and are not quoted.
pub const PRICE_FLOOR: f64 = 1e-12;

/// Quote rows for every strike and both sides, priced exactly from
/// `reference`. Zero prices are left out, since they cannot be traded.
pub fn synth_quotes<D: ReferenceDensity + ?Sized>(reference: &D, spec: &ChainSpec) -> Vec<OptionQuote> {
    let disc = (-spec.cum_rate()).exp();
    let mut out = Vec::with_capacity(2 * spec.strikes.len());
    for &strike in &spec.strikes {
        for side in [Side::Call, Side::Put] {
            let price = disc
                * match side {
                    Side::Call => reference.expected_call_payoff(strike),
                    Side::Put => reference.expected_put_payoff(strike),
                };
            if !(price > PRICE_FLOOR * strike) {
                continue;
            }
            out.push(OptionQuote {
                trade_date: spec.trade_date,
                expiry_date: spec.expiry_date,
                strike,
                side,
                bid: price,
                ask: price,
                mark: Some(price),
                volume: 1,
            });
        }
    }
    out
}

/// A geometric Brownian motion traded on weekdays, with one variance
/// contract running over the first `contract_days` trading days after
/// `trade_date`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmWorld {
    pub trade_date: NaiveDate,
    pub spot: f64,
    /// Annualized log-volatility on a 365-day calendar.
    pub vol: f64,
    /// Continuously compounded rate per calendar day.
    pub daily_rate: f64,
    /// Trading days in the variance contract.
    pub contract_days: usize,
}

impl GbmWorld {
    fn daily_variance(&self) -> f64 {
        self.vol * self.vol / 365.0
    }

    fn drift(&self) -> f64 {
        self.daily_rate - 0.5 * self.daily_variance()
    }

    /// Risk-neutral law of `log S` `days` calendar days after a close at `spot`.
    pub fn law(&self, spot: f64, days: f64) -> Result<LogNormal> {
        LogNormal::risk_neutral(spot, self.daily_rate * days, (self.daily_variance() * days).sqrt())
    }

    /// Calendar offsets of the contract's trading days from `trade_date`.
    pub fn calendar(&self) -> Vec<f64> {
        weekday_offsets(self.trade_date, self.contract_days)
    }

    /// `trade_date` followed by every trading day of the contract.
    pub fn dates(&self) -> Vec<NaiveDate> {
        std::iter::once(self.trade_date)
            .chain(self.calendar().into_iter().map(|c| self.trade_date + Duration::days(c as i64)))
            .collect()
    }

    pub fn contract_expiry(&self) -> NaiveDate {
        *self.dates().last().expect("dates start with the trade date")
    }

    /// Expected annualized variance of the days left after `realized` of
    /// them have passed, quoted as IUG; zero once nothing is left.
    pub fn fair_iug(&self, realized: usize) -> f64 {
        let cal = self.calendar();
        if realized >= cal.len() {
            return 0.0;
        }
        let mut prev = if realized == 0 { 0.0 } else { cal[realized - 1] };
        let mut sum = 0.0;
        for &c in &cal[realized..] {
            let dc = c - prev;
            sum += self.daily_variance() * dc + (self.drift() * dc).powi(2);
            prev = c;
        }
        sum * TRADING_DAYS_PER_YEAR / (cal.len() - realized) as f64 * 1e4
    }

    /// Closes on the trade date and on each contract trading day.
    pub fn simulate_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpotSeries> {
        let mut points = vec![(self.trade_date, self.spot)];
        let mut log_s = self.spot.ln();
        let mut prev = 0.0;
        for (c, date) in self.calendar().into_iter().zip(self.dates().into_iter().skip(1)) {
            let dc = c - prev;
            let z: f64 = StandardNormal.sample(rng);
            log_s += self.drift() * dc + (self.daily_variance() * dc).sqrt() * z;
            points.push((date, log_s.exp()));
            prev = c;
        }
        SpotSeries::new(points)
    }

    /// The variance-future quote after `realized` contract days.
    pub fn variance_future(&self, realized: usize) -> VarianceFutureQuote {
        let dates = self.dates();
        VarianceFutureQuote {
            trade_date: dates[realized.min(dates.len() - 1)],
            start_date: self.trade_date,
            expiry_date: self.contract_expiry(),
            iug: Some(self.fair_iug(realized)),
            realized_days: realized.min(self.contract_days),
            expected_days: self.contract_days,
        }
    }

    /// Exact lognormal quotes on `date` for expiries `expiry_days` calendar
    /// days out, `strikes` per expiry over `± span_sd` deviations.
    pub fn option_quotes(
        &self,
        date: NaiveDate,
        spot: f64,
        expiry_days: &[i64],
        strikes: usize,
        span_sd: f64,
    ) -> Result<Vec<OptionQuote>> {
        let mut out = Vec::new();
        for &days in expiry_days {
            let law = self.law(spot, days as f64)?;
            let spec = ChainSpec {
                trade_date: date,
                expiry_date: date + Duration::days(days),
                spot,
                daily_rate: self.daily_rate,
                strikes: log_spaced_strikes(&law, span_sd, strikes),
            };
            out.extend(synth_quotes(&law, &spec));
        }
        Ok(out)
    }
}

/// IUG of an already simulated path over `(from, to]`.
pub fn path_iug(path: &SpotSeries, from: NaiveDate, to: NaiveDate) -> Result<f64> {
    Ok(iug(&path.log_returns(from, to)?, TRADING_DAYS_PER_YEAR))
}

/// Files written by [`write_synthetic`].
pub const OPTIONS_FILE: &str = "options.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const SPOT_FILE: &str = "spot.csv";
pub const VARIANCE_FUTURES_FILE: &str = "variance_futures.csv";

/// Writes option rows, the rate curve and the spot series to `dir`.
pub fn write_synthetic(dir: &Path, quotes: &[OptionQuote], rates: &RateCurve, spot: &SpotSeries) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_option_quotes(BufWriter::new(File::create(dir.join(OPTIONS_FILE))?), quotes)?;
    write_rate_curve(BufWriter::new(File::create(dir.join(RATES_FILE))?), rates)?;
    write_spot_series(BufWriter::new(File::create(dir.join(SPOT_FILE))?), spot)?;
    Ok(())
}

pub fn write_truth_density(path: &Path, density: &PiecewiseDensity) -> Result<()> {
    write_density_csv(BufWriter::new(File::create(path)?), density)
}

pub fn write_variance_future_file(dir: &Path, quotes: &[VarianceFutureQuote]) -> Result<()> {
    write_variance_futures(BufWriter::new(File::create(dir.join(VARIANCE_FUTURES_FILE))?), quotes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn put_call_parity_and_forward() {
        let law = LogNormal::risk_neutral(100.0, 0.01, 0.15).unwrap();
        assert!((law.forward() - 100.0 * 0.01f64.exp()).abs() < 1e-10);
        for k in [60.0, 95.0, 100.0, 130.0] {
            let parity = law.call_price(k, 0.01) - law.put_price(k, 0.01) - (100.0 - k * (-0.01f64).exp());
            assert!(parity.abs() < 1e-10);
        }
    }

    #[test]
    fn near_degenerate_law_is_intrinsic() {
        let law = LogNormal::risk_neutral(100.0, 0.0, 1e-6).unwrap();
        assert!((law.call_price(90.0, 0.0) - 10.0).abs() < 1e-6);
        assert!(law.call_price(110.0, 0.0).abs() < 1e-12);
        assert!((law.put_price(110.0, 0.0) - 10.0).abs() < 1e-6);
    }

    #[test]
    fn strikes_are_log_spaced() {
        let law = LogNormal::new(4.6, 0.2).unwrap();
        let k = log_spaced_strikes(&law, 4.0, 5);
        assert!((k[0].ln() - 3.8).abs() < 1e-12);
        assert!((k[2].ln() - 4.6).abs() < 1e-12);
        assert!((k[4].ln() - 5.4).abs() < 1e-12);
    }

    #[test]
    fn random_density_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = KnotGrid::new(&[80.0, 90.0, 100.0, 110.0], 1.5).unwrap();
        for _ in 0..50 {
            let d = random_density(&mut rng, grid.clone(), 0.3).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_quotes_skip_zero_prices() {
        let grid = KnotGrid::new(&[90.0, 100.0, 110.0], 1.5).unwrap();
        let d = PiecewiseDensity::from_masses(grid, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        let spec = ChainSpec {
            trade_date: "2014-04-14".parse().unwrap(),
            expiry_date: "2014-05-17".parse().unwrap(),
            spot: 100.0,
            daily_rate: 0.0,
            strikes: vec![90.0, 100.0, 110.0],
        };
        let quotes = synth_quotes(&d, &spec);
        assert_eq!(quotes.len(), 4);
        assert!(quotes.iter().all(|q| q.market_price() > 0.0));
    }

    #[test]
    fn gbm_world_fair_iug_matches_constant_variance() {
        let world = GbmWorld {
            trade_date: "2014-04-14".parse().unwrap(),
            spot: 100.0,
            vol: 0.2,
            daily_rate: 0.0,
            contract_days: 10,
        };
        // two weeks of weekdays: 14 calendar days of variance over 10 trading days
        let drift = -0.5 * 0.04 / 365.0;
        let cal = world.calendar();
        assert_eq!(cal.last().copied(), Some(14.0));
        let mut want = 0.04 / 365.0 * 14.0;
        let mut prev = 0.0;
        for &c in &cal {
            want += (drift * (c - prev)).powi(2);
            prev = c;
        }
        assert!((world.fair_iug(0) - want * 252.0 / 10.0 * 1e4).abs() < 1e-9);
        assert_eq!(world.fair_iug(10), 0.0);
        assert_eq!(world.contract_expiry(), "2014-04-28".parse::<NaiveDate>().unwrap());
        let vf = world.variance_future(10);
        assert_eq!((vf.trade_date, vf.realized_days), (world.contract_expiry(), 10));
    }

    #[test]
    fn simulated_path_is_seeded() {
        let world = GbmWorld {
            trade_date: "2014-04-14".parse().unwrap(),
            spot: 100.0,
            vol: 0.2,
            daily_rate: 1e-4,
            contract_days: 21,
        };
        let a = world.simulate_path(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = world.simulate_path(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().count(), 22);
    }
}
