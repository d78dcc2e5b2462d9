//! Quote ingestion: raw option rows, daily rates and closing prices are
//! filtered and assembled into one [`OptionChain`] per (trade date, expiry).
//!
//! Filtering rules: quotes need a positive bid and a positive volume, and a
//! chain needs more than seven calendar days to expiry. The market price of a
//! quote is its `mark` when present, otherwise the bid/ask midpoint; repeated
//! rows at the same (strike, side) are averaged.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "C")]
    Call,
    #[serde(rename = "P")]
    Put,
}

impl Side {
    pub fn flag(self) -> &'static str {
        match self {
            Side::Call => "C",
            Side::Put => "P",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Call => "call",
            Side::Put => "put",
        })
    }
}

/// One row of the option CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub trade_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    #[serde(rename = "cp_flag")]
    pub side: Side,
    pub bid: f64,
    pub ask: f64,
    /// Transaction price; empty in the CSV means "use the midpoint".
    pub mark: Option<f64>,
    pub volume: u64,
}

impl OptionQuote {
    pub fn market_price(&self) -> f64 {
        match self.mark {
            Some(mark) => mark,
            None => 0.5 * (self.bid + self.ask),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::InvalidInput(format!("strike {} must be positive", self.strike)));
        }
        if self.expiry_date < self.trade_date {
            return Err(Error::InvalidInput(format!(
                "expiry {} precedes trade date {}",
                self.expiry_date, self.trade_date
            )));
        }
        if self.bid < 0.0 || self.ask < 0.0 || self.mark.is_some_and(|m| m < 0.0) {
            return Err(Error::InvalidInput("negative price".into()));
        }
        if self.ask < self.bid {
            return Err(Error::InvalidInput(format!(
                "ask {} below bid {} at strike {}",
                self.ask, self.bid, self.strike
            )));
        }
        Ok(())
    }
}

/// A cleaned quote with its strike still in price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketQuote {
    pub strike: f64,
    pub side: Side,
    pub price: f64,
}

/// A quote inside a chain, addressed by its position on the strike grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainQuote {
    pub strike_index: usize,
    pub side: Side,
    pub price: f64,
}

/// A cleaned cross-section of quotes for one (trade date, expiry) pair.
///
/// Strikes are distinct and strictly increasing; every strike carries at
/// least one quote and at most one quote per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    trade_date: NaiveDate,
    expiry_date: NaiveDate,
    spot: f64,
    strikes: Vec<f64>,
    quotes: Vec<ChainQuote>,
    cum_rate: f64,
}

impl OptionChain {
    /// Builds a chain from cleaned quotes. Repeated (strike, side) pairs are
    /// averaged; the strike grid is every distinct strike, ascending.
    pub fn from_market_quotes(
        trade_date: NaiveDate,
        expiry_date: NaiveDate,
        spot: f64,
        cum_rate: f64,
        quotes: &[MarketQuote],
    ) -> Result<Self> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(Error::InvalidInput(format!("spot {spot} must be positive")));
        }
        if !cum_rate.is_finite() {
            return Err(Error::InvalidInput("cumulative rate must be finite".into()));
        }
        let mut merged: BTreeMap<(OrdF64, Side), (f64, usize)> = BTreeMap::new();
        for quote in quotes {
            if !(quote.strike.is_finite() && quote.strike > 0.0) {
                return Err(Error::InvalidInput(format!("strike {} must be positive", quote.strike)));
            }
            if !(quote.price.is_finite() && quote.price > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "price {} at strike {} must be positive",
                    quote.price, quote.strike
                )));
            }
            let slot = merged.entry((OrdF64(quote.strike), quote.side)).or_insert((0.0, 0));
            slot.0 += quote.price;
            slot.1 += 1;
        }

        let mut strikes: Vec<f64> = merged.keys().map(|(k, _)| k.0).collect();
        strikes.dedup();
        if strikes.len() < 2 {
            return Err(Error::InsufficientStrikes { found: strikes.len(), required: 2 });
        }

        let quotes = merged
            .into_iter()
            .map(|((strike, side), (sum, count))| ChainQuote {
                strike_index: strikes.partition_point(|&k| k < strike.0),
                side,
                price: sum / count as f64,
            })
            .collect();

        Ok(Self { trade_date, expiry_date, spot, strikes, quotes, cum_rate })
    }

    pub fn trade_date(&self) -> NaiveDate {
        self.trade_date
    }

    pub fn expiry_date(&self) -> NaiveDate {
        self.expiry_date
    }

    pub fn days_to_expiry(&self) -> i64 {
        (self.expiry_date - self.trade_date).num_days()
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    /// Number of distinct strikes.
    pub fn q(&self) -> usize {
        self.strikes.len()
    }

    pub fn cum_rate(&self) -> f64 {
        self.cum_rate
    }

    /// Quotes ordered by strike, calls before puts at the same strike.
    pub fn quotes(&self) -> &[ChainQuote] {
        &self.quotes
    }

    pub fn call_count(&self) -> usize {
        self.quotes.iter().filter(|q| q.side == Side::Call).count()
    }

    pub fn put_count(&self) -> usize {
        self.quotes.iter().filter(|q| q.side == Side::Put).count()
    }

    pub fn price(&self, strike_index: usize, side: Side) -> Option<f64> {
        self.quotes
            .iter()
            .find(|q| q.strike_index == strike_index && q.side == side)
            .map(|q| q.price)
    }

    pub fn market_quotes(&self) -> Vec<MarketQuote> {
        self.quotes
            .iter()
            .map(|q| MarketQuote { strike: self.strikes[q.strike_index], side: q.side, price: q.price })
            .collect()
    }

    /// A chain on the same dates and spot built from a different quote set.
    pub fn with_quotes(&self, quotes: &[MarketQuote]) -> Result<Self> {
        Self::from_market_quotes(self.trade_date, self.expiry_date, self.spot, self.cum_rate, quotes)
    }

    /// Raw rows that reproduce this chain when loaded again: `mark` carries
    /// the price and the bid/ask collapse onto it.
    pub fn to_option_quotes(&self) -> Vec<OptionQuote> {
        self.quotes
            .iter()
            .map(|q| OptionQuote {
                trade_date: self.trade_date,
                expiry_date: self.expiry_date,
                strike: self.strikes[q.strike_index],
                side: q.side,
                bid: q.price,
                ask: q.price,
                mark: Some(q.price),
                volume: 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Daily continuously compounded rates, per-day units.
///
/// Days between two observations take the last observed rate; days outside
/// the observed range are a rate gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    dates: Vec<NaiveDate>,
    daily_rates: Vec<f64>,
}

impl RateCurve {
    pub fn new(dates: Vec<NaiveDate>, daily_rates: Vec<f64>) -> Result<Self> {
        if dates.len() != daily_rates.len() {
            return Err(Error::InvalidInput("rate dates and values differ in length".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("rate dates must be strictly increasing".into()));
        }
        if daily_rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("rates must be finite".into()));
        }
        Ok(Self { dates, daily_rates })
    }

    /// A flat curve with one observation per calendar day over `[from, to]`.
    pub fn flat(from: NaiveDate, to: NaiveDate, daily_rate: f64) -> Result<Self> {
        let dates: Vec<NaiveDate> = from.iter_days().take_while(|d| *d <= to).collect();
        let rates = vec![daily_rate; dates.len()];
        Self::new(dates, rates)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn daily_rates(&self) -> &[f64] {
        &self.daily_rates
    }

    pub fn rate_on(&self, date: NaiveDate) -> Result<f64> {
        match (self.dates.first(), self.dates.last()) {
            (Some(&first), Some(&last)) if date >= first && date <= last => {
                let idx = self.dates.partition_point(|&d| d <= date) - 1;
                Ok(self.daily_rates[idx])
            }
            _ => Err(Error::RateGap(date)),
        }
    }
}

/// `R_{tT}`: the sum of daily rates over the calendar days `[t, T)`.
pub fn cumulative_rate(curve: &RateCurve, t: NaiveDate, maturity: NaiveDate) -> Result<f64> {
    if maturity < t {
        return Err(Error::InvalidInput(format!("maturity {maturity} precedes {t}")));
    }
    t.iter_days().take_while(|d| *d < maturity).map(|d| curve.rate_on(d)).sum()
}

/// Closing prices by date.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpotSeries {
    closes: BTreeMap<NaiveDate, f64>,
}

impl SpotSeries {
    pub fn new(points: impl IntoIterator<Item = (NaiveDate, f64)>) -> Result<Self> {
        let mut closes = BTreeMap::new();
        for (date, close) in points {
            if !(close.is_finite() && close > 0.0) {
                return Err(Error::InvalidInput(format!("close {close} on {date} must be positive")));
            }
            if closes.insert(date, close).is_some() {
                return Err(Error::InvalidInput(format!("duplicate close on {date}")));
            }
        }
        Ok(Self { closes })
    }

    pub fn spot_on(&self, date: NaiveDate) -> Result<f64> {
        self.closes.get(&date).copied().ok_or(Error::MissingSpot(date))
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.closes.keys().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.closes.iter().map(|(d, c)| (*d, *c))
    }

    /// Daily log returns for the observations dated in `(from, to]`, each
    /// taken against the previous observation.
    pub fn log_returns(&self, from: NaiveDate, to: NaiveDate) -> Result<Vec<f64>> {
        let mut prev = self.spot_on(from)?;
        let mut out = Vec::new();
        if to <= from {
            return Ok(out);
        }
        for (_, &close) in self.closes.range(from.succ_opt().unwrap_or(from)..=to) {
            out.push((close / prev).ln());
            prev = close;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteFilter {
    /// Chains need strictly more calendar days to expiry than this.
    pub min_days_to_expiry: i64,
}

impl Default for QuoteFilter {
    fn default() -> Self {
        Self { min_days_to_expiry: 7 }
    }
}

impl QuoteFilter {
    pub fn keeps(&self, quote: &OptionQuote) -> bool {
        quote.bid > 0.0 && quote.volume > 0 && quote.market_price() > 0.0
    }
}

/// Assembles one chain from raw rows sharing a (trade date, expiry) pair.
pub fn load_chain(
    raw_quotes: &[OptionQuote],
    rates: &RateCurve,
    spot: &SpotSeries,
    filter: &QuoteFilter,
) -> Result<OptionChain> {
    let first = raw_quotes
        .first()
        .ok_or(Error::InsufficientStrikes { found: 0, required: 2 })?;
    let (trade_date, expiry_date) = (first.trade_date, first.expiry_date);
    for quote in raw_quotes {
        quote.validate()?;
        if quote.trade_date != trade_date || quote.expiry_date != expiry_date {
            return Err(Error::InvalidInput(format!(
                "mixed chain: ({}, {}) alongside ({trade_date}, {expiry_date})",
                quote.trade_date, quote.expiry_date
            )));
        }
    }
    let days = (expiry_date - trade_date).num_days();
    if days <= filter.min_days_to_expiry {
        return Err(Error::MaturityTooShort { days, min: filter.min_days_to_expiry });
    }

    let kept: Vec<MarketQuote> = raw_quotes
        .iter()
        .filter(|q| filter.keeps(q))
        .map(|q| MarketQuote { strike: q.strike, side: q.side, price: q.market_price() })
        .collect();
    if kept.is_empty() {
        return Err(Error::InsufficientStrikes { found: 0, required: 2 });
    }
    let cum_rate = cumulative_rate(rates, trade_date, expiry_date)?;
    let spot = spot.spot_on(trade_date)?;
    OptionChain::from_market_quotes(trade_date, expiry_date, spot, cum_rate, &kept)
}

/// Groups rows by (trade date, expiry) and loads each group, in date order.
pub fn load_chains(
    raw_quotes: &[OptionQuote],
    rates: &RateCurve,
    spot: &SpotSeries,
    filter: &QuoteFilter,
) -> Vec<((NaiveDate, NaiveDate), Result<OptionChain>)> {
    let mut groups: BTreeMap<(NaiveDate, NaiveDate), Vec<OptionQuote>> = BTreeMap::new();
    for quote in raw_quotes {
        groups
            .entry((quote.trade_date, quote.expiry_date))
            .or_default()
            .push(quote.clone());
    }
    groups
        .into_iter()
        .map(|(key, rows)| (key, load_chain(&rows, rates, spot, filter)))
        .collect()
}

/// Days-to-expiry groups used when reporting results by maturity.
pub const MATURITY_BUCKETS: [(i64, i64); 7] =
    [(7, 14), (17, 31), (81, 94), (171, 199), (337, 393), (502, 592), (670, 790)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaturityBucket {
    pub min_days: i64,
    pub max_days: i64,
}

impl MaturityBucket {
    pub fn label(&self) -> String {
        format!("{}~{}", self.min_days, self.max_days)
    }
}

impl fmt::Display for MaturityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", self.min_days, self.max_days)
    }
}

pub fn bucket_maturity(days_to_expiry: i64) -> Option<MaturityBucket> {
    MATURITY_BUCKETS
        .iter()
        .find(|(lo, hi)| (*lo..=*hi).contains(&days_to_expiry))
        .map(|&(min_days, max_days)| MaturityBucket { min_days, max_days })
}

// CSV plumbing.

#[derive(Debug, Serialize, Deserialize)]
struct RateRow {
    date: NaiveDate,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpotRow {
    date: NaiveDate,
    close: f64,
}

pub fn read_option_quotes<R: Read>(reader: R) -> Result<Vec<OptionQuote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<OptionQuote>, _>>()?;
    Ok(rows)
}

pub fn write_option_quotes<W: Write>(writer: W, quotes: &[OptionQuote]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for quote in quotes {
        wtr.serialize(quote)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rate_curve<R: Read>(reader: R) -> Result<RateCurve> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut dates = Vec::new();
    let mut rates = Vec::new();
    for row in rdr.deserialize::<RateRow>() {
        let row = row?;
        dates.push(row.date);
        rates.push(row.rate);
    }
    RateCurve::new(dates, rates)
}

pub fn write_rate_curve<W: Write>(writer: W, curve: &RateCurve) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (date, rate) in curve.dates.iter().zip(&curve.daily_rates) {
        wtr.serialize(RateRow { date: *date, rate: *rate })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_spot_series<R: Read>(reader: R) -> Result<SpotSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    for row in rdr.deserialize::<SpotRow>() {
        let row = row?;
        points.push((row.date, row.close));
    }
    SpotSeries::new(points)
}

pub fn write_spot_series<W: Write>(writer: W, series: &SpotSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (date, close) in series.iter() {
        wtr.serialize(SpotRow { date, close })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_option_quotes_path(path: &Path) -> Result<Vec<OptionQuote>> {
    read_option_quotes(std::fs::File::open(path)?)
}

pub fn read_rate_curve_path(path: &Path) -> Result<RateCurve> {
    read_rate_curve(std::fs::File::open(path)?)
}

pub fn read_spot_series_path(path: &Path) -> Result<SpotSeries> {
    read_spot_series(std::fs::File::open(path)?)
}

/// Weekday trading calendar starting after `from`; entry `k` is the
/// calendar-day offset of the `(k+1)`-th trading day.
pub fn weekday_offsets(from: NaiveDate, trading_days: usize) -> Vec<f64> {
    use chrono::Datelike;
    let mut out = Vec::with_capacity(trading_days);
    let mut day = from;
    while out.len() < trading_days {
        day += Duration::days(1);
        if day.weekday().number_from_monday() <= 5 {
            out.push((day - from).num_days() as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn quote(strike: f64, side: Side, bid: f64, ask: f64, volume: u64) -> OptionQuote {
        OptionQuote {
            trade_date: d("2014-04-14"),
            expiry_date: d("2014-05-09"),
            strike,
            side,
            bid,
            ask,
            mark: None,
            volume,
        }
    }

    fn world() -> (RateCurve, SpotSeries) {
        let rates = RateCurve::flat(d("2014-04-01"), d("2014-06-30"), 0.0001).unwrap();
        let spot = SpotSeries::new([(d("2014-04-14"), 100.0)]).unwrap();
        (rates, spot)
    }

    #[test]
    fn zero_bid_and_zero_volume_are_dropped() {
        let (rates, spot) = world();
        let rows = vec![
            quote(100.0, Side::Call, 0.0, 1.0, 10),
            quote(105.0, Side::Call, 1.0, 1.2, 0),
            quote(110.0, Side::Call, 0.5, 0.7, 3),
            quote(90.0, Side::Put, 0.4, 0.6, 3),
        ];
        let chain = load_chain(&rows, &rates, &spot, &QuoteFilter::default()).unwrap();
        assert_eq!(chain.strikes(), &[90.0, 110.0]);
        assert_eq!(chain.quotes().len(), 2);
        assert!((chain.price(1, Side::Call).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn short_maturity_rejects_the_chain() {
        let (rates, spot) = world();
        let mut row = quote(100.0, Side::Call, 1.0, 1.2, 5);
        row.expiry_date = d("2014-04-19");
        let err = load_chain(&[row.clone(), row], &rates, &spot, &QuoteFilter::default()).unwrap_err();
        assert!(matches!(err, Error::MaturityTooShort { days: 5, .. }));
    }

    #[test]
    fn seven_days_is_not_enough() {
        let (rates, spot) = world();
        let mut row = quote(100.0, Side::Call, 1.0, 1.2, 5);
        row.expiry_date = d("2014-04-21");
        assert!(load_chain(&[row], &rates, &spot, &QuoteFilter::default()).is_err());
    }

    #[test]
    fn strikes_are_deduplicated_across_sides() {
        let (rates, spot) = world();
        let rows = vec![
            quote(110.0, Side::Call, 1.0, 1.2, 1),
            quote(100.0, Side::Put, 2.0, 2.2, 1),
            quote(100.0, Side::Call, 3.0, 3.2, 1),
        ];
        let chain = load_chain(&rows, &rates, &spot, &QuoteFilter::default()).unwrap();
        assert_eq!(chain.q(), 2);
        assert_eq!(chain.call_count(), 2);
        assert_eq!(chain.put_count(), 1);
        assert!(chain.price(0, Side::Put).is_some());
        assert!(chain.price(1, Side::Put).is_none());
    }

    #[test]
    fn duplicate_rows_are_averaged_and_mark_wins() {
        let (rates, spot) = world();
        let mut a = quote(100.0, Side::Call, 1.0, 2.0, 1);
        a.mark = Some(1.9);
        let b = quote(100.0, Side::Call, 1.0, 1.2, 1);
        let c = quote(120.0, Side::Call, 0.1, 0.3, 1);
        let chain = load_chain(&[a, b, c], &rates, &spot, &QuoteFilter::default()).unwrap();
        assert!((chain.price(0, Side::Call).unwrap() - 0.5 * (1.9 + 1.1)).abs() < 1e-12);
    }

    #[test]
    fn one_strike_is_insufficient() {
        let (rates, spot) = world();
        let rows = vec![quote(100.0, Side::Call, 1.0, 1.2, 1), quote(100.0, Side::Put, 1.0, 1.2, 1)];
        let err = load_chain(&rows, &rates, &spot, &QuoteFilter::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientStrikes { found: 1, .. }));
    }

    #[test]
    fn rate_gap_is_reported() {
        let rates = RateCurve::flat(d("2014-04-20"), d("2014-06-30"), 0.0001).unwrap();
        let spot = SpotSeries::new([(d("2014-04-14"), 100.0)]).unwrap();
        let rows = vec![quote(100.0, Side::Call, 1.0, 1.2, 1), quote(110.0, Side::Call, 1.0, 1.2, 1)];
        let err = load_chain(&rows, &rates, &spot, &QuoteFilter::default()).unwrap_err();
        assert!(matches!(err, Error::RateGap(date) if date == d("2014-04-14")));
    }

    #[test]
    fn buckets() {
        assert_eq!(bucket_maturity(10).unwrap().label(), "7~14");
        assert_eq!(bucket_maturity(700).unwrap().label(), "670~790");
        assert_eq!(bucket_maturity(50), None);
        assert_eq!(bucket_maturity(7).unwrap().label(), "7~14");
        assert_eq!(bucket_maturity(15), None);
    }

    #[test]
    fn cumulative_rate_cases() {
        let zero = RateCurve::flat(d("2020-01-01"), d("2020-12-31"), 0.0).unwrap();
        assert_eq!(cumulative_rate(&zero, d("2020-01-01"), d("2020-06-01")).unwrap(), 0.0);

        let flat = RateCurve::flat(d("2020-01-01"), d("2020-12-31"), 0.0001).unwrap();
        let t = d("2020-01-01");
        let r = cumulative_rate(&flat, t, t + Duration::days(100)).unwrap();
        assert!((r - 0.01).abs() < 1e-15);
        assert_eq!(cumulative_rate(&flat, t, t).unwrap(), 0.0);
    }

    #[test]
    fn forward_fill_between_observations() {
        let curve = RateCurve::new(vec![d("2020-01-03"), d("2020-01-06")], vec![0.001, 0.002]).unwrap();
        // 3rd, 4th, 5th use 0.001; 6th uses 0.002.
        let r = cumulative_rate(&curve, d("2020-01-03"), d("2020-01-07")).unwrap();
        assert!((r - 0.005).abs() < 1e-15);
        assert!(matches!(curve.rate_on(d("2020-01-07")), Err(Error::RateGap(_))));
    }

    #[test]
    fn csv_round_trip_with_empty_mark() {
        let text = "trade_date,expiry_date,strike,cp_flag,bid,ask,mark,volume\n\
                    2014-04-14,2014-05-09,100,C,1.0,1.2,,5\n\
                    2014-04-14,2014-05-09,100,P,2.0,2.4,2.1,7\n";
        let rows = read_option_quotes(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mark, None);
        assert_eq!(rows[1].side, Side::Put);
        assert!((rows[0].market_price() - 1.1).abs() < 1e-15);

        let mut buf = Vec::new();
        write_option_quotes(&mut buf, &rows).unwrap();
        assert_eq!(read_option_quotes(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn log_returns_use_observation_order() {
        let series = SpotSeries::new([
            (d("2020-01-02"), 100.0),
            (d("2020-01-03"), 101.0),
            (d("2020-01-06"), 99.0),
        ])
        .unwrap();
        let r = series.log_returns(d("2020-01-02"), d("2020-01-06")).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - (1.01f64).ln()).abs() < 1e-15);
        assert!((r[1] - (99.0f64 / 101.0).ln()).abs() < 1e-15);
        assert!(series.log_returns(d("2020-01-03"), d("2020-01-03")).unwrap().is_empty());
    }

    #[test]
    fn weekday_calendar_skips_weekends() {
        // 2020-01-03 is a Friday.
        let offsets = weekday_offsets(d("2020-01-03"), 3);
        assert_eq!(offsets, vec![3.0, 4.0, 5.0]);
    }
}
