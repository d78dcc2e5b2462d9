//! Fair prices from a fitted density, moneyness, and the `L_a` / `L_r`
//! error metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::density::PiecewiseDensity;
use crate::design::DesignSystem;
use crate::error::{Error, Result};
use crate::market_data::{OptionChain, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Moneyness {
    #[serde(rename = "OTM")]
    Otm,
    #[serde(rename = "ITM")]
    Itm,
}

impl Moneyness {
    pub fn label(self) -> &'static str {
        match self {
            Moneyness::Otm => "OTM",
            Moneyness::Itm => "ITM",
        }
    }
}

/// Calls above spot and puts below spot are out of the money; a strike equal
/// to spot counts as in the money for both sides.
pub fn classify_moneyness(strike: f64, spot: f64, side: Side) -> Moneyness {
    let otm = match side {
        Side::Call => strike > spot,
        Side::Put => strike < spot,
    };
    if otm {
        Moneyness::Otm
    } else {
        Moneyness::Itm
    }
}

/// Discounted fair prices at every strike of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairPrices {
    pub strikes: Vec<f64>,
    pub puts: Vec<f64>,
    pub calls: Vec<f64>,
}

impl FairPrices {
    pub fn price(&self, strike_index: usize, side: Side) -> f64 {
        match side {
            Side::Put => self.puts[strike_index],
            Side::Call => self.calls[strike_index],
        }
    }
}

pub fn price_chain(density: &PiecewiseDensity, chain: &OptionChain) -> Result<FairPrices> {
    if density.strikes() != chain.strikes() {
        return Err(Error::Grid("density knots differ from chain strikes".into()));
    }
    let design = DesignSystem::new(density.grid().clone());
    let (puts, calls) = design.prices_for(density, chain.cum_rate())?;
    Ok(FairPrices { strikes: chain.strikes().to_vec(), puts, calls })
}

/// Discounted fair price at an arbitrary strike; the strike need not be a knot.
pub fn price_at_strike(density: &PiecewiseDensity, strike: f64, side: Side, cum_rate: f64) -> f64 {
    let disc = (-cum_rate).exp();
    match side {
        Side::Put => disc * density.expected_put_payoff(strike),
        Side::Call => disc * density.expected_call_payoff(strike),
    }
}

/// A fitted price alongside its market quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricedQuote {
    pub strike: f64,
    pub side: Side,
    pub market: f64,
    pub fair: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Root-mean-square absolute pricing error.
    pub la: f64,
    /// Root-mean-square relative pricing error.
    pub lr: f64,
}

pub fn absolute_error(test: &[PricedQuote]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::NoTestOptions);
    }
    let sum: f64 = test.iter().map(|p| (p.fair - p.market).powi(2)).sum();
    Ok((sum / test.len() as f64).sqrt())
}

pub fn relative_error(test: &[PricedQuote]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::NoTestOptions);
    }
    let mut sum = 0.0;
    for p in test {
        if !(p.market > 0.0) {
            return Err(Error::ZeroPriceMetric);
        }
        sum += (p.fair / p.market - 1.0).powi(2);
    }
    Ok((sum / test.len() as f64).sqrt())
}

pub fn error_metrics(test: &[PricedQuote]) -> Result<ErrorMetrics> {
    Ok(ErrorMetrics { la: absolute_error(test)?, lr: relative_error(test)? })
}

/// Which quotes form the test set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestSet {
    #[default]
    All,
    Otm,
    Itm,
}

impl TestSet {
    fn contains(self, moneyness: Moneyness) -> bool {
        match self {
            TestSet::All => true,
            TestSet::Otm => moneyness == Moneyness::Otm,
            TestSet::Itm => moneyness == Moneyness::Itm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub strike: f64,
    pub side: Side,
    pub market: f64,
    pub fair: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub moneyness: Moneyness,
}

/// Fair-versus-market comparison for every quote in a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub rows: Vec<PriceRow>,
    pub test_set: TestSet,
    /// `None` when the test set is empty.
    pub metrics: Option<ErrorMetrics>,
}

impl PriceReport {
    pub fn build(density: &PiecewiseDensity, chain: &OptionChain, test_set: TestSet) -> Result<Self> {
        let fair = price_chain(density, chain)?;
        let mut rows = Vec::with_capacity(chain.quotes().len());
        let mut test = Vec::new();
        for quote in chain.quotes() {
            let strike = chain.strikes()[quote.strike_index];
            let fitted = fair.price(quote.strike_index, quote.side);
            let moneyness = classify_moneyness(strike, chain.spot(), quote.side);
            rows.push(PriceRow {
                strike,
                side: quote.side,
                market: quote.price,
                fair: fitted,
                abs_err: fitted - quote.price,
                rel_err: fitted / quote.price - 1.0,
                moneyness,
            });
            if test_set.contains(moneyness) {
                test.push(PricedQuote { strike, side: quote.side, market: quote.price, fair: fitted });
            }
        }
        let metrics = match error_metrics(&test) {
            Ok(m) => Some(m),
            Err(Error::NoTestOptions) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { rows, test_set, metrics })
    }

    /// `strike,side,market,fair,abs_err,rel_err,moneyness`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["strike", "side", "market", "fair", "abs_err", "rel_err", "moneyness"])?;
        for row in &self.rows {
            wtr.write_record([
                row.strike.to_string(),
                row.side.flag().to_string(),
                row.market.to_string(),
                row.fair.to_string(),
                row.abs_err.to_string(),
                row.rel_err.to_string(),
                row.moneyness.label().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::KnotGrid;

    fn pq(fair: f64, market: f64) -> PricedQuote {
        PricedQuote { strike: 100.0, side: Side::Call, market, fair }
    }

    #[test]
    fn moneyness_rules() {
        assert_eq!(classify_moneyness(110.0, 100.0, Side::Call), Moneyness::Otm);
        assert_eq!(classify_moneyness(90.0, 100.0, Side::Put), Moneyness::Otm);
        assert_eq!(classify_moneyness(100.0, 100.0, Side::Call), Moneyness::Itm);
        assert_eq!(classify_moneyness(100.0, 100.0, Side::Put), Moneyness::Itm);
        assert_eq!(classify_moneyness(90.0, 100.0, Side::Call), Moneyness::Itm);
    }

    #[test]
    fn metric_unit_cases() {
        let m = error_metrics(&[pq(1.0, 1.0), pq(3.0, 3.0)]).unwrap();
        assert_eq!((m.la, m.lr), (0.0, 0.0));

        let m = error_metrics(&[pq(2.0, 1.0)]).unwrap();
        assert_eq!((m.la, m.lr), (1.0, 1.0));

        let la = absolute_error(&[pq(13.0, 10.0), pq(24.0, 20.0)]).unwrap();
        assert!((la - 3.5355).abs() < 1e-4);
        assert!((la - (12.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(error_metrics(&[]), Err(Error::NoTestOptions)));
        assert!(matches!(relative_error(&[pq(1.0, 0.0)]), Err(Error::ZeroPriceMetric)));
        assert!(absolute_error(&[pq(1.0, 0.0)]).is_ok());
    }

    #[test]
    fn off_grid_pricing_matches_grid_pricing_at_knots() {
        let grid = KnotGrid::new(&[90.0, 100.0, 110.0], 1.5).unwrap();
        let d = PiecewiseDensity::from_masses(grid.clone(), &[0.1, 0.3, 0.4, 0.2]).unwrap();
        let design = DesignSystem::new(grid);
        let (puts, calls) = design.prices_for(&d, 0.01).unwrap();
        for (i, k) in [90.0, 100.0, 110.0].iter().enumerate() {
            assert!((price_at_strike(&d, *k, Side::Put, 0.01) - puts[i]).abs() < 1e-12);
            assert!((price_at_strike(&d, *k, Side::Call, 0.01) - calls[i]).abs() < 1e-12);
        }
    }
}
