//! Variance swap value from fitted densities at several maturities, next to
//! the value implied by a variance-future quote.

use pcrnd::design::DesignSystem;
use pcrnd::market_data::{MarketQuote, OptionChain, Side};
use pcrnd::synth::{log_spaced_strikes, LogNormal};
use pcrnd::varswap::{build_curve_from_densities, iug, replicate_from_future, varswap_price, VarSwapSpec};
use pcrnd::{fit, FitConfig, KnotGrid, PiecewiseDensity};

fn main() -> pcrnd::Result<()> {
    let spot = 100.0;
    let daily_vol = 0.2 / 365f64.sqrt();
    let mut fitted: Vec<(f64, PiecewiseDensity)> = Vec::new();
    for days in [10.0, 20.0, 30.0] {
        let law = LogNormal::risk_neutral(spot, 0.0, daily_vol * f64::sqrt(days))?;
        let mut quotes = Vec::new();
        for k in log_spaced_strikes(&law, 4.0, 60) {
            quotes.push(MarketQuote { strike: k, side: Side::Call, price: law.call_price(k, 0.0) });
            quotes.push(MarketQuote { strike: k, side: Side::Put, price: law.put_price(k, 0.0) });
        }
        let chain = OptionChain::from_market_quotes(
            "2014-04-14".parse().unwrap(),
            "2014-04-14".parse::<chrono::NaiveDate>().unwrap() + chrono::Duration::days(days as i64),
            spot,
            0.0,
            &quotes,
        )?;
        let config = FitConfig::default();
        let result = fit(&chain, &DesignSystem::new(KnotGrid::new(chain.strikes(), config.c_k)?), &config)?;
        fitted.push((days, result.density));
    }
    let refs: Vec<(f64, &PiecewiseDensity)> = fitted.iter().map(|(d, p)| (*d, p)).collect();
    let (curve, dropped) = build_curve_from_densities(&refs, spot)?;
    println!("pillars {:?}, dropped {}", curve.pillars(), dropped.len());

    // 21-day swap, five days already observed
    let mut spec = VarSwapSpec::new(50.0, 0.04, 21);
    spec.realized_returns = vec![0.01, -0.012, 0.004, 0.0, -0.008];
    let model = varswap_price(&spec, &curve)?;

    let quote = iug(&[daily_vol; 16], spec.a);
    let replicated = replicate_from_future(&spec.realized_returns, quote, 6, 21, &spec)?;
    println!("density-implied value {model:.5}, replicated from IUG {quote:.2}: {replicated:.5}");
    Ok(())
}
