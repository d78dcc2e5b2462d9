//! Out-of-sample pricing: fit on most strikes, price the rest.

use pcrnd::design::DesignSystem;
use pcrnd::market_data::{MarketQuote, Side};
use pcrnd::pricing::{error_metrics, price_at_strike, PriceReport, PricedQuote, TestSet};
use pcrnd::synth::{log_spaced_strikes, LogNormal};
use pcrnd::{fit, FitConfig, KnotGrid, OptionChain};

fn main() -> pcrnd::Result<()> {
    let spot = 100.0;
    let law = LogNormal::risk_neutral(spot, 0.0, 0.2 * 0.5f64.sqrt())?;
    let strikes = log_spaced_strikes(&law, 4.0, 50);
    let (train, test): (Vec<_>, Vec<_>) = strikes.iter().copied().enumerate().partition(|(i, _)| i % 5 != 2);

    let quotes: Vec<_> = train
        .iter()
        .flat_map(|&(_, k)| {
            [Side::Call, Side::Put].map(|side| MarketQuote {
                strike: k,
                side,
                price: match side {
                    Side::Call => law.call_price(k, 0.0),
                    Side::Put => law.put_price(k, 0.0),
                },
            })
        })
        .collect();
    let chain = OptionChain::from_market_quotes(
        "2014-04-14".parse().unwrap(),
        "2014-10-13".parse().unwrap(),
        spot,
        0.0,
        &quotes,
    )?;
    let config = FitConfig::default();
    let result = fit(&chain, &DesignSystem::new(KnotGrid::new(chain.strikes(), config.c_k)?), &config)?;

    let in_sample = PriceReport::build(&result.density, &chain, TestSet::Otm)?;
    println!("in-sample OTM: {:?}", in_sample.metrics);

    let held: Vec<PricedQuote> = test
        .iter()
        .flat_map(|&(_, k)| {
            [(Side::Call, law.call_price(k, 0.0)), (Side::Put, law.put_price(k, 0.0))].map(|(side, market)| {
                PricedQuote { strike: k, side, market, fair: price_at_strike(&result.density, k, side, 0.0) }
            })
        })
        .collect();
    let m = error_metrics(&held)?;
    println!("held-out ({} quotes): L_a {:.2e}, L_r {:.4}", held.len(), m.la, m.lr);
    for q in held.iter().take(6) {
        println!("  K {:>8.3} {} market {:>9.5} fair {:>9.5}", q.strike, q.side, q.market, q.fair);
    }
    Ok(())
}
