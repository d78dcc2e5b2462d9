//! Leave-one-out fair values with bootstrap bands on a chain with one
//! inflated quote.

use pcrnd::market_data::{MarketQuote, OptionChain, Side};
use pcrnd::mispricing::{scan, MispricingConfig};
use pcrnd::synth::{log_spaced_strikes, LogNormal};

fn main() -> pcrnd::Result<()> {
    let law = LogNormal::risk_neutral(100.0, 0.0, 0.2 * 0.5f64.sqrt())?;
    let mut quotes = Vec::new();
    for k in log_spaced_strikes(&law, 2.5, 15) {
        quotes.push(MarketQuote { strike: k, side: Side::Call, price: law.call_price(k, 0.0) });
        quotes.push(MarketQuote { strike: k, side: Side::Put, price: law.put_price(k, 0.0) });
    }
    quotes[15].price *= 1.10;
    let chain = OptionChain::from_market_quotes(
        "2014-04-14".parse().unwrap(),
        "2014-10-13".parse().unwrap(),
        100.0,
        0.0,
        &quotes,
    )?;

    let report = scan(&chain, &MispricingConfig { seed: 42, ..MispricingConfig::default() })?;
    for row in &report.rows {
        let (lo, hi) = row.ci.unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:>8.3} {} market {:>8.4} loo {:>8.4} band [{:>8.4}, {:>8.4}] {}",
            row.strike,
            row.side,
            row.market,
            row.loo_fair.unwrap_or(f64::NAN),
            lo,
            hi,
            row.flag.map_or("-", |f| f.label())
        );
    }
    report.write_csv(std::io::stdout().lock())?;
    Ok(())
}
