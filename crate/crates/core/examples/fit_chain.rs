//! Fit a density to a lognormal chain and inspect the certificate.

use chrono::NaiveDate;
use pcrnd::design::DesignSystem;
use pcrnd::market_data::{MarketQuote, OptionChain, Side};
use pcrnd::synth::{log_spaced_strikes, LogNormal};
use pcrnd::{fit, FitConfig, KnotGrid, Objective};

fn main() -> pcrnd::Result<()> {
    let spot = 100.0;
    let cum_rate = 0.005;
    let law = LogNormal::risk_neutral(spot, cum_rate, 0.2 * 0.25f64.sqrt())?;
    let mut quotes = Vec::new();
    for k in log_spaced_strikes(&law, 3.0, 30) {
        quotes.push(MarketQuote { strike: k, side: Side::Call, price: law.call_price(k, cum_rate) });
        quotes.push(MarketQuote { strike: k, side: Side::Put, price: law.put_price(k, cum_rate) });
    }
    let trade = NaiveDate::from_ymd_opt(2014, 4, 14).unwrap();
    let expiry = NaiveDate::from_ymd_opt(2014, 7, 14).unwrap();
    let chain = OptionChain::from_market_quotes(trade, expiry, spot, cum_rate, &quotes)?;

    for mode in [Objective::Ls, Objective::Wls] {
        let config = FitConfig { mode, ..FitConfig::default() };
        let design = DesignSystem::new(KnotGrid::new(chain.strikes(), config.c_k)?);
        let result = fit(&chain, &design, &config)?;
        let d = &result.density;
        println!(
            "{mode:?}: objective {:.3e}, kkt {:.1e}, {} iterations, {} zero heights",
            result.objective,
            result.kkt_residual,
            result.iterations,
            result.active_set.len()
        );
        println!(
            "  mass {:.12}, E log S {:.5} (true {:.5}), V log S {:.6} (true {:.6})",
            d.total_mass(),
            d.mean_log(),
            law.mean_log(),
            d.variance_log(),
            law.variance_log()
        );
    }
    Ok(())
}
