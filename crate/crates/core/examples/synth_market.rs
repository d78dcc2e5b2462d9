//! Write a synthetic market to a temporary directory and load it back.

use pcrnd::market_data::{load_chains, read_option_quotes_path, read_rate_curve_path, read_spot_series_path, QuoteFilter};
use pcrnd::synth::{synth_quotes, write_synthetic, ChainSpec, GbmWorld, OPTIONS_FILE, RATES_FILE, SPOT_FILE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pcrnd::Result<()> {
    let dir = std::env::temp_dir().join("pcrnd_synth_example");
    let world = GbmWorld {
        trade_date: "2014-04-14".parse().unwrap(),
        spot: 100.0,
        vol: 0.25,
        daily_rate: 0.01 / 365.0,
        contract_days: 10,
    };
    let path = world.simulate_path(&mut ChaCha8Rng::seed_from_u64(1))?;
    let mut quotes = Vec::new();
    for days in [30i64, 60] {
        let law = world.law(world.spot, days as f64)?;
        let spec = ChainSpec {
            trade_date: world.trade_date,
            expiry_date: world.trade_date + chrono::Duration::days(days),
            spot: world.spot,
            daily_rate: world.daily_rate,
            strikes: pcrnd::synth::log_spaced_strikes(&law, 3.0, 20),
        };
        quotes.extend(synth_quotes(&law, &spec));
    }
    let rates = pcrnd::RateCurve::flat(world.trade_date, world.contract_expiry() + chrono::Duration::days(60), world.daily_rate)?;
    write_synthetic(&dir, &quotes, &rates, &path)?;
    println!("wrote {} quotes to {}", quotes.len(), dir.display());

    let raw = read_option_quotes_path(&dir.join(OPTIONS_FILE))?;
    let rates = read_rate_curve_path(&dir.join(RATES_FILE))?;
    let spot = read_spot_series_path(&dir.join(SPOT_FILE))?;
    for ((t, e), chain) in load_chains(&raw, &rates, &spot, &QuoteFilter::default()) {
        let chain = chain?;
        println!("{t} -> {e}: {} strikes, {} calls, {} puts, R = {:.6}", chain.q(), chain.call_count(), chain.put_count(), chain.cum_rate());
    }
    Ok(())
}
