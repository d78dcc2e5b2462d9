mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{enumerate_min, Quote};
use pcrnd::design::DesignSystem;
use pcrnd::market_data::Side;
use pcrnd::solver::{fit_observations, FitConfig, Objective, Observation};

fn random_problem(rng: &mut ChaCha8Rng, q: usize) -> (Vec<f64>, f64, f64, Vec<Quote>) {
    let mut strikes = vec![rng.random_range(80.0..100.0)];
    for _ in 1..q {
        let last = *strikes.last().unwrap();
        strikes.push(last * rng.random_range(1.01..1.15));
    }
    let c_k = rng.random_range(1.1..2.0);
    let cum_rate = rng.random_range(0.0..0.03);
    let mut quotes = Vec::new();
    for (i, &k) in strikes.iter().enumerate() {
        // prices that no density reproduces, so constraints bind
        for side in [Side::Call, Side::Put] {
            if rng.random_bool(0.85) {
                let price = rng.random_range(0.2..0.3) * k * rng.random::<f64>();
                quotes.push(Quote { strike_index: i, side, price, weight: 1.0 });
            }
        }
    }
    if quotes.is_empty() {
        quotes.push(Quote { strike_index: 0, side: Side::Call, price: 5.0, weight: 1.0 });
    }
    (strikes, c_k, cum_rate, quotes)
}

fn check(mode: Objective) {
    let mut rng = ChaCha8Rng::seed_from_u64(match mode {
        Objective::Ls => 11,
        Objective::Wls => 12,
    });
    for q in 1..=4 {
        for _ in 0..25 {
            let (strikes, c_k, cum_rate, mut quotes) = random_problem(&mut rng, q);
            if mode == Objective::Wls {
                for quote in &mut quotes {
                    quote.weight = quote.price.powi(-2);
                }
            }
            let (oracle_heights, oracle_value) = enumerate_min(&strikes, c_k, cum_rate, &quotes);

            let design = DesignSystem::from_strikes(&strikes, c_k).unwrap();
            let obs = quotes.iter().map(|qt| Observation::new(qt.strike_index, qt.side, qt.price)).collect();
            let config = FitConfig { mode, c_k, ..FitConfig::default() };
            let fit = fit_observations(&design, obs, cum_rate, &config).unwrap();

            let scale = oracle_value.max(1.0);
            assert!(
                (fit.objective - oracle_value).abs() <= 1e-10 * scale,
                "q={q} {mode:?}: solver {} vs enumeration {} strikes {strikes:?} c_k {c_k} quotes {quotes:?} oracle {oracle_heights:?} fit {:?}",
                fit.objective,
                oracle_value,
                fit.density.heights()
            );
            // prices are unique at the optimum even when heights are not
            let disc = (-cum_rate).exp();
            for qt in &quotes {
                let oracle_price =
                    disc * common::step_price_quad(&strikes, c_k, &oracle_heights, strikes[qt.strike_index], qt.side);
                let fitted = fit.fitted_price(qt.strike_index, qt.side);
                assert!((fitted - oracle_price).abs() <= 1e-7 * oracle_price.abs().max(1.0));
            }
        }
    }
}

#[test]
fn least_squares_matches_enumeration() {
    check(Objective::Ls);
}

#[test]
fn weighted_least_squares_matches_enumeration() {
    check(Objective::Wls);
}
