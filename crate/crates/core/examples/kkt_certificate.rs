//! Solve a problem with binding constraints and check its optimality
//! certificate, with and without a warm start.

use pcrnd::design::DesignSystem;
use pcrnd::market_data::Side;
use pcrnd::solver::{check_kkt, kkt_residual, solve, FitConfig, FitProblem, Objective, Observation};

fn main() -> pcrnd::Result<()> {
    let strikes = [80.0, 90.0, 95.0, 100.0, 105.0, 110.0, 120.0];
    let design = DesignSystem::from_strikes(&strikes, 1.4)?;
    // calls too cheap in the wings: several heights must hit zero
    let prices = [21.0, 11.5, 6.0, 2.9, 0.6, 0.05, 0.01];
    let obs: Vec<Observation> = prices.iter().enumerate().map(|(i, &p)| Observation::new(i, Side::Call, p)).collect();
    let problem = FitProblem::new(&design, obs, 0.0, Objective::Wls)?;

    let config = FitConfig::default();
    let cold = solve(&problem, &config, None)?;
    println!("cold: objective {:.6e}, zero heights {:?}, {} iterations", cold.objective, cold.active_set, cold.iterations);
    println!("      kkt {:.2e}", check_kkt(&cold, &problem));

    let warm = solve(&problem, &config, Some(cold.density.heights()))?;
    println!("warm: objective {:.6e}, {} iterations", warm.objective, warm.iterations);

    let uniform = vec![1.0 / design.grid().span(); strikes.len() + 1];
    println!("uniform density kkt residual {:.3e}", kkt_residual(&problem, &uniform));
    Ok(())
}
