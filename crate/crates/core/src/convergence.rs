//! Pricing error of the grid projection of a reference law as the grid is
//! refined and widened.

use serde::{Deserialize, Serialize};

use crate::density::{project_density, ReferenceDensity};
use crate::design::DesignSystem;
use crate::error::{Error, Result};
use crate::synth::{log_spaced_strikes, LogNormal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub q: usize,
    pub span_sd: f64,
    pub mse: f64,
}

/// `(1/2q) [sum (C_hat - C)^2 + sum (P_hat - P)^2]` between prices of the
/// projected density and the reference at `strikes`.
pub fn projection_mse<D: ReferenceDensity + ?Sized>(
    reference: &D,
    strikes: &[f64],
    c_k: f64,
    cum_rate: f64,
) -> Result<f64> {
    let projected = project_density(reference, strikes, c_k)?;
    let design = DesignSystem::new(projected.grid().clone());
    let (puts, calls) = design.prices_for(&projected, cum_rate)?;
    let disc = (-cum_rate).exp();
    let mut sum = 0.0;
    for (i, &k) in strikes.iter().enumerate() {
        sum += (calls[i] - disc * reference.expected_call_payoff(k)).powi(2);
        sum += (puts[i] - disc * reference.expected_put_payoff(k)).powi(2);
    }
    Ok(sum / (2 * strikes.len()) as f64)
}

/// One row per `(q, span_sd)` rung, strikes log-spaced over `± span_sd`
/// deviations of `law`.
pub fn convergence_table(
    law: &LogNormal,
    ladder: &[(usize, f64)],
    c_k: f64,
    cum_rate: f64,
) -> Result<Vec<ConvergenceRow>> {
    if ladder.is_empty() {
        return Err(Error::InvalidInput("empty grid ladder".into()));
    }
    ladder
        .iter()
        .map(|&(q, span_sd)| {
            if q == 0 || !(span_sd > 0.0) {
                return Err(Error::InvalidInput(format!("ladder rung ({q}, {span_sd})")));
            }
            let strikes = log_spaced_strikes(law, span_sd, q);
            Ok(ConvergenceRow { q, span_sd, mse: projection_mse(law, &strikes, c_k, cum_rate)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{KnotGrid, PiecewiseDensity};

    #[test]
    fn exact_piecewise_reference_has_zero_error() {
        let strikes = [80.0, 95.0, 100.0, 120.0];
        let grid = KnotGrid::new(&strikes, 1.5).unwrap();
        let d = PiecewiseDensity::from_masses(grid, &[0.1, 0.2, 0.3, 0.3, 0.1]).unwrap();
        assert!(projection_mse(&d, &strikes, 1.5, 0.01).unwrap() < 1e-24);
    }

    #[test]
    fn single_rung_ladder() {
        let law = LogNormal::risk_neutral(100.0, 0.0, 0.15).unwrap();
        let rows = convergence_table(&law, &[(20, 3.0)], 1.5, 0.0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].mse > 0.0);
    }
}
