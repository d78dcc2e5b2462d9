//! Pricing error of the grid projection of a lognormal law as the grid grows.

use pcrnd::convergence::convergence_table;
use pcrnd::synth::LogNormal;

fn main() -> pcrnd::Result<()> {
    let law = LogNormal::risk_neutral(100.0, 0.0, 0.2 * 0.5f64.sqrt())?;
    let ladder = [(10, 2.0), (20, 3.0), (40, 4.0), (80, 5.0), (160, 6.0), (320, 7.0)];
    println!("{:>5} {:>6} {:>12}", "q", "span", "mse");
    for row in convergence_table(&law, &ladder, 1.5, 0.0)? {
        println!("{:>5} {:>6.1} {:>12.4e}", row.q, row.span_sd, row.mse);
    }
    Ok(())
}
