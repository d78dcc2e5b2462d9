//! Raw and reduced design matrices for a small strike grid.

use pcrnd::design::DesignSystem;

fn main() -> pcrnd::Result<()> {
    let design = DesignSystem::from_strikes(&[90.0, 95.0, 100.0, 105.0, 110.0], 1.5)?;
    let grid = design.grid();
    println!("knots  {:?}", grid.knots());
    println!("widths {:?}", grid.widths());

    println!("\nraw put design (rows = strikes, cols = intervals)");
    for i in 0..design.q() {
        println!("{:>8.4?}", design.raw_put().row(i));
    }
    println!("\nraw call design");
    for i in 0..design.q() {
        println!("{:>8.4?}", design.raw_call().row(i));
    }

    // the uniform density priced both ways
    let heights = vec![1.0 / grid.span(); design.q() + 1];
    let (p_raw, c_raw) = design.raw_prices(&heights, 0.01);
    let (p_red, c_red) = design.discounted_prices(&heights[..design.q()], 0.01)?;
    println!("\nputs  raw {p_raw:.6?}\n      red {p_red:.6?}");
    println!("calls raw {c_raw:.6?}\n      red {c_red:.6?}");
    Ok(())
}
