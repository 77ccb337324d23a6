//! Coarse S1 grid search for two pairs on a four-site bus.
//!
//! Pass `s2` to search the strong-field strategy instead.
use spinbus::optimize::{optimize, Range, Strategy, StrategySpec};
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(4, 2)?;
    let s2 = std::env::args().any(|a| a == "s2");
    let mut spec = StrategySpec::new(if s2 { Strategy::S2 } else { Strategy::S1 });
    spec.j0 = Range::new(0.03, 0.05, 0.01)?;
    spec.h0 = Range::new(22.0, 24.0, 1.0)?;
    spec.field_ranges = Some(vec![Range::new(0.0, 0.4, 0.05)?, Range::new(0.0, 0.3, 0.05)?]);
    spec.tau = Range::new(100.0, 500.0, 1.0)?;
    spec.refine = true;

    let r = optimize(&layout, &spec)?;
    println!("{} points evaluated, {} failed", r.landscape.len(), r.failures.len());
    let b = &r.best;
    println!(
        "best F = {:.5} at Jτ = {}  (J0 = {}, h0 = {}, h = {:?})  per pair {:?}",
        b.fidelity, b.tau, b.params.j0, b.params.h0, b.params.h, b.per_pair
    );
    Ok(())
}
