//! Simultaneous exchange of two register states, with the crosstalk into
//! the mirrored pair.
use spinbus::hamiltonian::register_sectors;
use spinbus::twoway::{transmission_and_crosstalk, TwoWayScenario};
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(10, 2)?;
    let params = HamiltonianParams::new(1.0, 0.04, 0.0, vec![0.2, -0.14])?;
    let prop = prepare_propagator(build_hamiltonian(&layout, &params, &register_sectors(&layout))?, Method::Auto)?;
    let times: Vec<f64> = (0..=1600).map(|i| i as f64 * 0.25).collect();
    let r = transmission_and_crosstalk(&layout, &prop, &TwoWayScenario::standard(), &times)?;
    for p in r.points.iter().step_by(80) {
        println!("Jt = {:>6.1}  transmission {:.4}  crosstalk {:.4}", p.time, p.transmission, p.crosstalk);
    }
    println!(
        "peak transmission {:.4} at Jt = {} with crosstalk {:.4}",
        r.peak.transmission, r.peak.time, r.peak.crosstalk
    );
    Ok(())
}
