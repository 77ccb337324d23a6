//! Gate fidelity under local dephasing on every site.
use spinbus::gates::TargetConvention;
use spinbus::hamiltonian::register_sectors;
use spinbus::noise::{gamma_curve, NoiseSpec};
use spinbus::optimize::evaluate_point;
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(4, 1)?;
    let params = HamiltonianParams::new(1.0, 0.04, 0.0, vec![0.1])?;
    let policy = SpectatorPolicy::default();
    let conv = TargetConvention::Calibrated;
    let times: Vec<f64> = (1..=2000).map(|i| i as f64 * 0.25).collect();
    let best = evaluate_point(&layout, &params, &times, &policy, conv, Method::Spectral)?;
    println!("noiseless: F = {:.5} at Jτ = {}", best.fidelity, best.tau);

    let prop = prepare_propagator(build_hamiltonian(&layout, &params, &register_sectors(&layout))?, Method::Spectral)?;
    let gammas = [1e-6, 1e-5, 1e-4, 1e-3];
    let curve = gamma_curve(&layout, &prop, &policy, best.tau, &gammas, &NoiseSpec::new(0.0)?, conv)?;
    for (g, r) in curve {
        println!("γ/J = {g:<7e} F = {:.5}", r.mean);
    }
    Ok(())
}
