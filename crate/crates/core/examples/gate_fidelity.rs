//! Reconstructs the pair channel at a good gate time, reads off the gate
//! phases and scores it.
use spinbus::gates::{concurrence, ideal_phases, score_transfer, TargetConvention};
use spinbus::hamiltonian::register_sectors;
use spinbus::linalg::outer4;
use spinbus::optimize::evaluate_point;
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(4, 1)?;
    let params = HamiltonianParams::new(1.0, 0.04, 0.0, vec![0.1])?;
    let policy = SpectatorPolicy::default();
    let times: Vec<f64> = (1..=2000).map(|i| i as f64 * 0.25).collect();
    let best = evaluate_point(&layout, &params, &times, &policy, TargetConvention::Calibrated, Method::Auto)?;
    println!("best gate time Jτ = {}  F = {:.5}", best.tau, best.fidelity);

    let prop = prepare_propagator(build_hamiltonian(&layout, &params, &register_sectors(&layout))?, Method::Auto)?;
    let channel = reconstruct_pair_channel(&layout, &prop, &policy, 1, best.tau)?;
    let report = channel.cptp_report()?;
    println!(
        "trace error {:.1e}, hermiticity error {:.1e}, min Choi eigenvalue {:.1e}",
        report.trace_error, report.hermiticity_error, report.min_choi_eigenvalue
    );

    let target = calibrate_phases(&channel)?;
    let ideal = ideal_phases(layout.chain_length());
    println!("calibrated phases {:?}", target.phases.map(|p| (p * 1e4).round() / 1e4));
    println!("ideal phases      {:?}", ideal.phases.map(|p| (p * 1e4).round() / 1e4));
    println!("entangling phase φ00+φ11-φ01-φ10 = {:.4}", target.entangling_phase());
    println!("F (calibrated) = {:.5}", average_gate_fidelity(&channel, &target.matrix())?);
    println!(
        "F (ideal)      = {:.5}",
        score_transfer(&channel.transfer(), TargetConvention::Ideal, layout.chain_length())?
    );

    // |+⟩|+⟩ through the gate.
    let psi = [C64::new(0.5, 0.0); 4];
    let out = channel.apply(&outer4(&psi, &psi));
    println!("concurrence of Λ(|++⟩⟨++|) = {:.4}", concurrence(&out));
    Ok(())
}
