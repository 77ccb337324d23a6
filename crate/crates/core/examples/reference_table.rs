//! Fidelities of the reference parameter sets at their listed gate times,
//! for each way of preparing the spectator pairs.
use spinbus::gates::{score_transfer, transfer_series, TargetConvention};
use spinbus::optimize::policy_sectors;
use spinbus::*;

struct Row {
    n: usize,
    label: &'static str,
    params: HamiltonianParams,
    tau: f64,
    expected: f64,
}

fn main() -> Result<()> {
    let s1 = |j0: f64, h: &[f64]| HamiltonianParams::new(1.0, j0, 0.0, h.to_vec());
    let s2 = |h0: f64, h: &[f64]| HamiltonianParams::new(1.0, 1.0, h0, h.to_vec());
    let rows = vec![
        Row { n: 4, label: "M=1 S1", params: s1(0.04, &[0.1])?, tau: 482.0, expected: 0.996 },
        Row { n: 4, label: "M=1 S2", params: s2(26.0, &[0.25])?, tau: 489.0, expected: 0.991 },
        Row { n: 4, label: "M=2 S1", params: s1(0.04, &[0.05, -0.15])?, tau: 458.0, expected: 0.970 },
        Row { n: 4, label: "M=2 S2", params: s2(23.0, &[0.4, -0.25])?, tau: 376.0, expected: 0.967 },
        Row { n: 5, label: "M=3 S1", params: s1(0.04, &[0.4, -0.3, 0.35])?, tau: 446.0, expected: 0.978 },
        Row { n: 5, label: "M=3 S2", params: s2(26.0, &[0.5, -1.1, 1.1])?, tau: 459.0, expected: 0.977 },
    ];
    let policies = [
        SpectatorPolicy::Plus,
        SpectatorPolicy::Zero,
        SpectatorPolicy::HaarMean { samples: 8, seed: 7 },
    ];
    print!("{:<8} {:>4} {:>6} {:>7}", "row", "N", "Jτ", "expected");
    for p in &policies {
        print!(" {:>16}", p.label());
    }
    println!();
    for row in &rows {
        let layout = build_layout(row.n, row.params.h.len())?;
        print!("{:<8} {:>4} {:>6} {:>7}", row.label, row.n, row.tau, row.expected);
        for policy in &policies {
            let ops = build_hamiltonian(&layout, &row.params, &policy_sectors(&layout, policy))?;
            let prop = prepare_propagator(ops, Method::Auto)?;
            let mut f = 0.0;
            transfer_series(&layout, &prop, policy, &[row.tau], |_, ts| {
                for t in ts {
                    f += score_transfer(t, TargetConvention::Calibrated, row.n)? / ts.len() as f64;
                }
                Ok(())
            })?;
            print!(" {f:>16.4}");
        }
        println!();
    }
    Ok(())
}
