//! Site ordering, excitation sectors and the Hamiltonian's sparsity.
use spinbus::hamiltonian::register_sectors;
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(4, 2)?;
    println!("{} sites: A1..A2 | chain 1..4 | B2..B1", layout.total_sites());
    for nu in 1..=layout.pair_count() {
        println!("pair {nu}: A at site {}, B at site {}", layout.a_site(nu), layout.b_site(nu));
    }

    let params = HamiltonianParams::new(1.0, 0.04, 0.0, vec![0.05, -0.15])?;
    let ops = build_hamiltonian(&layout, &params, &register_sectors(&layout))?;
    for op in &ops {
        let basis = sector_basis(&layout, op.excitation_count())?;
        let (lo, hi) = op.spectral_bounds();
        println!(
            "k={}  dim={:>3}  nnz={:>4}  spectrum in [{lo:+.3}, {hi:+.3}]  first state {:0w$b}",
            op.excitation_count(),
            op.dim(),
            op.nnz(),
            basis.decode(0),
            w = layout.total_sites()
        );
    }
    Ok(())
}
