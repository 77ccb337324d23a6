//! Weak-coupling state transfer: one excitation crosses from A1 to B1.
use spinbus::hamiltonian::register_sectors;
use spinbus::system::qubit;
use spinbus::*;

fn main() -> Result<()> {
    let layout = build_layout(4, 1)?;
    let params = HamiltonianParams::new(1.0, 0.04, 0.0, vec![0.0])?;
    let prop = prepare_propagator(build_hamiltonian(&layout, &params, &register_sectors(&layout))?, Method::Auto)?;

    let regs = RegisterState::new(vec![qubit::ONE], vec![qubit::ZERO])?;
    let start = encode_product_state(&layout, &regs)?;
    let a = 1u64 << layout.a_site(1);
    let b = 1u64 << layout.b_site(1);

    let times: Vec<f64> = (0..=25).map(|i| i as f64 * 20.0).collect();
    println!("{:>6}  {:>8}  {:>8}", "Jt", "P(A1)", "P(B1)");
    prop.for_each_time(std::slice::from_ref(&start), &times, |ti, s| {
        let pa = s[0].amplitude(a).norm_sqr();
        let pb = s[0].amplitude(b).norm_sqr();
        println!("{:>6.1}  {pa:>8.5}  {pb:>8.5}", times[ti]);
        Ok(())
    })
}
