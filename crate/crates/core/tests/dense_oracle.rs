//! Cross-checks against the dense reference model.

mod common;

use num_complex::Complex64 as C;
use spinbus::gates::{channel_series, ideal_phases, transfer_series, GateTarget};
use spinbus::system::qubit;
use spinbus::*;

use common::*;

fn library(model: &Model, method: Method) -> (SystemLayout, Propagator) {
    let layout = build_layout(model.n, model.m).unwrap();
    let p = HamiltonianParams::new(model.j, model.j0, model.h0, model.h.clone()).unwrap();
    let all: Vec<usize> = (0..=layout.total_sites()).collect();
    let prop = prepare_propagator(build_hamiltonian(&layout, &p, &all).unwrap(), method).unwrap();
    (layout, prop)
}

fn cases() -> Vec<Model> {
    vec![
        Model::new(3, 0.3, 0.0, vec![0.17]),
        Model::new(2, 0.45, 0.6, vec![0.2, -0.35]),
        Model::new(3, 0.25, -0.4, vec![0.11, -0.27]),
        Model::new(4, 0.2, 1.3, vec![-0.3, 0.45]),
    ]
}

#[test]
fn sector_blocks_reassemble_the_dense_hamiltonian() {
    for model in cases() {
        let dense = model.hamiltonian();
        let (layout, prop) = library(&model, Method::Spectral);
        for k in 0..=layout.total_sites() {
            let op = prop.operator(k).unwrap();
            let basis = sector_basis(&layout, k).unwrap();
            for (r, &row) in basis.states().iter().enumerate() {
                for (c, &col) in basis.states().iter().enumerate() {
                    let want = dense[row as usize][col as usize];
                    assert!(want.im.abs() < 1e-15);
                    assert!((op.get(r, c) - want.re).abs() < 1e-13, "k={k} ({row:b},{col:b})");
                }
            }
        }
        // No matrix element leaves a sector.
        for (r, row) in dense.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                if (r as u64).count_ones() != (c as u64).count_ones() {
                    assert_eq!(*x, C::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn evolution_matches_dense_propagator() {
    for model in cases() {
        let u = propagator(&model.hamiltonian(), 13.7);
        for method in [Method::Spectral, Method::Krylov] {
            let (layout, prop) = library(&model, method);
            let regs = RegisterState::new(
                (0..model.m).map(|i| if i % 2 == 0 { qubit::PLUS } else { qubit::ONE }).collect(),
                (0..model.m).map(|i| if i % 2 == 0 { qubit::MINUS } else { qubit::PLUS }).collect(),
            )
            .unwrap();
            let start = encode_product_state(&layout, &regs).unwrap();
            assert_eq!(start.to_dense(), model.product(&regs.a, &regs.b));
            let got = prop.evolve(&start, 13.7).unwrap().to_dense();
            let want = apply(&u, &start.to_dense());
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{method:?}: {err:e}");
        }
    }
}

#[test]
fn pair_channels_match_dense_partial_traces() {
    for model in cases() {
        let t = 21.5;
        let u = propagator(&model.hamiltonian(), t);
        let (layout, prop) = library(&model, Method::Spectral);
        for (policy, spectator) in [(SpectatorPolicy::Plus, qubit::PLUS), (SpectatorPolicy::Zero, qubit::ZERO)] {
            for nu in 1..=model.m {
                let want = oracle_channel(&model, &u, nu, spectator);
                let got = reconstruct_pair_channel(&layout, &prop, &policy, nu, t).unwrap();
                let mut err: f64 = 0.0;
                for j in 0..4 {
                    for jp in 0..4 {
                        for i in 0..4 {
                            for ip in 0..4 {
                                err = err.max((got.blocks[j][jp][i][ip] - want[j][jp][i][ip]).norm());
                            }
                        }
                    }
                }
                assert!(err < 1e-10, "pair {nu}: {err:e}");
                let report = got.cptp_report().unwrap();
                assert!(report.passes(1e-10, 1e-9), "{report:?}");

                for target in [ideal_phases(model.n), GateTarget::new([0.3, 1.1, 1.1, -2.0]).unwrap()] {
                    let f = average_gate_fidelity(&got, &target.matrix()).unwrap();
                    assert!((f - oracle_fidelity(&want, &target.matrix())).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn batched_series_agree_with_pointwise_reconstruction() {
    let model = Model::new(3, 0.25, -0.4, vec![0.11, -0.27]);
    let (layout, prop) = library(&model, Method::Auto);
    let times = [0.0, 3.0, 17.25, 40.0];
    let policy = SpectatorPolicy::HaarMean { samples: 3, seed: 5 };
    let mut seen = 0;
    channel_series(&layout, &prop, &policy, &times, |ti, chans| {
        for ch in chans {
            let direct = reconstruct_pair_channel(&layout, &prop, &policy, ch.pair, times[ti])?;
            assert!(ch.max_abs_diff(&direct) < 1e-12);
        }
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, times.len());
    transfer_series(&layout, &prop, &policy, &times, |ti, ts| {
        for (nu, t) in ts.iter().enumerate() {
            let direct = reconstruct_pair_channel(&layout, &prop, &policy, nu + 1, times[ti])?.transfer();
            for j in 0..4 {
                for jp in 0..4 {
                    assert!((t[j][jp] - direct[j][jp]).norm() < 1e-12);
                }
            }
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn mirror_symmetric_swap_phases() {
    // Computational spectators: the global gate is diagonal up to the swap,
    // and reflection forces Φ_ab = Φ_ba.
    let model = Model::new(3, 0.3, 0.2, vec![0.15, -0.25]);
    let (layout, prop) = library(&model, Method::Spectral);
    let t = 33.0;
    for a in 0..4usize {
        for b in 0..4usize {
            let ab = spinbus::gates::register_swap_amplitude(&layout, &prop, a, b, t).unwrap();
            let ba = spinbus::gates::register_swap_amplitude(&layout, &prop, b, a, t).unwrap();
            assert!((ab - ba).norm() < 1e-10, "{a} {b}");
        }
    }
}

/// `exp(L t)` on row-major `vec(ρ)` for
/// `L ρ = -i[H, ρ] + γ Σ_i (σᶻ_i ρ σᶻ_i − ρ)`.
fn liouvillian_flow(h: &Dense, gamma: f64, dephased: &[usize], t: f64) -> Dense {
    let d = h.len();
    let mut l = vec![vec![C::new(0.0, 0.0); d * d]; d * d];
    let i = C::new(0.0, 1.0);
    for r in 0..d {
        for c in 0..d {
            let row = r * d + c;
            for k in 0..d {
                l[row][k * d + c] += -i * h[r][k];
                l[row][r * d + k] += i * h[k][c];
            }
            let z = |s: usize, q: usize| if s >> q & 1 == 1 { 1.0 } else { -1.0 };
            let rate: f64 = dephased.iter().map(|&q| z(r, q) * z(c, q) - 1.0).sum();
            l[row][row] += gamma * rate;
        }
    }
    // exp(Lt) = exp(-i (iL) t)
    let il: Dense = l.iter().map(|r| r.iter().map(|x| i * x).collect()).collect();
    propagator(&il, t)
}

#[test]
fn dephased_channel_matches_dense_liouvillian() {
    use spinbus::noise::{noisy_pair_channel, Integrator, NoiseSpec};
    let model = Model::new(2, 0.35, 0.3, vec![0.2]);
    let (layout, prop) = library(&model, Method::Spectral);
    let (gamma, t) = (0.05, 12.5);
    let d = 1usize << model.sites;
    for include_registers in [true, false] {
        let dephased: Vec<usize> = if include_registers {
            (0..model.sites).collect()
        } else {
            (1..=model.n).map(|i| model.chain(i)).collect()
        };
        let flow = liouvillian_flow(&model.hamiltonian(), gamma, &dephased, t);
        let kets: Vec<Vec<C>> = (0..4)
            .map(|j| model.product(&[qubit::basis(j >> 1)], &[qubit::basis(j & 1)]))
            .collect();
        let (pa, pb) = (model.a(1), model.b(1));
        let mask = (1 << pa) | (1 << pb);
        let mut want = [[[[C::new(0.0, 0.0); 4]; 4]; 4]; 4];
        for j in 0..4 {
            for jp in 0..4 {
                let rho0: Vec<C> = (0..d * d).map(|x| kets[j][x / d] * kets[jp][x % d].conj()).collect();
                let rho = apply(&flow, &rho0);
                for r in 0..d {
                    let i = 2 * (r >> pa & 1) + (r >> pb & 1);
                    for ip in 0..4 {
                        let c = (r & !mask) | ((ip >> 1) << pa) | ((ip & 1) << pb);
                        want[j][jp][i][ip] += rho[r * d + c];
                    }
                }
            }
        }
        for (integrator, dt, tol) in [(Integrator::Splitting, Some(0.05), 1e-8), (Integrator::Rk4, Some(0.005), 1e-8)] {
            let mut spec = NoiseSpec::new(gamma).unwrap().with_integrator(integrator, dt);
            spec.include_registers = include_registers;
            let got = noisy_pair_channel(&layout, &prop, &SpectatorPolicy::Plus, 1, t, &spec).unwrap();
            let mut err: f64 = 0.0;
            for j in 0..4 {
                for jp in 0..4 {
                    for i in 0..4 {
                        for ip in 0..4 {
                            err = err.max((got.blocks[j][jp][i][ip] - want[j][jp][i][ip]).norm());
                        }
                    }
                }
            }
            assert!(err < tol, "{integrator:?} registers={include_registers}: {err:e}");
        }
    }
}
