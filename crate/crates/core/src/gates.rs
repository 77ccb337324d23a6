//! Target gates, per-pair channel reconstruction and average gate
//! fidelities.
//!
//! Pair basis index `j = 2a + b` labels `|a⟩_{A_ν}|b⟩_{B_ν}`. The swap
//! `σ(j)` exchanges the two bits, so a target gate acts as
//! `G|j⟩ = e^{iφ_j}|σ(j)⟩`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::linalg::{self, apply4, hermitian_eigenvalues, Mat4, ONE, ZERO};
use crate::system::{
    binomial, encode_product_state, qubit, RegisterState, SectorBasis, SectorState, SystemLayout,
};
use crate::{Error, Result, C64};

/// Bit swap of a pair basis index.
pub const SWAP: [usize; 4] = [0, 2, 1, 3];

/// Swap amplitude below which phase calibration is refused.
pub const CALIBRATION_THRESHOLD: f64 = 0.5;

/// Imaginary residue of the fidelity sum above which it is rejected.
const IMAG_REJECT: f64 = 1e-6;

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if (2.0 * PI - y) < 1e-12 {
        0.0
    } else {
        y
    }
}

/// Signed distance between two angles, in `(-π, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Swap gate with state-dependent phases, `G|ab⟩ = e^{iφ_ab}|ba⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTarget {
    /// `[φ00, φ01, φ10, φ11]` in radians.
    pub phases: [f64; 4],
}

impl GateTarget {
    pub fn new(phases: [f64; 4]) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("gate phases must be finite"));
        }
        if phase_distance(phases[1], phases[2]).abs() > 1e-9 {
            return Err(Error::domain("mirror symmetry requires φ01 = φ10"));
        }
        Ok(Self { phases })
    }

    /// 4×4 unitary, `G[σ(j)][j] = e^{iφ_j}`.
    pub fn matrix(&self) -> Mat4 {
        let mut g = linalg::zeros4();
        for j in 0..4 {
            g[SWAP[j]][j] = C64::from_polar(1.0, self.phases[j]);
        }
        g
    }

    /// `φ00 + φ11 − φ01 − φ10` wrapped to `(-π, π]`.
    pub fn entangling_phase(&self) -> f64 {
        let p = self.phases;
        phase_distance(p[0] + p[3] - p[1] - p[2], 0.0)
    }
}

/// Phases of the ideal single-pair gate on a chain of `n` spins.
pub fn ideal_phases(n: usize) -> GateTarget {
    let n = n as f64;
    let cross = wrap_phase((n + 1.0) * PI / 2.0);
    GateTarget {
        phases: [0.0, cross, cross, wrap_phase(n * PI)],
    }
}

/// How the qubits of the other pairs are prepared when a pair channel is
/// reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectatorPolicy {
    /// Every spectator qubit in `|+⟩`.
    #[default]
    Plus,
    /// Every spectator qubit in `|0⟩`.
    Zero,
    /// Average of the channels over random pure spectator product states.
    HaarMean { samples: usize, seed: u64 },
}

impl SpectatorPolicy {
    pub fn label(&self) -> String {
        match self {
            SpectatorPolicy::Plus => "plus".into(),
            SpectatorPolicy::Zero => "zero".into(),
            SpectatorPolicy::HaarMean { samples, seed } => format!("haar-mean({samples},{seed})"),
        }
    }

    /// Spectator product states, one register assignment per sample.
    fn assignments(&self, m: usize) -> Vec<(Vec<[C64; 2]>, Vec<[C64; 2]>)> {
        match *self {
            SpectatorPolicy::Plus => vec![(vec![qubit::PLUS; m], vec![qubit::PLUS; m])],
            SpectatorPolicy::Zero => vec![(vec![qubit::ZERO; m], vec![qubit::ZERO; m])],
            SpectatorPolicy::HaarMean { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..samples.max(1))
                    .map(|_| {
                        let a = (0..m).map(|_| random_qubit(&mut rng)).collect();
                        let b = (0..m).map(|_| random_qubit(&mut rng)).collect();
                        (a, b)
                    })
                    .collect()
            }
        }
    }
}

fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let mut q = [ZERO; 2];
    for a in q.iter_mut() {
        *a = C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    }
    let n = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
    [q[0] / n, q[1] / n]
}

/// Initial states `|j⟩_ν ⊗ spectators` for every spectator sample.
pub fn pair_initial_states(
    layout: &SystemLayout,
    policy: &SpectatorPolicy,
    nu: usize,
) -> Result<Vec<[SectorState; 4]>> {
    layout.check_pair(nu)?;
    let m = layout.pair_count();
    policy
        .assignments(m)
        .into_iter()
        .map(|(a, b)| {
            let make = |j: usize| {
                let mut a = a.clone();
                let mut b = b.clone();
                a[nu - 1] = qubit::basis(j >> 1);
                b[nu - 1] = qubit::basis(j & 1);
                encode_product_state(layout, &RegisterState::new(a, b)?)
            };
            Ok([make(0)?, make(1)?, make(2)?, make(3)?])
        })
        .collect()
}

/// A two-qubit channel stored through its action on the operator basis:
/// `blocks[j][j'] = Λ[|j⟩⟨j'|]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChannel {
    pub pair: usize,
    pub time: f64,
    pub blocks: [[Mat4; 4]; 4],
}

/// `T[j][j'] = ⟨σ(j)|Λ[|j⟩⟨j'|]|σ(j')⟩`: everything a swap-type target
/// sees of a channel.
pub type TransferMatrix = [[C64; 4]; 4];

/// Deviations of a channel from the CPTP conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_choi_eigenvalue: f64,
}

impl CptpReport {
    pub fn passes(&self, tol: f64, psd_floor: f64) -> bool {
        self.trace_error <= tol && self.hermiticity_error <= tol && self.min_choi_eigenvalue >= -psd_floor
    }
}

impl PairChannel {
    pub fn identity(pair: usize) -> Self {
        Self::from_kraus(pair, 0.0, &[linalg::identity4()])
    }

    /// `Λ[X] = U X U†`.
    pub fn from_unitary(pair: usize, u: &Mat4) -> Self {
        Self::from_kraus(pair, 0.0, std::slice::from_ref(u))
    }

    /// `Λ[X] = Tr(X)·I/4`.
    pub fn depolarizing(pair: usize) -> Self {
        let mut blocks = [[linalg::zeros4(); 4]; 4];
        for (j, row) in blocks.iter_mut().enumerate() {
            for i in 0..4 {
                row[j][i][i] = C64::new(0.25, 0.0);
            }
        }
        Self { pair, time: 0.0, blocks }
    }

    /// `Λ[X] = Σ_k K_k X K_k†`.
    pub fn from_kraus(pair: usize, time: f64, kraus: &[Mat4]) -> Self {
        let mut blocks = [[linalg::zeros4(); 4]; 4];
        for (j, row) in blocks.iter_mut().enumerate() {
            for (jp, block) in row.iter_mut().enumerate() {
                for k in kraus {
                    for i in 0..4 {
                        for ip in 0..4 {
                            block[i][ip] += k[i][j] * k[ip][jp].conj();
                        }
                    }
                }
            }
        }
        Self { pair, time, blocks }
    }

    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        let mut out = linalg::zeros4();
        for j in 0..4 {
            for jp in 0..4 {
                let c = rho[j][jp];
                if c == ZERO {
                    continue;
                }
                for i in 0..4 {
                    for ip in 0..4 {
                        out[i][ip] += c * self.blocks[j][jp][i][ip];
                    }
                }
            }
        }
        out
    }

    /// Choi matrix `Σ |j⟩⟨j'| ⊗ Λ[|j⟩⟨j'|]`, entry `[(4j+i), (4j'+i')]`.
    pub fn choi(&self) -> Vec<Vec<C64>> {
        let mut c = vec![vec![ZERO; 16]; 16];
        for j in 0..4 {
            for jp in 0..4 {
                for i in 0..4 {
                    for ip in 0..4 {
                        c[4 * j + i][4 * jp + ip] = self.blocks[j][jp][i][ip];
                    }
                }
            }
        }
        c
    }

    pub fn cptp_report(&self) -> Result<CptpReport> {
        let mut trace_error: f64 = 0.0;
        let mut hermiticity_error: f64 = 0.0;
        for j in 0..4 {
            for jp in 0..4 {
                let tr = linalg::trace4(&self.blocks[j][jp]);
                let want = if j == jp { ONE } else { ZERO };
                trace_error = trace_error.max((tr - want).norm());
                let adj = linalg::dagger4(&self.blocks[jp][j]);
                hermiticity_error = hermiticity_error.max(linalg::max_abs_diff4(&self.blocks[j][jp], &adj));
            }
        }
        let choi = self.choi();
        let ev = hermitian_eigenvalues(16, |r, c| choi[r][c])?;
        Ok(CptpReport {
            trace_error,
            hermiticity_error,
            min_choi_eigenvalue: ev[0],
        })
    }

    pub fn transfer(&self) -> TransferMatrix {
        let mut t = [[ZERO; 4]; 4];
        for j in 0..4 {
            for jp in 0..4 {
                t[j][jp] = self.blocks[j][jp][SWAP[j]][SWAP[jp]];
            }
        }
        t
    }

    pub fn max_abs_diff(&self, other: &PairChannel) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..4 {
            for jp in 0..4 {
                worst = worst.max(linalg::max_abs_diff4(&self.blocks[j][jp], &other.blocks[j][jp]));
            }
        }
        worst
    }
}

/// Reads the gate phases off the swap amplitudes `⟨ba|Λ[|ab⟩⟨00|]|00⟩`.
pub fn calibrate_phases(channel: &PairChannel) -> Result<GateTarget> {
    calibrate_transfer(&channel.transfer())
}

/// Phase calibration from a transfer matrix.
pub fn calibrate_transfer(t: &TransferMatrix) -> Result<GateTarget> {
    let amps = [t[0][0], t[1][0], t[2][0], t[3][0]];
    let weakest = amps.iter().map(|a| a.norm()).fold(f64::INFINITY, f64::min);
    if weakest < CALIBRATION_THRESHOLD || !weakest.is_finite() {
        return Err(Error::Calibration {
            amplitude: weakest,
            threshold: CALIBRATION_THRESHOLD,
        });
    }
    let reference = amps[0].arg();
    let rel = |a: C64| a * C64::from_polar(1.0, -reference);
    let cross = (rel(amps[1]) / amps[1].norm() + rel(amps[2]) / amps[2].norm()).arg();
    Ok(GateTarget {
        phases: [0.0, wrap_phase(cross), wrap_phase(cross), wrap_phase(rel(amps[3]).arg())],
    })
}

/// Average gate fidelity of a channel against a target unitary, from the
/// closed form over the operator basis.
pub fn average_gate_fidelity(channel: &PairChannel, gate: &Mat4) -> Result<f64> {
    let mut acc = ZERO;
    for i in 0..4 {
        for j in 0..4 {
            let gij = gate[i][j].conj();
            if gij == ZERO {
                continue;
            }
            for ip in 0..4 {
                for jp in 0..4 {
                    acc += gij * channel.blocks[j][jp][i][ip] * gate[ip][jp];
                }
            }
        }
    }
    finish_fidelity(acc)
}

/// Same closed form restricted to a swap-type target.
pub fn transfer_fidelity(t: &TransferMatrix, gate: &GateTarget) -> Result<f64> {
    let w: Vec<C64> = gate.phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    let mut acc = ZERO;
    for j in 0..4 {
        for jp in 0..4 {
            acc += w[j].conj() * t[j][jp] * w[jp];
        }
    }
    finish_fidelity(acc)
}

fn finish_fidelity(acc: C64) -> Result<f64> {
    let f = C64::new(0.2, 0.0) + acc / 20.0;
    if f.im.abs() > IMAG_REJECT {
        return Err(Error::numerical(
            "average gate fidelity",
            format!("imaginary residue {:.3e}", f.im),
        ));
    }
    Ok(f.re)
}

/// Monte-Carlo estimate of the Haar-averaged fidelity and its standard
/// error.
pub fn haar_average_fidelity_mc(
    channel: &PairChannel,
    gate: &Mat4,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(Error::domain("at least 100 samples are required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let mut psi = [ZERO; 4];
        for a in psi.iter_mut() {
            *a = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        }
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|a| *a /= norm);
        let out = channel.apply(&linalg::outer4(&psi, &psi));
        let target = apply4(gate, &psi);
        let ot = apply4(&out, &target);
        let f: f64 = target.iter().zip(&ot).map(|(a, b)| (a.conj() * b).re).sum();
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Per-pair fidelities and their mean at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub time: f64,
    pub per_pair: Vec<f64>,
    pub mean: f64,
}

impl FidelityReport {
    pub fn from_values(time: f64, per_pair: Vec<f64>) -> Self {
        let mean = per_pair.iter().sum::<f64>() / per_pair.len().max(1) as f64;
        Self { time, per_pair, mean }
    }
}

pub fn mean_fidelity(channels: &[PairChannel], gates: &[Mat4]) -> Result<FidelityReport> {
    if channels.len() != gates.len() || channels.is_empty() {
        return Err(Error::domain(format!(
            "{} channels for {} gates",
            channels.len(),
            gates.len()
        )));
    }
    let per_pair = channels
        .iter()
        .zip(gates)
        .map(|(c, g)| average_gate_fidelity(c, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport::from_values(channels[0].time, per_pair))
}

/// How target phases are chosen when scoring a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetConvention {
    /// Phases read off each channel.
    #[default]
    Calibrated,
    /// Single-pair phases of the field-free chain.
    Ideal,
}

/// Fidelity of a transfer matrix under a target convention; a channel whose
/// phases cannot be calibrated scores against the ideal phases.
pub fn score_transfer(t: &TransferMatrix, convention: TargetConvention, chain_length: usize) -> Result<f64> {
    let gate = match convention {
        TargetConvention::Ideal => ideal_phases(chain_length),
        TargetConvention::Calibrated => match calibrate_transfer(t) {
            Ok(g) => g,
            Err(Error::Calibration { .. }) => ideal_phases(chain_length),
            Err(e) => return Err(e),
        },
    };
    transfer_fidelity(t, &gate)
}

/// Flat addressing of the register-reachable sectors, grouped by the state of
/// the other sites, for fast pair partial traces.
#[derive(Debug, Clone)]
pub struct PairIndex {
    nu: usize,
    /// Offset of each sector `k` in the flat vector.
    offsets: Vec<usize>,
    /// For every configuration of the other sites, the flat position of the
    /// four pair states (or `usize::MAX` if outside the stored sectors).
    rests: Vec<[usize; 4]>,
}

impl PairIndex {
    pub fn new(layout: &SystemLayout, nu: usize, max_k: usize) -> Result<Self> {
        layout.check_pair(nu)?;
        let n = layout.total_sites();
        let max_k = max_k.min(n);
        let mut offsets = Vec::with_capacity(max_k + 2);
        let mut acc = 0;
        for k in 0..=max_k {
            offsets.push(acc);
            acc += binomial(n, k) as usize;
        }
        offsets.push(acc);
        let mask = layout.pair_mask(nu);
        let mut rests = Vec::new();
        for k in 0..=max_k {
            let basis = SectorBasis::new(n, k)?;
            for &bits in basis.states() {
                if bits & mask != 0 {
                    continue;
                }
                let mut slots = [usize::MAX; 4];
                for (i, slot) in slots.iter_mut().enumerate() {
                    let s = bits | layout.pair_bits(nu, i);
                    let ks = s.count_ones() as usize;
                    if ks <= max_k {
                        *slot = offsets[ks] + crate::system::rank_of(s);
                    }
                }
                rests.push(slots);
            }
        }
        Ok(Self { nu, offsets, rests })
    }

    pub fn pair(&self) -> usize {
        self.nu
    }

    pub fn flat_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Copies a sector state into the flat layout.
    pub fn flatten(&self, s: &SectorState, out: &mut Vec<C64>) {
        out.clear();
        out.resize(self.flat_len(), ZERO);
        for (&k, v) in s.sectors() {
            if k + 1 < self.offsets.len() {
                out[self.offsets[k]..self.offsets[k] + v.len()].copy_from_slice(v);
            }
        }
    }

    /// `Λ[|j⟩⟨j'|]` from the evolved flat images of the four pair states.
    pub fn channel_blocks(&self, psi: [&[C64]; 4]) -> [[Mat4; 4]; 4] {
        let mut blocks = [[linalg::zeros4(); 4]; 4];
        let mut a = [[ZERO; 4]; 4];
        for slots in &self.rests {
            for (j, row) in a.iter_mut().enumerate() {
                for (i, x) in row.iter_mut().enumerate() {
                    *x = if slots[i] == usize::MAX { ZERO } else { psi[j][slots[i]] };
                }
            }
            for j in 0..4 {
                for jp in 0..4 {
                    let blk = &mut blocks[j][jp];
                    for i in 0..4 {
                        let x = a[j][i];
                        if x == ZERO {
                            continue;
                        }
                        for ip in 0..4 {
                            blk[i][ip] += x * a[jp][ip].conj();
                        }
                    }
                }
            }
        }
        blocks
    }

    /// Transfer matrix from the same evolved images.
    pub fn transfer(&self, psi: [&[C64]; 4]) -> TransferMatrix {
        let mut t = [[ZERO; 4]; 4];
        let mut w = [ZERO; 4];
        for slots in &self.rests {
            for (j, x) in w.iter_mut().enumerate() {
                let s = slots[SWAP[j]];
                *x = if s == usize::MAX { ZERO } else { psi[j][s] };
            }
            for j in 0..4 {
                if w[j] == ZERO {
                    continue;
                }
                for jp in 0..4 {
                    t[j][jp] += w[j] * w[jp].conj();
                }
            }
        }
        t
    }
}

/// Evolved pair images at one grid point, for every pair.
pub trait PairVisitor {
    fn visit(&mut self, ti: usize, index: &PairIndex, samples: &[[&[C64]; 4]]) -> Result<()>;
}

/// Evolves the pair initial states of every pair over a time grid and hands
/// their flat images to `visitor`.
pub fn sweep_pairs<V: PairVisitor>(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    times: &[f64],
    visitor: &mut V,
) -> Result<()> {
    if prop.total_sites() != layout.total_sites() {
        return Err(Error::domain("propagator and layout differ in site count"));
    }
    let m = layout.pair_count();
    let max_k = 2 * m;
    let mut states = Vec::new();
    let mut owners = Vec::new();
    let mut indices = Vec::new();
    for nu in 1..=m {
        indices.push(PairIndex::new(layout, nu, max_k)?);
        for sample in pair_initial_states(layout, policy, nu)? {
            owners.push(nu);
            states.extend(sample);
        }
    }
    let mut flat: Vec<Vec<C64>> = vec![Vec::new(); states.len()];
    prop.for_each_time(&states, times, |ti, evolved| {
        for (idx, slot) in flat.iter_mut().enumerate() {
            indices[owners[idx / 4] - 1].flatten(&evolved[idx], slot);
        }
        for (p, index) in indices.iter().enumerate() {
            let samples: Vec<[&[C64]; 4]> = owners
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == p + 1)
                .map(|(s, _)| {
                    let b = 4 * s;
                    [&flat[b][..], &flat[b + 1][..], &flat[b + 2][..], &flat[b + 3][..]]
                })
                .collect();
            visitor.visit(ti, index, &samples)?;
        }
        Ok(())
    })
}

struct ChannelCollector<'a, F> {
    times: &'a [f64],
    m: usize,
    pending: Vec<PairChannel>,
    f: F,
}

impl<F: FnMut(usize, &[PairChannel]) -> Result<()>> PairVisitor for ChannelCollector<'_, F> {
    fn visit(&mut self, ti: usize, index: &PairIndex, samples: &[[&[C64]; 4]]) -> Result<()> {
        let mut blocks = [[linalg::zeros4(); 4]; 4];
        let w = 1.0 / samples.len() as f64;
        for s in samples {
            let b = index.channel_blocks(*s);
            for j in 0..4 {
                for jp in 0..4 {
                    for i in 0..4 {
                        for ip in 0..4 {
                            blocks[j][jp][i][ip] += b[j][jp][i][ip] * w;
                        }
                    }
                }
            }
        }
        self.pending.push(PairChannel {
            pair: index.pair(),
            time: self.times[ti],
            blocks,
        });
        if self.pending.len() == self.m {
            (self.f)(ti, &self.pending)?;
            self.pending.clear();
        }
        Ok(())
    }
}

struct TransferCollector<F> {
    m: usize,
    pending: Vec<TransferMatrix>,
    f: F,
}

impl<F: FnMut(usize, &[TransferMatrix]) -> Result<()>> PairVisitor for TransferCollector<F> {
    fn visit(&mut self, ti: usize, index: &PairIndex, samples: &[[&[C64]; 4]]) -> Result<()> {
        let mut t = [[ZERO; 4]; 4];
        let w = 1.0 / samples.len() as f64;
        for s in samples {
            let x = index.transfer(*s);
            for j in 0..4 {
                for jp in 0..4 {
                    t[j][jp] += x[j][jp] * w;
                }
            }
        }
        self.pending.push(t);
        if self.pending.len() == self.m {
            (self.f)(ti, &self.pending)?;
            self.pending.clear();
        }
        Ok(())
    }
}

/// Channels of all pairs at every time of an ascending grid.
pub fn channel_series<F>(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    times: &[f64],
    f: F,
) -> Result<()>
where
    F: FnMut(usize, &[PairChannel]) -> Result<()>,
{
    let mut c = ChannelCollector {
        times,
        m: layout.pair_count(),
        pending: Vec::new(),
        f,
    };
    sweep_pairs(layout, prop, policy, times, &mut c)
}

/// Transfer matrices of all pairs at every time of an ascending grid.
pub fn transfer_series<F>(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    times: &[f64],
    f: F,
) -> Result<()>
where
    F: FnMut(usize, &[TransferMatrix]) -> Result<()>,
{
    let mut c = TransferCollector {
        m: layout.pair_count(),
        pending: Vec::new(),
        f,
    };
    sweep_pairs(layout, prop, policy, times, &mut c)
}

/// Reconstructs `Λ^ν(t)` from four evolutions and pair partial traces.
pub fn reconstruct_pair_channel(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    nu: usize,
    t: f64,
) -> Result<PairChannel> {
    layout.check_pair(nu)?;
    if prop.total_sites() != layout.total_sites() {
        return Err(Error::domain("propagator and layout differ in site count"));
    }
    let samples = pair_initial_states(layout, policy, nu)?;
    let w = 1.0 / samples.len() as f64;
    let mut blocks = [[linalg::zeros4(); 4]; 4];
    for sample in &samples {
        let evolved = sample
            .iter()
            .map(|s| prop.evolve(s, t))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..4 {
            for jp in 0..4 {
                let b = crate::system::partial_trace_pair(layout, &evolved[jp], &evolved[j], nu)?;
                for i in 0..4 {
                    for ip in 0..4 {
                        blocks[j][jp][i][ip] += b[i][ip] * w;
                    }
                }
            }
        }
    }
    Ok(PairChannel { pair: nu, time: t, blocks })
}

/// Amplitude `⟨b|_A⟨0|_ch⟨a|_B e^{-iHt}|a⟩_A|0⟩_ch|b⟩_B` for register
/// configurations given as bit masks over the pairs (bit `ν-1` = qubit ν).
pub fn register_swap_amplitude(
    layout: &SystemLayout,
    prop: &Propagator,
    a: usize,
    b: usize,
    t: f64,
) -> Result<C64> {
    let m = layout.pair_count();
    let bits = |ra: usize, rb: usize| -> u64 {
        let mut s = 0u64;
        for nu in 1..=m {
            if ra >> (nu - 1) & 1 == 1 {
                s |= 1 << layout.a_site(nu);
            }
            if rb >> (nu - 1) & 1 == 1 {
                s |= 1 << layout.b_site(nu);
            }
        }
        s
    };
    let start = SectorState::basis_state(layout.total_sites(), bits(a, b));
    let end = prop.evolve(&start, t)?;
    Ok(end.amplitude(bits(b, a)))
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(rho: &Mat4) -> f64 {
    // σy⊗σy in the basis |00⟩,|01⟩,|10⟩,|11⟩.
    let mut yy = linalg::zeros4();
    yy[0][3] = C64::new(-1.0, 0.0);
    yy[3][0] = C64::new(-1.0, 0.0);
    yy[1][2] = ONE;
    yy[2][1] = ONE;
    let mut conj = *rho;
    conj.iter_mut().flatten().for_each(|x| *x = x.conj());
    let tilde = linalg::mul4(&linalg::mul4(&yy, &conj), &yy);
    let s = linalg::psd_sqrt4(rho);
    let r = linalg::mul4(&linalg::mul4(&s, &tilde), &s);
    let mut lam: Vec<f64> = linalg::hermitian_eigenvalues4(&r)
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).max(0.0)
}
