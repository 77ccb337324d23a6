//! Dephasing dynamics of sector-blocked density operators.
//!
//! The master equation is
//! `dρ/dt = −i[H, ρ] + γ Σ_i (σ^z_i ρ σ^z_i − ρ)`. In the occupation basis
//! the dissipator multiplies entry `(s, s')` by `−2γ·d(s, s')`, where `d`
//! counts the dephased sites on which `s` and `s'` differ. Both terms keep
//! every sector block `(k, k')` to itself, so blocks evolve independently.
//!
//! Two integrators are provided. `Splitting` composes the exact unitary
//! flow (from the cached spectrum) with the exact dissipator flow in Strang
//! steps, then removes the leading error with one Richardson extrapolation.
//! `Rk4` integrates the right-hand side directly and is meant as a
//! reference on small systems.

use std::collections::BTreeMap;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::gates::{
    pair_initial_states, score_transfer, FidelityReport, PairChannel, SpectatorPolicy,
    TargetConvention,
};
use crate::linalg::{self, Mat4, ZERO};
use crate::system::{rank_of, SectorBasis, SectorState, SystemLayout};
use crate::{Error, Result, C64};

/// Allowed drift of the trace during integration.
pub const TRACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Splitting,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Dephasing rate in units of `J`.
    pub gamma: f64,
    /// Integrator step in units of `1/J`. `None` picks the integrator's
    /// default.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub integrator: Integrator,
    /// Dephase the register qubits as well as the chain.
    #[serde(default = "yes")]
    pub include_registers: bool,
}

fn yes() -> bool {
    true
}

impl NoiseSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        let s = Self {
            gamma,
            dt: None,
            integrator: Integrator::default(),
            include_registers: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_integrator(mut self, integrator: Integrator, dt: Option<f64>) -> Self {
        self.integrator = integrator;
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::domain(format!("dephasing rate must be ≥ 0, got {}", self.gamma)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::domain(format!("integrator step must be > 0, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.dt.unwrap_or(match self.integrator {
            Integrator::Splitting => 0.25,
            Integrator::Rk4 => 0.01,
        })
    }

    /// Sites subject to dephasing, as a bit mask.
    pub fn dephasing_mask(&self, layout: &SystemLayout) -> u64 {
        let all = if layout.total_sites() == 64 {
            u64::MAX
        } else {
            (1u64 << layout.total_sites()) - 1
        };
        if self.include_registers {
            all
        } else {
            (1..=layout.chain_length()).fold(0, |m, i| m | 1 << layout.chain_site(i))
        }
    }
}

/// Density operator stored as sector blocks `(k, k')` of shape
/// `dim(k) × dim(k')`; absent blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    total_sites: usize,
    blocks: BTreeMap<(usize, usize), Mat<C64>>,
}

impl DensityState {
    pub fn total_sites(&self) -> usize {
        self.total_sites
    }

    pub fn blocks(&self) -> &BTreeMap<(usize, usize), Mat<C64>> {
        &self.blocks
    }

    /// `|ket⟩⟨bra|`.
    pub fn from_outer(ket: &SectorState, bra: &SectorState) -> Result<Self> {
        if ket.total_sites() != bra.total_sites() {
            return Err(Error::domain("operands live on different site counts"));
        }
        let mut blocks = BTreeMap::new();
        let live = |s: &SectorState| -> Vec<(usize, Vec<C64>)> {
            s.sectors()
                .iter()
                .filter(|(_, v)| v.iter().any(|a| *a != ZERO))
                .map(|(&k, v)| (k, v.clone()))
                .collect()
        };
        let (kets, bras) = (live(ket), live(bra));
        for (k, x) in &kets {
            for (kp, y) in &bras {
                let (k, kp) = (*k, *kp);
                blocks.insert((k, kp), Mat::from_fn(x.len(), y.len(), |i, j| x[i] * y[j].conj()));
            }
        }
        Ok(Self {
            total_sites: ket.total_sites(),
            blocks,
        })
    }

    pub fn from_pure(s: &SectorState) -> Result<Self> {
        Self::from_outer(s, s)
    }

    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .filter(|((k, kp), _)| k == kp)
            .map(|(_, b)| (0..b.nrows()).map(|i| b[(i, i)]).sum::<C64>())
            .sum()
    }

    /// Largest entry of `ρ − ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&(k, kp), b) in &self.blocks {
            let other = self.blocks.get(&(kp, k));
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    let mirror = other.map_or(ZERO, |o| o[(j, i)].conj());
                    worst = worst.max((b[(i, j)] - mirror).norm());
                }
            }
        }
        worst
    }

    /// `Tr(ρ†ρ)`, the purity for a density matrix.
    pub fn frobenius_sqr(&self) -> f64 {
        self.blocks
            .values()
            .map(|b| {
                let mut acc = 0.0;
                for j in 0..b.ncols() {
                    for i in 0..b.nrows() {
                        acc += b[(i, j)].norm_sqr();
                    }
                }
                acc
            })
            .sum()
    }

    pub fn max_abs_diff(&self, other: &DensityState) -> f64 {
        let mut worst: f64 = 0.0;
        let keys: std::collections::BTreeSet<_> = self.blocks.keys().chain(other.blocks.keys()).collect();
        for key in keys {
            match (self.blocks.get(key), other.blocks.get(key)) {
                (Some(a), Some(b)) => {
                    for i in 0..a.nrows() {
                        for j in 0..a.ncols() {
                            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
                        }
                    }
                }
                (Some(a), None) | (None, Some(a)) => {
                    for i in 0..a.nrows() {
                        for j in 0..a.ncols() {
                            worst = worst.max(a[(i, j)].norm());
                        }
                    }
                }
                (None, None) => {}
            }
        }
        worst
    }

    /// Reduced operator on pair ν, indexed by `j = 2a + b`.
    pub fn partial_trace_pair(&self, layout: &SystemLayout, nu: usize) -> Result<Mat4> {
        layout.check_pair(nu)?;
        if layout.total_sites() != self.total_sites {
            return Err(Error::domain("layout and density operator differ in site count"));
        }
        let mask = layout.pair_mask(nu);
        let mut out = linalg::zeros4();
        for (&(k, kp), b) in &self.blocks {
            let basis = SectorBasis::new(self.total_sites, k)?;
            for (row, &s) in basis.states().iter().enumerate() {
                let rest = s & !mask;
                let i = layout.pair_index(nu, s);
                for (ip, slot) in out[i].iter_mut().enumerate() {
                    let sp = rest | layout.pair_bits(nu, ip);
                    if sp.count_ones() as usize == kp {
                        *slot += b[(row, rank_of(sp))];
                    }
                }
            }
        }
        Ok(out)
    }

    fn combine(&self, a: f64, other: &DensityState, b: f64) -> DensityState {
        let mut blocks = self.blocks.clone();
        for (key, m) in blocks.iter_mut() {
            let o = &other.blocks[key];
            *m = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * a + o[(i, j)] * b);
        }
        DensityState {
            total_sites: self.total_sites,
            blocks,
        }
    }
}

/// Occupation-basis states of every sector a density operator touches.
fn sector_states(total_sites: usize, keys: impl Iterator<Item = usize>) -> Result<BTreeMap<usize, Vec<u64>>> {
    let mut out = BTreeMap::new();
    for k in keys {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(k) {
            e.insert(SectorBasis::new(total_sites, k)?.states().to_vec());
        }
    }
    Ok(out)
}

/// Right-hand side of the master equation.
pub fn lindblad_rhs(rho: &DensityState, prop: &Propagator, gamma: f64, mask: u64) -> Result<DensityState> {
    let keys = rho.blocks.keys().flat_map(|&(k, kp)| [k, kp]);
    let states = sector_states(rho.total_sites, keys)?;
    let mut dense = BTreeMap::new();
    for &k in states.keys() {
        let op = prop
            .operator(k)
            .ok_or_else(|| Error::domain(format!("no Hamiltonian block for sector {k}")))?;
        let h = op.to_dense();
        dense.insert(k, Mat::<C64>::from_fn(h.nrows(), h.ncols(), |i, j| C64::new(h[(i, j)], 0.0)));
    }
    let mut blocks = BTreeMap::new();
    for (&(k, kp), b) in &rho.blocks {
        let comm = &dense[&k] * b - b * &dense[&kp];
        let (sk, skp) = (&states[&k], &states[&kp]);
        let out = Mat::from_fn(b.nrows(), b.ncols(), |i, j| {
            let d = ((sk[i] ^ skp[j]) & mask).count_ones() as f64;
            C64::new(comm[(i, j)].im, -comm[(i, j)].re) + b[(i, j)] * (-2.0 * gamma * d)
        });
        blocks.insert((k, kp), out);
    }
    Ok(DensityState {
        total_sites: rho.total_sites,
        blocks,
    })
}

/// Precomputed exact sub-flows for the splitting integrator.
struct SplitFlows {
    /// `U_k(h)` for the full and half step.
    full: BTreeMap<usize, Mat<C64>>,
    half: BTreeMap<usize, Mat<C64>>,
    states: BTreeMap<usize, Vec<u64>>,
}

fn spectral_unitary(prop: &Propagator, k: usize, h: f64) -> Result<Mat<C64>> {
    let es = prop.eigensystem(k).ok_or_else(|| {
        Error::numerical(
            "dephasing dynamics",
            format!("sector {k} has no cached spectrum; use the spectral method"),
        )
    })?;
    let v = &es.vectors;
    let d = v.nrows();
    let vc = Mat::<C64>::from_fn(d, d, |i, j| C64::new(v[(i, j)], 0.0));
    let vp = Mat::<C64>::from_fn(d, d, |i, j| vc[(i, j)] * C64::from_polar(1.0, -es.energies[j] * h));
    Ok(&vp * vc.transpose())
}

impl SplitFlows {
    fn new(prop: &Propagator, sectors: &[usize], h: f64, total_sites: usize) -> Result<Self> {
        let mut full = BTreeMap::new();
        let mut half = BTreeMap::new();
        for &k in sectors {
            full.insert(k, spectral_unitary(prop, k, h)?);
            half.insert(k, spectral_unitary(prop, k, h / 2.0)?);
        }
        Ok(Self {
            full,
            half,
            states: sector_states(total_sites, sectors.iter().copied())?,
        })
    }

    fn dephase(&self, key: (usize, usize), b: &mut Mat<C64>, factors: &[f64], mask: u64) {
        let (sk, skp) = (&self.states[&key.0], &self.states[&key.1]);
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                let d = ((sk[i] ^ skp[j]) & mask).count_ones() as usize;
                if d > 0 {
                    b[(i, j)] *= factors[d];
                }
            }
        }
    }

    /// `n` Strang steps `D(h/2) U(h) D(h/2)` of one block, with the inner
    /// dissipator halves merged.
    fn strang(&self, key: (usize, usize), b: &Mat<C64>, n: usize, h: f64, use_half: bool, gamma: f64, mask: u64, sites: usize) -> Mat<C64> {
        let (uk, ukp) = if use_half {
            (&self.half[&key.0], &self.half[&key.1])
        } else {
            (&self.full[&key.0], &self.full[&key.1])
        };
        let table = |tau: f64| -> Vec<f64> { (0..=sites).map(|d| (-2.0 * gamma * d as f64 * tau).exp()).collect() };
        let half_d = table(h / 2.0);
        let full_d = table(h);
        let mut x = b.clone();
        self.dephase(key, &mut x, &half_d, mask);
        for step in 0..n {
            x = uk * &x * ukp.adjoint();
            let last = step + 1 == n;
            self.dephase(key, &mut x, if last { &half_d } else { &full_d }, mask);
        }
        x
    }
}

fn check_drift(rho0: &DensityState, rho: &DensityState, context: &str) -> Result<()> {
    let drift = (rho.trace() - rho0.trace()).norm();
    if !(drift <= TRACE_TOLERANCE) {
        return Err(Error::numerical(
            context,
            format!("trace drift {drift:.3e} exceeds {TRACE_TOLERANCE:.0e}; reduce dt"),
        ));
    }
    Ok(())
}

/// Integrates the master equation from `rho0` to time `t`.
pub fn evolve_lindblad(rho0: &DensityState, prop: &Propagator, spec: &NoiseSpec, mask: u64, t: f64) -> Result<DensityState> {
    spec.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("evolution time must be ≥ 0, got {t}")));
    }
    if rho0.total_sites != prop.total_sites() {
        return Err(Error::domain("density operator and propagator differ in site count"));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let out = match spec.integrator {
        Integrator::Splitting => {
            let sectors: Vec<usize> = rho0
                .blocks
                .keys()
                .flat_map(|&(k, kp)| [k, kp])
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let n = (t / spec.step()).ceil().max(1.0) as usize;
            let h = t / n as f64;
            let flows = SplitFlows::new(prop, &sectors, h, rho0.total_sites)?;
            splitting(rho0, &flows, n, h, spec.gamma, mask)
        }
        Integrator::Rk4 => rk4(rho0, prop, spec, mask, t)?,
    };
    check_drift(rho0, &out, "dephasing dynamics")?;
    Ok(out)
}

fn splitting(rho0: &DensityState, flows: &SplitFlows, n: usize, h: f64, gamma: f64, mask: u64) -> DensityState {
    let sites = rho0.total_sites;
    let mut blocks = BTreeMap::new();
    for (&key, b) in &rho0.blocks {
        let coarse = flows.strang(key, b, n, h, false, gamma, mask, sites);
        let fine = flows.strang(key, b, 2 * n, h / 2.0, true, gamma, mask, sites);
        // Strang error is even in h, so this cancels the h² term.
        let m = Mat::from_fn(b.nrows(), b.ncols(), |i, j| (fine[(i, j)] * 4.0 - coarse[(i, j)]) / 3.0);
        blocks.insert(key, m);
    }
    DensityState {
        total_sites: sites,
        blocks,
    }
}

fn rk4(rho0: &DensityState, prop: &Propagator, spec: &NoiseSpec, mask: u64, t: f64) -> Result<DensityState> {
    let mut dt = spec.step();
    for _ in 0..12 {
        let n = (t / dt).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut rho = rho0.clone();
        let mut stable = true;
        let mut norm = rho.frobenius_sqr();
        for _ in 0..n {
            let k1 = lindblad_rhs(&rho, prop, spec.gamma, mask)?;
            let k2 = lindblad_rhs(&rho.combine(1.0, &k1, h / 2.0), prop, spec.gamma, mask)?;
            let k3 = lindblad_rhs(&rho.combine(1.0, &k2, h / 2.0), prop, spec.gamma, mask)?;
            let k4 = lindblad_rhs(&rho.combine(1.0, &k3, h), prop, spec.gamma, mask)?;
            let inc = k1.combine(1.0, &k2, 2.0).combine(1.0, &k3.combine(2.0, &k4, 1.0), 1.0);
            rho = rho.combine(1.0, &inc, h / 6.0);
            // Dephasing is unital: the Frobenius norm cannot grow.
            let next = rho.frobenius_sqr();
            if !(next <= norm * (1.0 + 1e-8) + 1e-14) || (rho.trace() - rho0.trace()).norm() > TRACE_TOLERANCE {
                stable = false;
                break;
            }
            norm = next;
        }
        if stable {
            return Ok(rho);
        }
        dt /= 2.0;
    }
    Err(Error::numerical("dephasing dynamics", "RK4 did not stabilise after 12 step halvings"))
}

/// Channel on pair ν under dephasing, from the 16 evolved operators
/// `|Ψ_j⟩⟨Ψ_j'|`.
pub fn noisy_pair_channel(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    nu: usize,
    t: f64,
    spec: &NoiseSpec,
) -> Result<PairChannel> {
    spec.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("evolution time must be ≥ 0, got {t}")));
    }
    let mask = spec.dephasing_mask(layout);
    let samples = pair_initial_states(layout, policy, nu)?;
    let w = 1.0 / samples.len() as f64;
    let pairs: Vec<(usize, usize, usize)> = (0..samples.len())
        .flat_map(|s| (0..4).flat_map(move |j| (j..4).map(move |jp| (s, j, jp))))
        .collect();
    let flows = match spec.integrator {
        Integrator::Splitting if t > 0.0 => {
            let n = (t / spec.step()).ceil().max(1.0) as usize;
            let h = t / n as f64;
            let sectors: Vec<usize> = samples
                .iter()
                .flatten()
                .flat_map(|st| st.sectors().iter().filter(|(_, v)| v.iter().any(|a| *a != ZERO)).map(|(&k, _)| k))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            Some((SplitFlows::new(prop, &sectors, h, layout.total_sites())?, n, h))
        }
        _ => None,
    };
    let reduced: Vec<Mat4> = pairs
        .par_iter()
        .map(|&(s, j, jp)| {
            let rho0 = DensityState::from_outer(&samples[s][j], &samples[s][jp])?;
            let rho = match &flows {
                Some((f, n, h)) => {
                    let r = splitting(&rho0, f, *n, *h, spec.gamma, mask);
                    check_drift(&rho0, &r, "dephasing dynamics")?;
                    r
                }
                None => evolve_lindblad(&rho0, prop, spec, mask, t)?,
            };
            rho.partial_trace_pair(layout, nu)
        })
        .collect::<Result<_>>()?;
    let mut blocks = [[linalg::zeros4(); 4]; 4];
    for (&(_, j, jp), r) in pairs.iter().zip(&reduced) {
        for i in 0..4 {
            for ip in 0..4 {
                blocks[j][jp][i][ip] += r[i][ip] * w;
                if j != jp {
                    blocks[jp][j][ip][i] += r[i][ip].conj() * w;
                }
            }
        }
    }
    Ok(PairChannel { pair: nu, time: t, blocks })
}

/// Per-pair fidelities at time `t` under dephasing.
pub fn noisy_mean_fidelity(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    t: f64,
    spec: &NoiseSpec,
    convention: TargetConvention,
) -> Result<FidelityReport> {
    let per_pair = (1..=layout.pair_count())
        .map(|nu| {
            let ch = noisy_pair_channel(layout, prop, policy, nu, t, spec)?;
            score_transfer(&ch.transfer(), convention, layout.chain_length())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport::from_values(t, per_pair))
}

/// Fidelity at fixed `t` for each dephasing rate in `gammas`.
pub fn gamma_curve(
    layout: &SystemLayout,
    prop: &Propagator,
    policy: &SpectatorPolicy,
    t: f64,
    gammas: &[f64],
    base: &NoiseSpec,
    convention: TargetConvention,
) -> Result<Vec<(f64, FidelityReport)>> {
    gammas
        .iter()
        .map(|&g| {
            let spec = NoiseSpec { gamma: g, ..*base };
            Ok((g, noisy_mean_fidelity(layout, prop, policy, t, &spec, convention)?))
        })
        .collect()
}
