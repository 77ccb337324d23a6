//! Site layout, excitation-number sector bases and sector-decomposed states.
//!
//! Sites are numbered `0..total_sites` in the order
//! `A_1 … A_M, chain_1 … chain_N, B_M … B_1`, so the mirror reflection of the
//! setup is the index map `s -> total_sites - 1 - s`. An occupation bitstring
//! stores site `s` in bit `s`; a set bit is an up spin `|1⟩` and the channel
//! starts in the all-zero vacuum.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::linalg::Mat4;
use crate::{Error, Result, C64};

/// Largest number of sites a bitstring can hold.
pub const MAX_SITES: usize = 63;

const NORM_TOL: f64 = 1e-10;

fn binomial_table() -> &'static [[u64; 65]; 65] {
    static TABLE: OnceLock<Box<[[u64; 65]; 65]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0u64; 65]; 65]);
        for n in 0..65 {
            t[n][0] = 1;
            for r in 1..=n {
                t[n][r] = t[n - 1][r - 1].saturating_add(t[n - 1][r]);
            }
        }
        t
    })
}

/// Binomial coefficient `C(n, r)`, zero when `r > n`.
pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n || n > 64 {
        return 0;
    }
    binomial_table()[n][r]
}

/// Rank of a bitstring among all bitstrings with the same number of set
/// bits, ordered by numeric value (combinatorial number system).
#[inline]
pub fn rank_of(mut bits: u64) -> usize {
    let t = binomial_table();
    let mut rank = 0u64;
    let mut i = 1;
    while bits != 0 {
        let p = bits.trailing_zeros() as usize;
        rank += t[p][i];
        bits &= bits - 1;
        i += 1;
    }
    rank as usize
}

/// Geometry of the registers and the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLayout {
    chain_length: usize,
    pair_count: usize,
}

impl SystemLayout {
    pub fn new(chain_length: usize, pair_count: usize) -> Result<Self> {
        if chain_length < 2 {
            return Err(Error::domain(format!(
                "chain length must be at least 2, got {chain_length}"
            )));
        }
        if pair_count < 1 {
            return Err(Error::domain("at least one register pair is required"));
        }
        if chain_length + 2 * pair_count > MAX_SITES {
            return Err(Error::domain(format!(
                "{} sites exceed the supported maximum of {MAX_SITES}",
                chain_length + 2 * pair_count
            )));
        }
        Ok(Self {
            chain_length,
            pair_count,
        })
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn total_sites(&self) -> usize {
        self.chain_length + 2 * self.pair_count
    }

    /// Site of register qubit `A_ν`, `ν` counted from 1.
    pub fn a_site(&self, nu: usize) -> usize {
        debug_assert!((1..=self.pair_count).contains(&nu));
        nu - 1
    }

    /// Site of register qubit `B_ν`, `ν` counted from 1.
    pub fn b_site(&self, nu: usize) -> usize {
        debug_assert!((1..=self.pair_count).contains(&nu));
        self.total_sites() - nu
    }

    /// Site of chain spin `i`, counted from 1.
    pub fn chain_site(&self, i: usize) -> usize {
        debug_assert!((1..=self.chain_length).contains(&i));
        self.pair_count + i - 1
    }

    /// Mirror image of a site.
    pub fn reflect(&self, site: usize) -> usize {
        self.total_sites() - 1 - site
    }

    /// Mirror image of a whole bitstring.
    pub fn reflect_bits(&self, bits: u64) -> u64 {
        let n = self.total_sites();
        let mut out = 0u64;
        let mut b = bits;
        while b != 0 {
            let p = b.trailing_zeros() as usize;
            out |= 1 << (n - 1 - p);
            b &= b - 1;
        }
        out
    }

    /// Bit mask of the two qubits of pair `ν`.
    pub fn pair_mask(&self, nu: usize) -> u64 {
        (1u64 << self.a_site(nu)) | (1u64 << self.b_site(nu))
    }

    /// Occupation bits of the pair basis state `j = 2a + b` placed on pair `ν`.
    pub fn pair_bits(&self, nu: usize, j: usize) -> u64 {
        let mut bits = 0;
        if j & 2 != 0 {
            bits |= 1 << self.a_site(nu);
        }
        if j & 1 != 0 {
            bits |= 1 << self.b_site(nu);
        }
        bits
    }

    /// Pair basis index `2a + b` read off a bitstring.
    pub fn pair_index(&self, nu: usize, bits: u64) -> usize {
        let a = (bits >> self.a_site(nu)) & 1;
        let b = (bits >> self.b_site(nu)) & 1;
        (2 * a + b) as usize
    }

    pub fn check_pair(&self, nu: usize) -> Result<()> {
        if nu == 0 || nu > self.pair_count {
            return Err(Error::domain(format!(
                "pair index {nu} outside 1..={}",
                self.pair_count
            )));
        }
        Ok(())
    }
}

/// Builds the reflection-symmetric layout for `n` chain spins and `m` pairs.
pub fn build_layout(n: usize, m: usize) -> Result<SystemLayout> {
    SystemLayout::new(n, m)
}

/// All occupation bitstrings with exactly `k` excitations, in ascending
/// numeric order; the position in the list is the dense index.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    excitation_count: usize,
    total_sites: usize,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(total_sites: usize, k: usize) -> Result<Self> {
        if k > total_sites {
            return Err(Error::domain(format!(
                "sector k={k} outside 0..={total_sites}"
            )));
        }
        let dim = binomial(total_sites, k) as usize;
        let mut states = Vec::with_capacity(dim);
        if k == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks same-weight words in increasing order.
            let mut s: u64 = (1u64 << k) - 1;
            let limit = 1u64 << total_sites;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self {
            excitation_count: k,
            total_sites,
            states,
        })
    }

    pub fn excitation_count(&self) -> usize {
        self.excitation_count
    }

    pub fn total_sites(&self) -> usize {
        self.total_sites
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    /// Bitstring at a dense index.
    pub fn decode(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Dense index of a bitstring, `None` if it is not in this sector.
    pub fn encode(&self, bits: u64) -> Option<usize> {
        if bits.count_ones() as usize != self.excitation_count
            || (self.total_sites < 64 && bits >> self.total_sites != 0)
        {
            return None;
        }
        Some(rank_of(bits))
    }
}

/// Basis of the `k`-excitation sector of a layout.
pub fn sector_basis(layout: &SystemLayout, k: usize) -> Result<SectorBasis> {
    SectorBasis::new(layout.total_sites(), k)
}

/// Single-qubit amplitudes `(amp_0, amp_1)` of every register qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterState {
    pub a: Vec<[C64; 2]>,
    pub b: Vec<[C64; 2]>,
}

impl RegisterState {
    pub fn new(a: Vec<[C64; 2]>, b: Vec<[C64; 2]>) -> Result<Self> {
        let s = Self { a, b };
        s.validate()?;
        Ok(s)
    }

    /// Every register qubit in the same state.
    pub fn uniform(m: usize, q: [C64; 2]) -> Result<Self> {
        Self::new(vec![q; m], vec![q; m])
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::domain("registers A and B differ in size"));
        }
        for (label, reg) in [("A", &self.a), ("B", &self.b)] {
            for (i, q) in reg.iter().enumerate() {
                let n = q[0].norm_sqr() + q[1].norm_sqr();
                if (n - 1.0).abs() > NORM_TOL || !n.is_finite() {
                    return Err(Error::domain(format!(
                        "qubit {label}_{} not normalized (norm² = {n})",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pair_count(&self) -> usize {
        self.a.len()
    }
}

/// Common single-qubit states.
pub mod qubit {
    use crate::C64;
    use std::f64::consts::FRAC_1_SQRT_2;

    pub const ZERO: [C64; 2] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    pub const ONE: [C64; 2] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    pub const PLUS: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)];
    pub const MINUS: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)];

    /// Computational basis state `|bit⟩`.
    pub fn basis(bit: usize) -> [C64; 2] {
        if bit == 0 {
            ZERO
        } else {
            ONE
        }
    }
}

/// A pure state stored as one amplitude vector per excitation sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    total_sites: usize,
    sectors: BTreeMap<usize, Vec<C64>>,
}

impl SectorState {
    pub fn empty(total_sites: usize) -> Self {
        Self {
            total_sites,
            sectors: BTreeMap::new(),
        }
    }

    /// A single occupation basis state.
    pub fn basis_state(total_sites: usize, bits: u64) -> Self {
        let k = bits.count_ones() as usize;
        let mut v = vec![C64::new(0.0, 0.0); binomial(total_sites, k) as usize];
        v[rank_of(bits)] = C64::new(1.0, 0.0);
        let mut sectors = BTreeMap::new();
        sectors.insert(k, v);
        Self {
            total_sites,
            sectors,
        }
    }

    pub fn from_sectors(total_sites: usize, sectors: BTreeMap<usize, Vec<C64>>) -> Result<Self> {
        for (&k, v) in &sectors {
            let dim = binomial(total_sites, k) as usize;
            if k > total_sites || v.len() != dim {
                return Err(Error::domain(format!(
                    "sector {k} has length {} but dimension {dim}",
                    v.len()
                )));
            }
        }
        Ok(Self {
            total_sites,
            sectors,
        })
    }

    pub fn total_sites(&self) -> usize {
        self.total_sites
    }

    pub fn sectors(&self) -> &BTreeMap<usize, Vec<C64>> {
        &self.sectors
    }

    pub fn sectors_mut(&mut self) -> &mut BTreeMap<usize, Vec<C64>> {
        &mut self.sectors
    }

    pub fn sector(&self, k: usize) -> Option<&[C64]> {
        self.sectors.get(&k).map(Vec::as_slice)
    }

    pub fn populated(&self) -> impl Iterator<Item = usize> + '_ {
        self.sectors.keys().copied()
    }

    /// Amplitude of an occupation bitstring.
    pub fn amplitude(&self, bits: u64) -> C64 {
        let k = bits.count_ones() as usize;
        match self.sectors.get(&k) {
            Some(v) => v[rank_of(bits)],
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn add_amplitude(&mut self, bits: u64, amp: C64) {
        let k = bits.count_ones() as usize;
        let dim = binomial(self.total_sites, k) as usize;
        let v = self
            .sectors
            .entry(k)
            .or_insert_with(|| vec![C64::new(0.0, 0.0); dim]);
        v[rank_of(bits)] += amp;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sectors
            .values()
            .flat_map(|v| v.iter())
            .map(|a| a.norm_sqr())
            .sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SectorState) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, v) in &self.sectors {
            if let Some(w) = other.sectors.get(k) {
                acc += v.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
        }
        acc
    }

    pub fn scale(&mut self, c: C64) {
        for v in self.sectors.values_mut() {
            v.iter_mut().for_each(|a| *a *= c);
        }
    }

    /// Largest entrywise distance to another state on the same sites.
    pub fn max_abs_diff(&self, other: &SectorState) -> f64 {
        let mut keys: Vec<usize> = self.populated().chain(other.populated()).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut worst: f64 = 0.0;
        for k in keys {
            match (self.sectors.get(&k), other.sectors.get(&k)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max((x - y).norm());
                    }
                }
                (Some(a), None) | (None, Some(a)) => {
                    for x in a {
                        worst = worst.max(x.norm());
                    }
                }
                (None, None) => {}
            }
        }
        worst
    }

    /// Dense `2^n` vector indexed by the occupation bitstring. Only for
    /// small systems (tests and oracles).
    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); 1usize << self.total_sites];
        for (&k, v) in &self.sectors {
            let basis = SectorBasis::new(self.total_sites, k).expect("stored sector is valid");
            for (i, &bits) in basis.states().iter().enumerate() {
                out[bits as usize] = v[i];
            }
        }
        out
    }
}

/// Register bits of a register configuration: bit `ν-1` of `config` is
/// `a_ν`, bit `M + ν - 1` is `b_ν`.
fn register_config_bits(layout: &SystemLayout, config: usize) -> u64 {
    let m = layout.pair_count();
    let mut bits = 0u64;
    for nu in 1..=m {
        if config >> (nu - 1) & 1 == 1 {
            bits |= 1 << layout.a_site(nu);
        }
        if config >> (m + nu - 1) & 1 == 1 {
            bits |= 1 << layout.b_site(nu);
        }
    }
    bits
}

/// Expands `⊗_ν|ψ_ν⟩ ⊗ |0…0⟩_ch ⊗ ⊗_ν|φ_ν⟩` into excitation sectors.
///
/// Sectors `0..=2M` are always present, even when some carry no weight.
pub fn encode_product_state(layout: &SystemLayout, regs: &RegisterState) -> Result<SectorState> {
    regs.validate()?;
    let m = layout.pair_count();
    if regs.pair_count() != m {
        return Err(Error::domain(format!(
            "register state has {} pairs, layout has {m}",
            regs.pair_count()
        )));
    }
    let n = layout.total_sites();
    let mut sectors = BTreeMap::new();
    for k in 0..=2 * m {
        sectors.insert(k, vec![C64::new(0.0, 0.0); binomial(n, k) as usize]);
    }
    for config in 0..(1usize << (2 * m)) {
        let mut amp = C64::new(1.0, 0.0);
        for nu in 0..m {
            amp *= regs.a[nu][config >> nu & 1];
            amp *= regs.b[nu][config >> (m + nu) & 1];
        }
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let bits = register_config_bits(layout, config);
        let k = bits.count_ones() as usize;
        sectors.get_mut(&k).expect("k ≤ 2M")[rank_of(bits)] = amp;
    }
    Ok(SectorState {
        total_sites: n,
        sectors,
    })
}

/// `Tr_{all but pair ν}(|ket⟩⟨bra|)` on the basis `|00⟩,|01⟩,|10⟩,|11⟩` of
/// `(A_ν, B_ν)`; entry `[i][i']` sums `ket(i, rest)·conj(bra(i', rest))`.
pub fn partial_trace_pair(
    layout: &SystemLayout,
    bra: &SectorState,
    ket: &SectorState,
    nu: usize,
) -> Result<Mat4> {
    layout.check_pair(nu)?;
    if bra.total_sites != layout.total_sites() || ket.total_sites != layout.total_sites() {
        return Err(Error::domain(
            "states and layout disagree on the number of sites",
        ));
    }
    let n = layout.total_sites();
    let mask = layout.pair_mask(nu);
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for (&k, v) in &ket.sectors {
        let basis = SectorBasis::new(n, k)?;
        for (idx, &bits) in basis.states().iter().enumerate() {
            let amp = v[idx];
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            let i = layout.pair_index(nu, bits);
            let rest = bits & !mask;
            for (ip, row) in out[i].iter_mut().enumerate() {
                let b = bra.amplitude(rest | layout.pair_bits(nu, ip));
                *row += amp * b.conj();
            }
        }
    }
    Ok(out)
}
