//! The bus Hamiltonian `H = H_ch + H_I` as real symmetric sparse blocks, one
//! per excitation sector.
//!
//! Conventions: `σ^z|1⟩ = +|1⟩`, `σ^z|0⟩ = -|0⟩`, and an XX bond
//! `c(σ^xσ^x + σ^yσ^y) = 2c(σ^+σ^- + σ^-σ^+)` moves one excitation across
//! the bond with amplitude `2c`. No constant energy shift is added.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::system::{binomial, rank_of, SectorBasis, SystemLayout};
use crate::{Error, Result, C64};

/// Couplings and fields in units of the chain coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianParams {
    /// Chain exchange coupling `J`.
    #[serde(default = "unit")]
    pub j: f64,
    /// Register–bus coupling `J_0`.
    pub j0: f64,
    /// Field on the two end spins of the chain.
    #[serde(default)]
    pub h0: f64,
    /// Field `h_ν` on both qubits of pair `ν`.
    pub h: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

impl HamiltonianParams {
    pub fn new(j: f64, j0: f64, h0: f64, h: Vec<f64>) -> Result<Self> {
        let p = Self { j, j0, h0, h };
        if !(p.j > 0.0) || !p.j.is_finite() {
            return Err(Error::domain(format!("J must be positive, got {}", p.j)));
        }
        if !p.j0.is_finite() || !p.h0.is_finite() || p.h.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("Hamiltonian parameters must be finite"));
        }
        Ok(p)
    }

    /// Weak-coupling point (`h_0 = 0`) with `J = 1`.
    pub fn weak_coupling(j0: f64, h: Vec<f64>) -> Self {
        Self {
            j: 1.0,
            j0,
            h0: 0.0,
            h,
        }
    }

    /// Strong end-field point (`J_0 = J = 1`).
    pub fn strong_field(h0: f64, h: Vec<f64>) -> Self {
        Self {
            j: 1.0,
            j0: 1.0,
            h0,
            h,
        }
    }

    pub fn validate_for(&self, layout: &SystemLayout) -> Result<()> {
        Self::new(self.j, self.j0, self.h0, self.h.clone())?;
        if self.h.len() != layout.pair_count() {
            return Err(Error::domain(format!(
                "{} pair fields given for {} pairs",
                self.h.len(),
                layout.pair_count()
            )));
        }
        Ok(())
    }
}

/// An XX bond between two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub coupling: f64,
}

/// Generic XX model on labelled sites: bonds plus a `σ^z` field per site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteModel {
    pub sites: usize,
    pub bonds: Vec<Bond>,
    pub fields: Vec<f64>,
}

impl SiteModel {
    /// Open uniform chain with no fields.
    pub fn uniform_chain(sites: usize, coupling: f64) -> Self {
        Self {
            sites,
            bonds: (0..sites.saturating_sub(1))
                .map(|i| Bond {
                    a: i,
                    b: i + 1,
                    coupling,
                })
                .collect(),
            fields: vec![0.0; sites],
        }
    }

    /// Bus and registers of a layout.
    pub fn from_layout(layout: &SystemLayout, p: &HamiltonianParams) -> Result<Self> {
        p.validate_for(layout)?;
        let n = layout.chain_length();
        let first = layout.chain_site(1);
        let last = layout.chain_site(n);
        let mut bonds = Vec::new();
        for nu in 1..=layout.pair_count() {
            bonds.push(Bond {
                a: layout.a_site(nu),
                b: first,
                coupling: p.j0,
            });
        }
        for i in 1..n {
            bonds.push(Bond {
                a: layout.chain_site(i),
                b: layout.chain_site(i + 1),
                coupling: p.j,
            });
        }
        for nu in (1..=layout.pair_count()).rev() {
            bonds.push(Bond {
                a: last,
                b: layout.b_site(nu),
                coupling: p.j0,
            });
        }
        let mut fields = vec![0.0; layout.total_sites()];
        fields[first] += p.h0;
        fields[last] += p.h0;
        for nu in 1..=layout.pair_count() {
            fields[layout.a_site(nu)] += p.h[nu - 1];
            fields[layout.b_site(nu)] += p.h[nu - 1];
        }
        Ok(Self {
            sites: layout.total_sites(),
            bonds,
            fields,
        })
    }

    /// Diagonal energy of an occupation bitstring.
    pub fn diagonal(&self, bits: u64) -> f64 {
        self.fields
            .iter()
            .enumerate()
            .map(|(s, &h)| if bits >> s & 1 == 1 { h } else { -h })
            .sum()
    }

    /// Block of the Hamiltonian in the `k`-excitation sector.
    pub fn sector_operator(&self, k: usize) -> Result<SectorOperator> {
        let basis = SectorBasis::new(self.sites, k)?;
        let dim = basis.dimension();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &bits in basis.states() {
            row.clear();
            row.push((rank_of(bits), self.diagonal(bits)));
            for bond in &self.bonds {
                let mask = (1u64 << bond.a) | (1u64 << bond.b);
                let both = bits & mask;
                if both != 0 && both != mask && bond.coupling != 0.0 {
                    row.push((rank_of(bits ^ mask), 2.0 * bond.coupling));
                }
            }
            row.sort_by_key(|e| e.0);
            // Parallel bonds between the same sites merge into one entry.
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SectorOperator {
            total_sites: self.sites,
            excitation_count: k,
            dim,
            row_ptr,
            cols,
            vals,
        })
    }
}

/// Real symmetric CSR matrix of `H` restricted to one sector; row and column
/// order follow [`SectorBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOperator {
    total_sites: usize,
    excitation_count: usize,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SectorOperator {
    pub fn total_sites(&self) -> usize {
        self.total_sites
    }

    pub fn excitation_count(&self) -> usize {
        self.excitation_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|p| v[p]).unwrap_or(0.0)
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (&j, &h) in c.iter().zip(v) {
                acc += x[j] * h;
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (c, v) = self.row(i);
            for (&j, &h) in c.iter().zip(v) {
                m[(i, j)] = h;
            }
        }
        m
    }

    /// Largest `|H_ij - H_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            let (c, v) = self.row(i);
            for (&j, &h) in c.iter().zip(v) {
                worst = worst.max((h - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Gershgorin bounds `(lo, hi)` on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let (c, v) = self.row(i);
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (&j, &h) in c.iter().zip(v) {
                if j == i {
                    diag = h;
                } else {
                    radius += h.abs();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
}

/// Sector blocks of `H` for the requested excitation counts.
pub fn build_hamiltonian(
    layout: &SystemLayout,
    p: &HamiltonianParams,
    sectors: &[usize],
) -> Result<Vec<SectorOperator>> {
    let model = SiteModel::from_layout(layout, p)?;
    sectors
        .iter()
        .map(|&k| {
            if k > layout.total_sites() {
                Err(Error::domain(format!(
                    "sector k={k} outside 0..={}",
                    layout.total_sites()
                )))
            } else {
                model.sector_operator(k)
            }
        })
        .collect()
}

/// Sectors reached from product register states: `0..=2M`.
pub fn register_sectors(layout: &SystemLayout) -> Vec<usize> {
    (0..=2 * layout.pair_count()).collect()
}

/// Total dimension of the given sectors.
pub fn sectors_dimension(layout: &SystemLayout, sectors: &[usize]) -> usize {
    sectors
        .iter()
        .map(|&k| binomial(layout.total_sites(), k) as usize)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_layout;

    /// Dense `2^n` Hamiltonian assembled from Kronecker products of Pauli
    /// matrices, indexed by occupation bitstring (bit `s` = site `s`).
    fn dense_pauli(model: &SiteModel) -> Vec<Vec<C64>> {
        let n = model.sites;
        let dim = 1usize << n;
        let zero = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        // Single-site matrices in the basis (|0⟩, |1⟩).
        let sx = [[zero, C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), zero]];
        let sy = [[zero, -i], [i, zero]];
        let sz = [[C64::new(-1.0, 0.0), zero], [zero, C64::new(1.0, 0.0)]];
        let embed = |ops: &[(usize, [[C64; 2]; 2])]| -> Vec<Vec<C64>> {
            let mut m = vec![vec![zero; dim]; dim];
            for r in 0..dim {
                for c in 0..dim {
                    let mut v = C64::new(1.0, 0.0);
                    for s in 0..n {
                        let (br, bc) = ((r >> s) & 1, (c >> s) & 1);
                        match ops.iter().find(|(site, _)| *site == s) {
                            Some((_, op)) => v *= op[br][bc],
                            None if br != bc => v = zero,
                            None => {}
                        }
                    }
                    m[r][c] = v;
                }
            }
            m
        };
        let mut h = vec![vec![zero; dim]; dim];
        let mut add = |m: Vec<Vec<C64>>, c: f64| {
            for r in 0..dim {
                for col in 0..dim {
                    h[r][col] += m[r][col] * c;
                }
            }
        };
        for b in &model.bonds {
            add(embed(&[(b.a, sx), (b.b, sx)]), b.coupling);
            add(embed(&[(b.a, sy), (b.b, sy)]), b.coupling);
        }
        for (s, &f) in model.fields.iter().enumerate() {
            add(embed(&[(s, sz)]), f);
        }
        h
    }

    fn random_params(m: usize, seed: u64) -> HamiltonianParams {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        HamiltonianParams {
            j: 1.0,
            j0: next(),
            h0: 3.0 * next(),
            h: (0..m).map(|_| next()).collect(),
        }
    }

    #[test]
    fn two_site_hopping() {
        let op = SiteModel::uniform_chain(2, 1.0).sector_operator(1).unwrap();
        let d = op.to_dense();
        assert_eq!((d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]), (0.0, 2.0, 2.0, 0.0));
    }

    #[test]
    fn two_site_end_fields_cancel_in_single_excitation() {
        let mut model = SiteModel::uniform_chain(2, 1.0);
        model.fields = vec![5.0, 5.0];
        let op = model.sector_operator(1).unwrap();
        let dense = dense_pauli(&model);
        // k = 1 states: 0b01 (rank 0) and 0b10 (rank 1).
        for (i, &bi) in [1usize, 2].iter().enumerate() {
            for (j, &bj) in [1usize, 2].iter().enumerate() {
                assert!((op.get(i, j) - dense[bi][bj].re).abs() < 1e-14);
            }
        }
        assert_eq!(op.diagonal(), vec![0.0, 0.0]);
        assert_eq!(op.get(0, 1), 2.0);
    }

    #[test]
    fn vacuum_energy() {
        let l = build_layout(5, 3).unwrap();
        let p = HamiltonianParams::new(1.0, 0.3, 2.5, vec![0.1, -0.4, 0.7]).unwrap();
        let ops = build_hamiltonian(&l, &p, &[0]).unwrap();
        let expect = -(2.0 * 2.5 + 2.0 * (0.1 - 0.4 + 0.7));
        assert!((ops[0].get(0, 0) - expect).abs() < 1e-14);
    }

    #[test]
    fn sector_blocks_match_dense_pauli_sum() {
        for (n, m) in [(2, 1), (3, 1), (4, 1), (2, 2), (4, 2), (3, 3)] {
            let l = build_layout(n, m).unwrap();
            let p = random_params(m, (n * 10 + m) as u64);
            let model = SiteModel::from_layout(&l, &p).unwrap();
            let dense = dense_pauli(&model);
            let total = l.total_sites();
            let dim = 1usize << total;
            // Dense matrix never connects different excitation numbers.
            for r in 0..dim {
                for c in 0..dim {
                    if (r as u64).count_ones() != (c as u64).count_ones() {
                        assert!(dense[r][c].norm() < 1e-14);
                    }
                }
            }
            let ops = build_hamiltonian(&l, &p, &(0..=total).collect::<Vec<_>>()).unwrap();
            for op in &ops {
                let basis = SectorBasis::new(total, op.excitation_count()).unwrap();
                for (i, &bi) in basis.states().iter().enumerate() {
                    for (j, &bj) in basis.states().iter().enumerate() {
                        let want = dense[bi as usize][bj as usize];
                        assert!(want.im.abs() < 1e-14);
                        assert!((op.get(i, j) - want.re).abs() < 1e-12, "n={n} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn hermitian_and_mirror_symmetric() {
        let l = build_layout(5, 2).unwrap();
        let p = HamiltonianParams::new(1.0, 0.04, 1.5, vec![0.35, -0.25]).unwrap();
        for op in build_hamiltonian(&l, &p, &[0, 1, 2, 3, 4]).unwrap() {
            assert!(op.max_asymmetry() < 1e-12);
            let basis = SectorBasis::new(l.total_sites(), op.excitation_count()).unwrap();
            for (i, &bi) in basis.states().iter().enumerate() {
                let ri = basis.encode(l.reflect_bits(bi)).unwrap();
                let (cols, vals) = op.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let rj = basis.encode(l.reflect_bits(basis.decode(j))).unwrap();
                    assert!((op.get(ri, rj) - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_single_excitation_spectrum() {
        // J0 = J, no fields: an open chain of n sites with hopping 2J.
        let l = build_layout(6, 1).unwrap();
        let p = HamiltonianParams::new(1.0, 1.0, 0.0, vec![0.0]).unwrap();
        let op = &build_hamiltonian(&l, &p, &[1]).unwrap()[0];
        let n = l.total_sites();
        let mut ev = op
            .to_dense()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        ev.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (1..=n)
            .map(|q| 4.0 * (q as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = build_layout(3, 2).unwrap();
        let p = HamiltonianParams::weak_coupling(0.1, vec![0.1]);
        assert!(build_hamiltonian(&l, &p, &[0]).is_err());
        let p = HamiltonianParams::weak_coupling(0.1, vec![0.1, 0.2]);
        assert!(build_hamiltonian(&l, &p, &[8]).is_err());
        assert!(HamiltonianParams::new(0.0, 0.1, 0.0, vec![]).is_err());
    }
}
