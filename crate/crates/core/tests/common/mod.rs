//! Brute-force reference model on the full `2^n` Hilbert space, built from
//! Pauli strings without any sector machinery.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use spinbus::system::qubit;

pub type Dense = Vec<Vec<C>>;

pub struct Model {
    pub n: usize,
    pub m: usize,
    pub sites: usize,
    pub j: f64,
    pub j0: f64,
    pub h0: f64,
    pub h: Vec<f64>,
}

impl Model {
    pub fn new(n: usize, j0: f64, h0: f64, h: Vec<f64>) -> Self {
        let m = h.len();
        Self { n, m, sites: n + 2 * m, j: 1.0, j0, h0, h }
    }

    // Left to right: A_1..A_M, chain, B_M..B_1.
    pub fn a(&self, nu: usize) -> usize {
        nu - 1
    }
    pub fn b(&self, nu: usize) -> usize {
        self.sites - nu
    }
    pub fn chain(&self, i: usize) -> usize {
        self.m + i - 1
    }

    pub fn hamiltonian(&self) -> Dense {
        let d = 1 << self.sites;
        let mut h = vec![vec![C::new(0.0, 0.0); d]; d];
        let mut bonds = Vec::new();
        for i in 1..self.n {
            bonds.push((self.chain(i), self.chain(i + 1), self.j));
        }
        for nu in 1..=self.m {
            bonds.push((self.a(nu), self.chain(1), self.j0));
            bonds.push((self.chain(self.n), self.b(nu), self.j0));
        }
        let mut fields = vec![0.0; self.sites];
        fields[self.chain(1)] += self.h0;
        fields[self.chain(self.n)] += self.h0;
        for nu in 1..=self.m {
            fields[self.a(nu)] += self.h[nu - 1];
            fields[self.b(nu)] += self.h[nu - 1];
        }
        for col in 0..d {
            for &(p, q, c) in &bonds {
                for pauli in ['x', 'y'] {
                    let (row, amp) = pauli_pair(col, p, q, pauli);
                    h[row][col] += amp * c;
                }
            }
            for (s, &f) in fields.iter().enumerate() {
                let z = if col >> s & 1 == 1 { 1.0 } else { -1.0 };
                h[col][col] += C::new(f * z, 0.0);
            }
        }
        h
    }

    pub fn product(&self, a: &[[C; 2]], b: &[[C; 2]]) -> Vec<C> {
        let mut per_site = vec![qubit::ZERO; self.sites];
        for nu in 1..=self.m {
            per_site[self.a(nu)] = a[nu - 1];
            per_site[self.b(nu)] = b[nu - 1];
        }
        (0..1usize << self.sites)
            .map(|s| (0..self.sites).map(|q| per_site[q][s >> q & 1]).product())
            .collect()
    }
}

/// `σ^p_i σ^p_j |col⟩ = amp |row⟩`.
pub fn pauli_pair(col: usize, i: usize, j: usize, p: char) -> (usize, C) {
    let single = |bit: usize| match p {
        'x' => C::new(1.0, 0.0),
        _ => {
            if bit == 0 {
                C::new(0.0, 1.0)
            } else {
                C::new(0.0, -1.0)
            }
        }
    };
    let amp = single(col >> i & 1) * single(col >> j & 1);
    (col ^ (1 << i) ^ (1 << j), amp)
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let d = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            let x = a[i][k];
            if x == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

/// `exp(-iHt)` by Taylor series and repeated squaring.
pub fn propagator(h: &Dense, t: f64) -> Dense {
    let d = h.len();
    let norm = h.iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    while norm * t / f64::powi(2.0, squarings) > 0.25 {
        squarings += 1;
    }
    let dt = t / f64::powi(2.0, squarings);
    let a: Dense = h.iter().map(|r| r.iter().map(|x| x * C::new(0.0, -dt)).collect()).collect();
    let mut u: Dense = (0..d).map(|i| (0..d).map(|j| C::new((i == j) as u8 as f64, 0.0)).collect()).collect();
    let mut term = u.clone();
    for k in 1..=24 {
        term = matmul(&term, &a);
        for r in term.iter_mut() {
            for x in r.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..d {
            for j in 0..d {
                u[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        u = matmul(&u, &u);
    }
    u
}

pub fn apply(u: &Dense, v: &[C]) -> Vec<C> {
    u.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `blocks[j][j'][i][i'] = ⟨i|Tr_rest(U|j⟩⟨j'|U†)|i'⟩` with plus or zero
/// spectators.
pub fn oracle_channel(model: &Model, u: &Dense, nu: usize, spectator: [C; 2]) -> [[[[C; 4]; 4]; 4]; 4] {
    let evolved: Vec<Vec<C>> = (0..4)
        .map(|j| {
            let mut a = vec![spectator; model.m];
            let mut b = vec![spectator; model.m];
            a[nu - 1] = qubit::basis(j >> 1);
            b[nu - 1] = qubit::basis(j & 1);
            apply(u, &model.product(&a, &b))
        })
        .collect();
    let (pa, pb) = (model.a(nu), model.b(nu));
    let pair_of = |s: usize| 2 * (s >> pa & 1) + (s >> pb & 1);
    let mask = (1 << pa) | (1 << pb);
    let mut out = [[[[C::new(0.0, 0.0); 4]; 4]; 4]; 4];
    for (j, kj) in evolved.iter().enumerate() {
        for (jp, kjp) in evolved.iter().enumerate() {
            for s in 0..kj.len() {
                let i = pair_of(s);
                for ip in 0..4 {
                    let sp = (s & !mask) | ((ip >> 1) << pa) | ((ip & 1) << pb);
                    out[j][jp][i][ip] += kj[s] * kjp[sp].conj();
                }
            }
        }
    }
    out
}

/// Average gate fidelity through the entanglement fidelity,
/// `F = (d F_e + 1)/(d + 1)`.
pub fn oracle_fidelity(blocks: &[[[[C; 4]; 4]; 4]; 4], g: &[[C; 4]; 4]) -> f64 {
    let mut fe = C::new(0.0, 0.0);
    for j in 0..4 {
        for jp in 0..4 {
            // ⟨j|G† B G|j'⟩
            for i in 0..4 {
                for ip in 0..4 {
                    fe += g[i][j].conj() * blocks[j][jp][i][ip] * g[ip][jp];
                }
            }
        }
    }
    fe /= 16.0;
    assert!(fe.im.abs() < 1e-12);
    (4.0 * fe.re + 1.0) / 5.0
}

