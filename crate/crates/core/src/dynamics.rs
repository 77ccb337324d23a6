//! Unitary evolution `|Ψ(t)⟩ = e^{-iHt}|Ψ(0)⟩`, sector by sector.
//!
//! Small sectors are diagonalized once and evolved spectrally, which makes
//! long sweeps over gate durations cheap. Large sectors use a Lanczos
//! approximation of the matrix exponential with adaptive Krylov dimension.

use std::collections::BTreeMap;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::hamiltonian::SectorOperator;
use crate::linalg::{sequential, ZERO};
use crate::system::SectorState;
use crate::{Error, Result, C64};

/// Sector dimension up to which [`Method::Auto`] diagonalizes.
pub const SPECTRAL_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Krylov,
    #[default]
    Auto,
}

/// Eigensystem of one sector block.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Mat<f64>,
}

#[derive(Debug, Clone)]
enum Evolver {
    Spectral(Eigensystem),
    Krylov,
}

/// Reusable time-evolution operator for a set of sectors.
#[derive(Debug, Clone)]
pub struct Propagator {
    total_sites: usize,
    ops: BTreeMap<usize, SectorOperator>,
    evolvers: BTreeMap<usize, Evolver>,
    krylov_tol: f64,
}

/// Diagonalizes a sector block.
pub fn eigensystem(op: &SectorOperator) -> Result<Eigensystem> {
    sequential();
    let evd = op.to_dense().self_adjoint_eigen(Side::Lower).map_err(|e| {
        Error::numerical(
            format!("diagonalization of sector k={}", op.excitation_count()),
            format!("{e:?}"),
        )
    })?;
    let d = op.dim();
    Ok(Eigensystem {
        energies: (0..d).map(|i| evd.S()[i]).collect(),
        vectors: evd.U().to_owned(),
    })
}

/// Prepares a propagator for the given sector blocks.
pub fn prepare_propagator(ops: Vec<SectorOperator>, method: Method) -> Result<Propagator> {
    let total_sites = match ops.first() {
        Some(op) => op.total_sites(),
        None => return Err(Error::domain("no sector operators given")),
    };
    let mut evolvers = BTreeMap::new();
    let mut map = BTreeMap::new();
    for op in ops {
        if op.total_sites() != total_sites {
            return Err(Error::domain("sector operators from different layouts"));
        }
        let spectral = match method {
            Method::Spectral => true,
            Method::Krylov => false,
            Method::Auto => op.dim() <= SPECTRAL_LIMIT,
        };
        let ev = if spectral {
            Evolver::Spectral(eigensystem(&op)?)
        } else {
            Evolver::Krylov
        };
        evolvers.insert(op.excitation_count(), ev);
        map.insert(op.excitation_count(), op);
    }
    Ok(Propagator {
        total_sites,
        ops: map,
        evolvers,
        krylov_tol: 1e-12,
    })
}

impl Propagator {
    pub fn total_sites(&self) -> usize {
        self.total_sites
    }

    pub fn sectors(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.keys().copied()
    }

    pub fn operator(&self, k: usize) -> Option<&SectorOperator> {
        self.ops.get(&k)
    }

    /// Eigensystem of a sector prepared spectrally.
    pub fn eigensystem(&self, k: usize) -> Option<&Eigensystem> {
        match self.evolvers.get(&k) {
            Some(Evolver::Spectral(e)) => Some(e),
            _ => None,
        }
    }

    pub fn is_spectral(&self, k: usize) -> bool {
        self.eigensystem(k).is_some()
    }

    /// Per-step accuracy target of the Lanczos evolver.
    pub fn with_krylov_tolerance(mut self, tol: f64) -> Self {
        self.krylov_tol = tol;
        self
    }

    fn check(&self, s: &SectorState, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("evolution time must be ≥ 0, got {t}")));
        }
        if s.total_sites() != self.total_sites {
            return Err(Error::domain("state and propagator differ in site count"));
        }
        for (&k, v) in s.sectors() {
            if !self.ops.contains_key(&k) && v.iter().any(|a| *a != ZERO) {
                return Err(Error::domain(format!(
                    "sector k={k} is not covered by the propagator"
                )));
            }
        }
        Ok(())
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn energy(&self, s: &SectorState) -> Result<f64> {
        self.check(s, 0.0)?;
        let mut e = 0.0;
        for (k, v) in s.sectors() {
            let Some(op) = self.ops.get(k) else { continue };
            let mut hv = vec![ZERO; v.len()];
            op.apply(v, &mut hv);
            e += v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        }
        Ok(e)
    }

    /// Evolves a state to time `t`.
    pub fn evolve(&self, s: &SectorState, t: f64) -> Result<SectorState> {
        self.check(s, t)?;
        let mut out = s.clone();
        for (k, v) in out.sectors_mut().iter_mut() {
            if t == 0.0 || v.iter().all(|a| *a == ZERO) {
                continue;
            }
            match &self.evolvers[k] {
                Evolver::Spectral(es) => {
                    let mut batch = SpectralBatch::new(es, &[v.as_slice()]);
                    let mut buf = Mat::zeros(v.len(), 2);
                    batch.at(t, &mut buf);
                    for (i, a) in v.iter_mut().enumerate() {
                        *a = C64::new(buf[(i, 0)], buf[(i, 1)]);
                    }
                }
                Evolver::Krylov => {
                    *v = lanczos_evolve(&self.ops[k], v, t, self.krylov_tol)?;
                }
            }
        }
        Ok(out)
    }

    /// Evolves several states over an ascending grid of times, handing the
    /// evolved states at every grid point to `visit`.
    ///
    /// Spectral sectors are evaluated directly at each time; Lanczos sectors
    /// step from one grid point to the next.
    pub fn for_each_time<F>(&self, states: &[SectorState], times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[SectorState]) -> Result<()>,
    {
        for w in times.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::domain("time grid must be ascending"));
            }
        }
        for s in states {
            self.check(s, times.first().copied().unwrap_or(0.0))?;
        }
        let mut current: Vec<SectorState> = states.to_vec();

        // For each spectral sector, the states that populate it.
        let mut batches = Vec::new();
        for (&k, ev) in &self.evolvers {
            if let Evolver::Spectral(es) = ev {
                let members: Vec<usize> = (0..states.len())
                    .filter(|&i| {
                        states[i]
                            .sector(k)
                            .is_some_and(|v| v.iter().any(|a| *a != ZERO))
                    })
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let vecs: Vec<&[C64]> = members.iter().map(|&i| states[i].sector(k).unwrap()).collect();
                let batch = SpectralBatch::new(es, &vecs);
                let buf = Mat::zeros(es.energies.len(), 2 * members.len());
                batches.push((k, members, batch, buf));
            }
        }

        let mut prev_t = 0.0;
        for (ti, &t) in times.iter().enumerate() {
            for (k, members, batch, buf) in batches.iter_mut() {
                batch.at(t, buf);
                let m = members.len();
                for (c, &i) in members.iter().enumerate() {
                    let v = current[i].sectors_mut().get_mut(k).unwrap();
                    for (r, a) in v.iter_mut().enumerate() {
                        *a = C64::new(buf[(r, c)], buf[(r, c + m)]);
                    }
                }
            }
            let dt = t - prev_t;
            if dt > 0.0 {
                for st in current.iter_mut() {
                    for (k, v) in st.sectors_mut().iter_mut() {
                        if matches!(self.evolvers.get(k), Some(Evolver::Krylov)) && v.iter().any(|a| *a != ZERO) {
                            *v = lanczos_evolve(&self.ops[k], v, dt, self.krylov_tol)?;
                        }
                    }
                }
            }
            prev_t = t;
            visit(ti, &current)?;
        }
        Ok(())
    }
}

/// Spectral coefficients of several vectors in one sector; evaluates
/// `V e^{-iEt} Vᵀ ψ` for all of them with one matrix product.
struct SpectralBatch<'a> {
    es: &'a Eigensystem,
    /// `d × 2m`: real parts of `Vᵀψ` in the first `m` columns, imaginary
    /// parts in the last `m`.
    coef: Mat<f64>,
    phased: Mat<f64>,
}

impl<'a> SpectralBatch<'a> {
    fn new(es: &'a Eigensystem, vecs: &[&[C64]]) -> Self {
        let d = es.energies.len();
        let m = vecs.len();
        let x = Mat::<f64>::from_fn(d, 2 * m, |r, c| {
            if c < m {
                vecs[c][r].re
            } else {
                vecs[c - m][r].im
            }
        });
        let mut coef = Mat::zeros(d, 2 * m);
        matmul(&mut coef, Accum::Replace, es.vectors.transpose(), &x, 1.0, Par::Seq);
        Self {
            es,
            coef,
            phased: Mat::zeros(d, 2 * m),
        }
    }

    fn at(&mut self, t: f64, out: &mut Mat<f64>) {
        let m = self.coef.ncols() / 2;
        for (a, &e) in self.es.energies.iter().enumerate() {
            let (s, c) = (e * t).sin_cos();
            for col in 0..m {
                let re = self.coef[(a, col)];
                let im = self.coef[(a, col + m)];
                self.phased[(a, col)] = c * re + s * im;
                self.phased[(a, col + m)] = c * im - s * re;
            }
        }
        matmul(out, Accum::Replace, &self.es.vectors, &self.phased, 1.0, Par::Seq);
    }
}

const KRYLOV_MAX_DIM: usize = 40;

/// `e^{-iHt} v` by Lanczos with full reorthogonalization. The step is split
/// until the a-posteriori error estimate drops below `tol·‖v‖`.
pub fn lanczos_evolve(op: &SectorOperator, v: &[C64], t: f64, tol: f64) -> Result<Vec<C64>> {
    let (lo, hi) = op.spectral_bounds();
    let shift = 0.5 * (lo + hi);
    let half_width = (0.5 * (hi - lo)).max(1e-12);
    // Keep ‖H - shift‖·h moderate so a 40-dimensional space suffices.
    let mut steps = ((half_width * t) / 12.0).ceil().max(1.0) as usize;
    let mut out = v.to_vec();
    let mut done = 0.0;
    let mut remaining = steps;
    while remaining > 0 {
        let h = (t - done) / remaining as f64;
        match lanczos_step(op, shift, &out, h, tol)? {
            Some(next) => {
                out = next;
                done += h;
                remaining -= 1;
            }
            None => {
                steps *= 2;
                remaining *= 2;
                if steps > 1 << 24 {
                    return Err(Error::numerical(
                        format!("Lanczos evolution in sector k={}", op.excitation_count()),
                        "step size underflow",
                    ));
                }
            }
        }
    }
    Ok(out)
}

fn lanczos_step(op: &SectorOperator, shift: f64, v: &[C64], h: f64, tol: f64) -> Result<Option<Vec<C64>>> {
    sequential();
    let d = v.len();
    let beta0 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if beta0 == 0.0 || h == 0.0 {
        return Ok(Some(v.to_vec()));
    }
    let mmax = KRYLOV_MAX_DIM.min(d);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(mmax + 1);
    basis.push(v.iter().map(|a| a / beta0).collect());
    let mut alpha = Vec::with_capacity(mmax);
    let mut beta: Vec<f64> = Vec::with_capacity(mmax);
    let mut w = vec![ZERO; d];
    let global_phase = C64::from_polar(1.0, -shift * h);

    for j in 0..mmax {
        op.apply(&basis[j], &mut w);
        for (x, q) in w.iter_mut().zip(&basis[j]) {
            *x -= q * shift;
        }
        let a = basis[j]
            .iter()
            .zip(&w)
            .map(|(q, x)| (q.conj() * x).re)
            .sum::<f64>();
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c: C64 = q.iter().zip(&w).map(|(qi, xi)| qi.conj() * xi).sum();
                for (x, qi) in w.iter_mut().zip(q) {
                    *x -= qi * c;
                }
            }
        }
        let b = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let m = j + 1;
        let invariant = b < 1e-13 * (1.0 + a.abs());
        let check = invariant || m == mmax || m % 4 == 0;
        if check {
            let y = tridiag_expm(&alpha, &beta, h)?;
            let err = if invariant { 0.0 } else { b * y[m - 1].norm() };
            if err <= tol || invariant {
                let mut out = vec![ZERO; d];
                for (coef, q) in y.iter().zip(&basis) {
                    let c = coef * beta0 * global_phase;
                    for (o, qi) in out.iter_mut().zip(q) {
                        *o += qi * c;
                    }
                }
                return Ok(Some(out));
            }
            if m == mmax {
                return Ok(None);
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Ok(None)
}

/// `e^{-iTh} e_1` for a real symmetric tridiagonal `T`.
fn tridiag_expm(alpha: &[f64], beta: &[f64], h: f64) -> Result<Vec<C64>> {
    let m = alpha.len();
    let mut t = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numerical("Lanczos tridiagonal eigensolve", format!("{e:?}")))?;
    let u = evd.U();
    let mut y = vec![ZERO; m];
    for k in 0..m {
        let c = C64::from_polar(1.0, -evd.S()[k] * h) * u[(0, k)];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += c * u[(i, k)];
        }
    }
    Ok(y)
}
