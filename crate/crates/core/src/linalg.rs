//! Small dense helpers shared by the modules.
//!
//! Two-qubit operators are plain `[[C64; 4]; 4]` arrays. Larger dense work
//! goes through faer, always with sequential kernels so results do not
//! depend on the size of any thread pool.

use std::sync::Once;

use faer::{Mat, Par, Side};

use crate::{Error, Result, C64};

pub type Mat4 = [[C64; 4]; 4];

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Forces faer onto sequential kernels.
pub fn sequential() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(Par::Seq));
}

pub fn zeros4() -> Mat4 {
    [[ZERO; 4]; 4]
}

pub fn identity4() -> Mat4 {
    let mut m = zeros4();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = zeros4();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn dagger4(a: &Mat4) -> Mat4 {
    let mut out = zeros4();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn trace4(a: &Mat4) -> C64 {
    (0..4).map(|i| a[i][i]).sum()
}

pub fn max_abs_diff4(a: &Mat4, b: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}

/// `U ρ U†`.
pub fn conjugate4(u: &Mat4, rho: &Mat4) -> Mat4 {
    mul4(&mul4(u, rho), &dagger4(u))
}

/// Outer product `|x⟩⟨y|`.
pub fn outer4(x: &[C64; 4], y: &[C64; 4]) -> Mat4 {
    let mut out = zeros4();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = x[i] * y[j].conj();
        }
    }
    out
}

pub fn apply4(a: &Mat4, x: &[C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += a[i][j] * x[j];
        }
    }
    out
}

pub fn to_faer(rows: usize, entry: impl Fn(usize, usize) -> C64) -> Mat<C64> {
    Mat::from_fn(rows, rows, entry)
}

/// Eigenvalues of a Hermitian matrix given by its entries, ascending. The
/// input is symmetrized first.
pub fn hermitian_eigenvalues(n: usize, entry: impl Fn(usize, usize) -> C64) -> Result<Vec<f64>> {
    sequential();
    let m = Mat::<C64>::from_fn(n, n, |i, j| (entry(i, j) + entry(j, i).conj()) * 0.5);
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numerical("hermitian eigenvalues", format!("{e:?}")))
}

pub fn hermitian_eigenvalues4(a: &Mat4) -> Vec<f64> {
    hermitian_eigenvalues(4, |i, j| a[i][j]).expect("4x4 eigendecomposition converges")
}

/// Eigenpairs of a Hermitian 4×4 matrix: ascending values, eigenvectors as
/// columns `vecs[row][col]`.
pub fn hermitian_eigen4(a: &Mat4) -> (Vec<f64>, Mat4) {
    sequential();
    let m = Mat::<C64>::from_fn(4, 4, |i, j| (a[i][j] + a[j][i].conj()) * 0.5);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .expect("4x4 eigendecomposition converges");
    let vals = (0..4).map(|i| evd.S()[i].re).collect();
    let mut vecs = zeros4();
    for (i, row) in vecs.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = evd.U()[(i, j)];
        }
    }
    (vals, vecs)
}

/// Principal square root of a positive semidefinite Hermitian 4×4 matrix;
/// small negative eigenvalues are clipped to zero.
pub fn psd_sqrt4(a: &Mat4) -> Mat4 {
    let (vals, vecs) = hermitian_eigen4(a);
    let mut out = zeros4();
    for (k, &lam) in vals.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += vecs[i][k] * vecs[j][k].conj() * s;
            }
        }
    }
    out
}
