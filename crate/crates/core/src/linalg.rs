//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector};

/// Returns `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).unscale(2.0)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. The input is symmetrized first.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    assert!(a.is_square(), "hermitian_eigen needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |row, col| eig.eigenvectors[(row, order[col])]);
    (values, vectors)
}

/// One circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// I.i.d. `CN(0, variance)` vector.
pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// I.i.d. `CN(0, variance)` matrix, filled column by column.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng, variance);
        }
    }
    m
}

/// Haar-distributed `n x n` unitary matrix (QR of a Gaussian matrix with the
/// phases of `diag(R)` folded back into `Q`).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let z = complex_normal_matrix(rng, n, n, 1.0);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        let d = r[(c, c)];
        let norm = d.norm();
        if norm > 0.0 {
            let phase = d / norm;
            for row in 0..n {
                q[(row, c)] *= phase;
            }
        }
    }
    q
}

/// `||a - b||_F / ||b||_F`, or the absolute difference when `b = 0`.
pub fn frobenius_rel_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Scales row `i` of `m` by `s[i]`.
pub fn scale_rows(m: &CMatrix, s: &[f64]) -> CMatrix {
    assert_eq!(m.nrows(), s.len());
    let mut out = m.clone();
    for (i, &si) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(si);
    }
    out
}

/// Scales column `j` of `m` by `s[j]`.
pub fn scale_cols(m: &CMatrix, s: &[f64]) -> CMatrix {
    assert_eq!(m.ncols(), s.len());
    let mut out = m.clone();
    for (j, &sj) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(sj);
    }
    out
}

/// `Σ_i weights_i (q_i^H diag(d) q_i)` over the columns `q_i` of `q`, i.e.
/// `Tr(diag(d) Q diag(weights) Q^H)`.
pub fn weighted_trace(q: &CMatrix, diag: &[f64], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let quad: f64 = q
            .column(i)
            .iter()
            .zip(diag)
            .map(|(v, &d)| d * v.norm_sqr())
            .sum();
        total += quad * w;
    }
    total
}
