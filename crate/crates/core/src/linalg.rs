//! Small shared helpers on complex Hermitian matrices.

use num_complex::Complex64;

use crate::{CMatrix, CVector};

/// Eigen-decomposition of a Hermitian matrix: `(eigenvalues, eigenvectors)`
/// with eigenvectors in columns, same order as the eigenvalues.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let se = m.clone().symmetric_eigen();
    (se.eigenvalues.iter().cloned().collect(), se.eigenvectors)
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub(crate) fn top_eigpair(m: &CMatrix) -> (f64, CVector) {
    let (vals, vecs) = hermitian_eigen(m);
    let (idx, &val) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty matrix");
    (val, vecs.column(idx).into_owned())
}

/// `M^(-1/2)` of a Hermitian positive-definite matrix; `None` if any
/// eigenvalue is not strictly positive.
pub(crate) fn inv_sqrt(m: &CMatrix) -> Option<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    if vals.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (i, &v) in vals.iter().enumerate() {
        let u = vecs.column(i);
        let s = Complex64::new(1.0 / v.sqrt(), 0.0);
        out += (u * u.adjoint()).map(|e| e * s);
    }
    Some(out)
}

/// Minimum-norm solution `B† x` for Hermitian PSD `B`, dropping eigenvalues
/// below `cutoff_rel · λ_max`.
pub(crate) fn pinv_apply(b: &CMatrix, x: &CVector, cutoff_rel: f64) -> CVector {
    let (vals, vecs) = hermitian_eigen(b);
    let lmax = vals.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = cutoff_rel * lmax;
    let mut out = CVector::zeros(x.len());
    for (i, &v) in vals.iter().enumerate() {
        if v > cutoff && v > 0.0 {
            let u = vecs.column(i);
            let c = u.dotc(x) / Complex64::new(v, 0.0);
            out += u.map(|e| e * c);
        }
    }
    out
}

/// Rotate a complex vector by a global phase so its first non-negligible
/// entry is real and positive; keeps regression comparisons deterministic.
pub fn canonicalize_phase(v: &CVector) -> CVector {
    let max_abs = v.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    if max_abs == 0.0 {
        return v.clone();
    }
    let pivot = v.iter().find(|e| e.norm() > 1e-14 * max_abs);
    match pivot {
        Some(p) => {
            let rot = Complex64::from_polar(1.0, -p.arg());
            v.map(|e| e * rot)
        }
        None => v.clone(),
    }
}
