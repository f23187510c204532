//! Small dense linear-algebra helpers.
//!
//! Matrices are nalgebra types throughout. Decompositions (SVD, general and
//! symmetric eigenvalue problems) are delegated to faer, whose SVD stays
//! accurate on rank-deficient inputs where nalgebra's bidiagonal iteration can
//! return factors that do not reconstruct the matrix. nalgebra is kept as a
//! fallback if faer reports non-convergence. The wrappers also normalise the
//! empty-shape corner cases so callers can treat `k = 0` and `m = 0`
//! uniformly.

use faer::{Mat, MatRef, Side};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

fn to_faer<T: Copy + nalgebra::Scalar>(m: &DMatrix<T>) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer<T: Copy + nalgebra::Scalar>(m: MatRef<'_, T>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular value decomposition with descending singular values.
///
/// `u` has `min(r, c)` columns and `v_t` has `min(r, c)` rows.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    let p = r.min(c);
    if p == 0 {
        return Svd {
            u: DMatrix::zeros(r, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, c),
        };
    }
    match to_faer(m).thin_svd() {
        Ok(dec) => Svd {
            u: from_faer(dec.U()),
            singular_values: DVector::from_fn(p, |i, _| dec.S()[i]),
            v_t: from_faer(dec.V()).transpose(),
        },
        Err(_) => {
            let dec = m.clone().svd(true, true);
            Svd {
                u: dec.u.expect("u requested"),
                singular_values: dec.singular_values,
                v_t: dec.v_t.expect("v_t requested"),
            }
        }
    }
}

/// Complex thin SVD; `v_h` is the conjugate transpose of `V`.
#[derive(Debug, Clone)]
pub struct SvdComplex {
    pub u: DMatrix<C64>,
    pub singular_values: DVector<f64>,
    pub v_h: DMatrix<C64>,
}

pub fn svd_complex(m: &DMatrix<C64>) -> SvdComplex {
    let (r, c) = m.shape();
    let p = r.min(c);
    if p == 0 {
        return SvdComplex {
            u: DMatrix::zeros(r, 0),
            singular_values: DVector::zeros(0),
            v_h: DMatrix::zeros(0, c),
        };
    }
    match to_faer(m).thin_svd() {
        Ok(dec) => SvdComplex {
            u: from_faer(dec.U()),
            singular_values: DVector::from_fn(p, |i, _| dec.S()[i].re),
            v_h: from_faer(dec.V()).adjoint(),
        },
        Err(_) => {
            let dec = m.clone().svd(true, true);
            SvdComplex {
                u: dec.u.expect("u requested"),
                singular_values: dec.singular_values,
                v_h: dec.v_t.expect("v_t requested"),
            }
        }
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    match to_faer(m).singular_values() {
        Ok(s) => DVector::from_vec(s),
        Err(_) => m.clone().svd(false, false).singular_values,
    }
}

pub fn singular_values_complex(m: &DMatrix<C64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    match to_faer(m).singular_values() {
        Ok(s) => DVector::from_vec(s),
        Err(_) => m.clone().svd(false, false).singular_values,
    }
}

/// Number of singular values strictly above `rtol * s_max` (zero if `s_max == 0`).
pub fn numerical_rank(s: &DVector<f64>, rtol: f64) -> usize {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rtol * smax).count()
}

pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    numerical_rank(&singular_values(m), rtol)
}

/// Moore-Penrose pseudoinverse discarding singular values `<= rtol * s_max`.
pub fn pinv(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let dec = svd(m);
    let k = numerical_rank(&dec.singular_values, rtol);
    let mut out = DMatrix::zeros(c, r);
    for i in 0..k {
        let s = dec.singular_values[i];
        let vi = dec.v_t.row(i).transpose();
        let ui = dec.u.column(i);
        out += (vi / s) * ui.transpose();
    }
    out
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix, ascending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    match to_faer(&sym).self_adjoint_eigen(Side::Lower) {
        Ok(dec) => (DVector::from_fn(n, |i, _| dec.S()[i]), from_faer(dec.U())),
        Err(_) => {
            let dec = sym.symmetric_eigen();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
            let values = DVector::from_fn(n, |i, _| dec.eigenvalues[idx[i]]);
            let vectors = DMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, idx[c])]);
            (values, vectors)
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in R^n.
///
/// `basis` must have orthonormal columns. The complement is read off the
/// unit eigenspace of the projector `I - P P^T`, whose spectrum is {0, 1}.
pub fn orthonormal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let k = basis.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    if k >= n {
        return DMatrix::zeros(n, 0);
    }
    let proj = DMatrix::identity(n, n) - basis * basis.transpose();
    let (_, vectors) = symmetric_eigen(&proj);
    // ascending order: the unit eigenvalues come last
    vectors.columns(k, n - k).into_owned()
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Ok(values) = to_faer(a).eigenvalues() {
        return Ok(values);
    }
    a.clone()
        .try_schur(f64::EPSILON, 10_000 * n)
        .map(|schur| schur.complex_eigenvalues().iter().cloned().collect())
        .ok_or_else(|| Error::NumericalDegeneracy("eigenvalue iteration did not converge".into()))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Largest singular value (operator 2-norm); zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetric_eigen(m).0.min()
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Row-major nested vectors, the layout used by the JSON interchange formats.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(ncols_if_empty);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
