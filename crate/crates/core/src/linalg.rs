//! Dense complex linear algebra helpers shared by all modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sjcalc::csqrt;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Maximum modulus of the entries.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Induced infinity norm (maximum absolute row sum).
pub fn norm_inf(m: &CMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Bilinear square `v^T v` (no conjugation).
pub fn bsq(v: &CVector) -> C64 {
    v.dot(v)
}

/// A vector as an `n x 1` matrix.
pub fn as_col(v: &CVector) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn unit(n: usize, k: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[k] = r(1.0);
    e
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn inverse(m: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::Singular(what))?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular(what));
    }
    Ok(inv)
}

pub fn solve(m: &CMatrix, b: &CVector, what: &'static str) -> Result<CVector> {
    m.clone().lu().solve(b).ok_or(Error::Singular(what))
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let nrm = norm_inf(a);
    let mut s = 0u32;
    if nrm > 0.5 {
        s = (nrm / 0.5).log2().ceil() as u32;
    }
    let scaled = a / r(2f64.powi(s as i32));
    let mut term = eye(n);
    let mut acc = eye(n);
    for k in 1..=20 {
        term = &term * &scaled / r(k as f64);
        acc += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

/// Primary square root through a complex Schur form, with [`csqrt`] on the diagonal.
///
/// Used only for matrices that do not arrive with an SJ decomposition.
pub fn sqrtm_dense(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if is_diagonal(a) {
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = csqrt(a[(i, i)])?;
        }
        return Ok(out);
    }
    let (q, t) = nalgebra::Schur::new(a.clone()).unpack();
    let mut u = CMatrix::zeros(n, n);
    for i in 0..n {
        u[(i, i)] = csqrt(t[(i, i)])?;
    }
    for j in 1..n {
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= u[(i, k)] * u[(k, j)];
            }
            let den = u[(i, i)] + u[(j, j)];
            if den.norm() < 1e-14 {
                return Err(Error::Singular("sqrtm_dense"));
            }
            u[(i, j)] = s / den;
        }
    }
    Ok(&q * u * q.adjoint())
}

pub fn is_diagonal(a: &CMatrix) -> bool {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j && a[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a square complex matrix (Schur diagonal).
pub fn eigenvalues(a: &CMatrix) -> Vec<C64> {
    let t = nalgebra::Schur::new(a.clone()).unpack().1;
    (0..a.nrows()).map(|i| t[(i, i)]).collect()
}

/// Roots of `c[0] + c[1] z + ... + c[d] z^d` via the companion matrix.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut d = coeffs.len() - 1;
    while d > 0 && coeffs[d].norm() == 0.0 {
        d -= 1;
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let mut comp = CMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = r(1.0);
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    let roots = eigenvalues(&comp);
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::RootFinding("companion eigenvalues not finite".into()));
    }
    Ok(roots)
}

pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// `v / sqrt(v^T v)` on the csqrt branch.
pub fn csqrt_vec_normalize(v: &CVector) -> Result<CVector> {
    let s = csqrt(bsq(v))?;
    Ok(v / s)
}

/// `(I_{1,n})` projection: drop the last entry.
pub fn head(v: &CVector) -> CVector {
    v.rows(0, v.len() - 1).into_owned()
}
