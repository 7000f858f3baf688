//! Symmetric Jordan (SJ) calculus for complex symmetric matrices.
//!
//! A block `a I_p + J_p` uses the symmetric nilpotent `J_p` built from the
//! isotropic vectors `f_j = (e_{2j-1} + i e_{2j}) / sqrt(2)`. Functions of an
//! assembled [`SJSpec`] are evaluated blockwise by their finite Taylor series.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, expm, r, CMatrix, CVector, C64};

/// `f_j` in `C^m`, with `j` 1-based.
pub fn isotropic_vector(j: usize, m: usize) -> Result<CVector> {
    if j == 0 || 2 * j > m {
        return Err(Error::IndexOutOfRange { index: j, dim: m });
    }
    let mut f = CVector::zeros(m);
    f[2 * j - 2] = r(FRAC_1_SQRT_2);
    f[2 * j - 1] = c(0.0, FRAC_1_SQRT_2);
    Ok(f)
}

fn sym_outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.transpose() + b * a.transpose()
}

/// The symmetric nilpotent block `J_p`, with `J_p^p = 0` and `J_p^{p-1} != 0`.
pub fn sj_block(p: usize) -> CMatrix {
    assert!(p >= 1, "block size must be positive");
    let mut j = CMatrix::zeros(p, p);
    let m = p / 2;
    for k in 1..m {
        let fk = isotropic_vector(k, p).unwrap();
        let fk1 = isotropic_vector(k + 1, p).unwrap().map(|z| z.conj());
        j += sym_outer(&fk, &fk1);
    }
    if m >= 1 {
        let fm = isotropic_vector(m, p).unwrap();
        if p % 2 == 0 {
            j += &fm * fm.transpose();
        } else {
            let mut ep = CVector::zeros(p);
            ep[p - 1] = r(1.0);
            j += sym_outer(&fm, &ep);
        }
    }
    j
}

/// Square root with `arg(a) = 2 theta`, `-pi <= 2 theta < pi`.
///
/// The negative real axis is sent to the negative imaginary axis: `csqrt(-1) = -i`.
pub fn csqrt(a: C64) -> Result<C64> {
    if a == C64::new(0.0, 0.0) {
        return Err(Error::ZeroInput);
    }
    let (rho, mut th) = a.to_polar();
    if th >= PI {
        th = -PI;
    }
    // atan2 returns +pi for negative reals with +0 imaginary part and
    // -pi for -0; both lie on the cut and map to -pi here.
    if a.im == 0.0 && a.re < 0.0 {
        th = -PI;
    }
    Ok(C64::from_polar(rho.sqrt(), th / 2.0))
}

/// Generalized binomial coefficient `binom(alpha, k)`.
pub fn binom(alpha: f64, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b *= (alpha - i as f64) / (i as f64 + 1.0);
    }
    b
}

/// `b^(t/2)` for integer `t`, on the [`csqrt`] branch.
pub fn half_power(b: C64, twice_alpha: i32) -> Result<C64> {
    if b == C64::new(0.0, 0.0) {
        return Err(Error::ZeroInput);
    }
    let s = csqrt(b)?;
    Ok(s.powi(twice_alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SJBlock {
    pub re: f64,
    pub im: f64,
    pub p: usize,
}

impl SJBlock {
    pub fn new(a: C64, p: usize) -> Self {
        SJBlock { re: a.re, im: a.im, p }
    }

    pub fn eigenvalue(&self) -> C64 {
        c(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SJSpec {
    pub blocks: Vec<SJBlock>,
}

impl SJSpec {
    pub fn new(blocks: Vec<SJBlock>) -> Self {
        SJSpec { blocks }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        SJSpec { blocks: values.iter().map(|&a| SJBlock::new(a, 1)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.p).sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut o = 0;
        for b in &self.blocks {
            off.push(o);
            o += b.p;
        }
        off
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Invalid("SJ spec has no blocks".into()));
        }
        for b in &self.blocks {
            if b.p == 0 {
                return Err(Error::Invalid("SJ block of size 0".into()));
            }
            if !b.re.is_finite() || !b.im.is_finite() {
                return Err(Error::Invalid("non-finite SJ eigenvalue".into()));
            }
        }
        Ok(())
    }

    pub fn assemble(&self) -> CMatrix {
        self.blockwise(|a, _| Ok(vec![a, r(1.0)])).unwrap()
    }

    /// Blockwise functional calculus. `taylor(a, p)` returns the coefficients
    /// `f^(k)(a) / k!` for `k < p` (shorter vectors are zero-padded).
    pub fn blockwise<F>(&self, taylor: F) -> Result<CMatrix>
    where
        F: Fn(C64, usize) -> Result<Vec<C64>>,
    {
        let m = self.dim();
        let mut out = CMatrix::zeros(m, m);
        for (b, off) in self.blocks.iter().zip(self.offsets()) {
            let coeffs = taylor(b.eigenvalue(), b.p)?;
            let jp = sj_block(b.p);
            let mut pw = CMatrix::identity(b.p, b.p);
            let mut blk = CMatrix::zeros(b.p, b.p);
            for k in 0..b.p {
                if let Some(&ck) = coeffs.get(k) {
                    blk += &pw * ck;
                }
                pw = &pw * &jp;
            }
            out.view_mut((off, off), (b.p, b.p)).copy_from(&blk);
        }
        Ok(out)
    }

    /// `(c0 I + c1 M)^(t/2)` for integer `t`, blockwise on the [`csqrt`] branch.
    pub fn affine_power(&self, c0: C64, c1: C64, twice_alpha: i32) -> Result<CMatrix> {
        let alpha = twice_alpha as f64 / 2.0;
        self.blockwise(|a, p| {
            let b = c0 + c1 * a;
            if b.norm() == 0.0 {
                return Err(Error::ZeroEigenvalue("fractional or negative power"));
            }
            let base = half_power(b, twice_alpha)?;
            let binv = 1.0 / b;
            let mut out = Vec::with_capacity(p);
            let mut fac = base;
            for k in 0..p {
                out.push(fac * binom(alpha, k));
                fac *= binv * c1;
            }
            Ok(out)
        })
    }

    pub fn sqrt(&self) -> Result<CMatrix> {
        self.affine_power(r(0.0), r(1.0), 1)
    }

    pub fn inv_sqrt(&self) -> Result<CMatrix> {
        self.affine_power(r(0.0), r(1.0), -1)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.affine_power(r(0.0), r(1.0), -2)
    }

    /// Random spec with eigenvalues bounded away from zero.
    pub fn random<R: Rng>(rng: &mut R, max_dim: usize, max_block: usize) -> Self {
        let mut blocks = Vec::new();
        let target = rng.random_range(1..=max_dim);
        let mut used = 0;
        while used < target {
            let p = rng.random_range(1..=max_block.min(target - used));
            let modulus = rng.random_range(0.5..2.0);
            let arg = rng.random_range(-3.0..3.0);
            blocks.push(SJBlock::new(C64::from_polar(modulus, arg), p));
            used += p;
        }
        SJSpec { blocks }
    }
}

/// Square root of an SJ matrix, error if a block has eigenvalue 0.
pub fn sj_sqrt(m: &SJSpec) -> Result<CMatrix> {
    if m.blocks.iter().any(|b| b.eigenvalue().norm() == 0.0) {
        return Err(Error::ZeroEigenvalue("square root"));
    }
    m.sqrt()
}

/// A complex orthogonal matrix `exp(S)` with `S` antisymmetric and seeded entries.
pub fn random_rotation(m: usize, seed: u64) -> CMatrix {
    random_rotation_scaled(m, seed, 1.0)
}

pub fn random_rotation_scaled(m: usize, seed: u64, scale: f64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            s[(i, j)] = z;
            s[(j, i)] = -z;
        }
    }
    let mut o = expm(&s);
    if m == 1 && rng.random_bool(0.5) {
        o[(0, 0)] = r(-1.0);
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn isotropic_basics() {
        let f = isotropic_vector(1, 2).unwrap();
        assert!((f[0] - r(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((f[1] - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!(f.dot(&f).norm() < 1e-15);
        assert!((f.dotc(&f) - r(1.0)).norm() < 1e-15);
        assert!(isotropic_vector(2, 3).is_err());
        assert!(isotropic_vector(0, 4).is_err());
    }

    #[test]
    fn j2_and_j3() {
        let j2 = sj_block(2);
        let want = CMatrix::from_row_slice(2, 2, &[r(0.5), c(0.0, 0.5), c(0.0, 0.5), r(-0.5)]);
        assert!(max_abs(&(j2 - want)) < 1e-15);
        let f1 = isotropic_vector(1, 3).unwrap();
        let mut e3 = CVector::zeros(3);
        e3[2] = r(1.0);
        let want3 = &f1 * e3.transpose() + &e3 * f1.transpose();
        assert!(max_abs(&(sj_block(3) - want3)) < 1e-15);
        assert!(max_abs(&sj_block(1)) == 0.0);
    }

    #[test]
    fn nilpotency_order_and_cyclic_vector() {
        for p in 1..=9 {
            let j = sj_block(p);
            assert!(max_abs(&(&j - j.transpose())) < 1e-15);
            let mut pw = CMatrix::identity(p, p);
            for _ in 0..p - 1 {
                pw = &pw * &j;
            }
            assert!(max_abs(&pw) > 0.1, "J_{p}^(p-1) vanished");
            assert!(max_abs(&(&pw * &j)) < 1e-14);
            if p >= 2 {
                let fb = isotropic_vector(1, p).unwrap().map(|z| z.conj());
                let mut pk = CMatrix::identity(p, p);
                for k in 0..p {
                    let v = fb.transpose() * &pk * &fb;
                    let want = if k == p - 1 { 1.0 } else { 0.0 };
                    assert!((v[0] - r(want)).norm() < 1e-14, "p={p} k={k}");
                    pk = &pk * &j;
                }
            }
        }
    }

    #[test]
    fn csqrt_branch() {
        assert!((csqrt(r(4.0)).unwrap() - r(2.0)).norm() < 1e-15);
        assert!((csqrt(r(-1.0)).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        assert!((csqrt(c(-1.0, -0.0)).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        assert!((csqrt(c(0.0, 2.0)).unwrap() - c(1.0, 1.0)).norm() < 1e-15);
        assert!(matches!(csqrt(r(0.0)), Err(Error::ZeroInput)));
    }

    #[test]
    fn sqrt_examples() {
        let s = sj_sqrt(&SJSpec::diagonal(&[r(4.0), r(9.0)])).unwrap();
        assert!((s[(0, 0)] - r(2.0)).norm() < 1e-15 && (s[(1, 1)] - r(3.0)).norm() < 1e-15);
        let s = sj_sqrt(&SJSpec::new(vec![SJBlock::new(r(1.0), 2)])).unwrap();
        let want = CMatrix::identity(2, 2) + sj_block(2) * r(0.5);
        assert!(max_abs(&(s - want)) < 1e-15);
        assert!(sj_sqrt(&SJSpec::new(vec![SJBlock::new(r(0.0), 2)])).is_err());
    }

    #[test]
    fn inverse_and_inv_sqrt() {
        let spec = SJSpec::new(vec![SJBlock::new(c(0.3, 1.0), 4), SJBlock::new(r(-2.0), 3)]);
        let m = spec.assemble();
        let n = spec.dim();
        assert!(max_abs(&(&m * spec.inverse().unwrap() - CMatrix::identity(n, n))) < 1e-12);
        let is = spec.inv_sqrt().unwrap();
        assert!(max_abs(&(&is * &is * &m - CMatrix::identity(n, n))) < 1e-12);
    }

    #[test]
    fn rotations() {
        let o = random_rotation(5, 7);
        assert!(max_abs(&(o.transpose() * &o - CMatrix::identity(5, 5))) < 1e-12);
        assert_eq!(o, random_rotation(5, 7));
        assert_ne!(o, random_rotation(5, 8));
        let o1 = random_rotation(1, 3);
        assert!((o1[(0, 0)].norm() - 1.0).abs() < 1e-15 && o1[(0, 0)].im == 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let spec = SJSpec::new(vec![SJBlock::new(c(1.0, -0.5), 3)]);
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"blocks":[{"re":1.0,"im":-0.5,"p":3}]}"#);
        assert_eq!(serde_json::from_str::<SJSpec>(&s).unwrap(), spec);
    }
}
