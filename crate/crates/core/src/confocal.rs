//! Canonical quadrics, their confocal families and the Ivory affinity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bsq, c, max_abs, max_abs_vec, poly_roots, r, unit, CMatrix, CVector, C64};
use crate::lmap::{build_lmap, LMap};
use crate::report::ResidualReport;
use crate::sjcalc::{binom, csqrt, isotropic_vector, sj_block, SJBlock, SJSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadricKind {
    QC,
    QWC,
    IQWC,
}

/// `Q(x) = x^T (A x + 2 B) + C` with `A` in SJ form.
#[derive(Debug, Clone)]
pub struct Quadric {
    pub kind: QuadricKind,
    pub spec: SJSpec,
    pub n: usize,
    pub a: CMatrix,
    pub b: CVector,
    pub c: C64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadricConfig {
    pub kind: QuadricKind,
    pub blocks: Vec<SJBlock>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl QuadricConfig {
    pub fn build(&self) -> Result<Quadric> {
        let q = canonical_quadric(self.kind, &SJSpec::new(self.blocks.clone()))?;
        if let Some(n) = self.n {
            if n != q.n {
                return Err(Error::Dimension(format!("config n = {n} but blocks give n = {}", q.n)));
            }
        }
        Ok(q)
    }
}

const ZERO_TOL: f64 = 1e-14;

fn is_zero(a: C64) -> bool {
    a.norm() <= ZERO_TOL
}

pub fn canonical_quadric(kind: QuadricKind, spec: &SJSpec) -> Result<Quadric> {
    spec.validate()?;
    let m = spec.dim();
    if m < 2 {
        return Err(Error::Dimension("quadric needs ambient dimension n+1 >= 2".into()));
    }
    let zero_blocks: Vec<usize> =
        (0..spec.blocks.len()).filter(|&i| is_zero(spec.blocks[i].eigenvalue())).collect();
    let b = match kind {
        QuadricKind::QC => {
            if !zero_blocks.is_empty() {
                return Err(Error::KernelConstraint("QC requires an invertible A".into()));
            }
            CVector::zeros(m)
        }
        QuadricKind::QWC => {
            let last = spec.blocks.len() - 1;
            if zero_blocks != [last] || spec.blocks[last].p != 1 {
                return Err(Error::KernelConstraint(
                    "QWC requires exactly one zero eigenvalue, as the last 1x1 block".into(),
                ));
            }
            -unit(m, m - 1)
        }
        QuadricKind::IQWC => {
            if zero_blocks != [0] || spec.blocks[0].p < 2 {
                return Err(Error::KernelConstraint(
                    "IQWC requires exactly one zero eigenvalue, as the first block with p >= 2".into(),
                ));
            }
            -isotropic_vector(1, m)?.map(|z| z.conj())
        }
    };
    let cc = if kind == QuadricKind::QC { r(-1.0) } else { r(0.0) };
    let a = spec.assemble();
    let mut bordered = CMatrix::zeros(m + 1, m + 1);
    bordered.view_mut((0, 0), (m, m)).copy_from(&a);
    for i in 0..m {
        bordered[(i, m)] = b[i];
        bordered[(m, i)] = b[i];
    }
    bordered[(m, m)] = cc;
    let det = bordered.determinant();
    if det.norm() < 1e-12 {
        return Err(Error::DegenerateBordered(det.norm()));
    }
    Ok(Quadric { kind, spec: spec.clone(), n: m - 1, a, b, c: cc })
}

/// Diagonal QWC with `A = sum_j a_j^{-1} e_j e_j^T` (`j <= n`).
pub fn diagonal_qwc(a: &[C64]) -> Result<Quadric> {
    let mut vals: Vec<C64> = a.iter().map(|&x| 1.0 / x).collect();
    vals.push(r(0.0));
    canonical_quadric(QuadricKind::QWC, &SJSpec::diagonal(&vals))
}

/// Diagonal QC with `A = sum_j a_j^{-1} e_j e_j^T`.
pub fn diagonal_qc(a: &[C64]) -> Result<Quadric> {
    let vals: Vec<C64> = a.iter().map(|&x| 1.0 / x).collect();
    canonical_quadric(QuadricKind::QC, &SJSpec::diagonal(&vals))
}

impl Quadric {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn eval(&self, x: &CVector) -> C64 {
        x.dot(&(&self.a * x + &self.b * r(2.0))) + self.c
    }

    /// `A x + B`, proportional to the normal of `Q` at `x`.
    pub fn normal0(&self, x: &CVector) -> CVector {
        &self.a * x + &self.b
    }

    /// Scale used to turn absolute residuals into relative ones.
    pub fn scale(&self, x: &CVector) -> f64 {
        1.0 + max_abs_vec(x).powi(2) * max_abs(&self.a).max(1.0)
    }

    /// Reject `z` whose segment `[0, z]` meets a cut of some `csqrt(1 - w a)`.
    pub fn admissible(&self, z: C64) -> Result<()> {
        for blk in &self.spec.blocks {
            let w = z * blk.eigenvalue();
            if w.im.abs() <= 1e-14 * w.norm().max(1.0) && w.re >= 1.0 - 1e-12 {
                if (w.re - 1.0).abs() <= 1e-12 {
                    return Err(Error::Resonance { z });
                }
                return Err(Error::BranchCut { z });
            }
        }
        Ok(())
    }

    fn check_regular(&self, z: C64) -> Result<()> {
        for blk in &self.spec.blocks {
            if (r(1.0) - z * blk.eigenvalue()).norm() <= 1e-12 {
                return Err(Error::Resonance { z });
            }
        }
        Ok(())
    }

    /// `R_z^{-1} = (I - z A)^{-1}`.
    pub fn resolvent(&self, z: C64) -> Result<CMatrix> {
        self.check_regular(z)?;
        self.spec.affine_power(r(1.0), -z, -2)
    }

    /// `sqrt(R_z)` on the csqrt branch.
    pub fn sqrt_rz(&self, z: C64) -> Result<CMatrix> {
        self.admissible(z)?;
        self.spec.affine_power(r(1.0), -z, 1)
    }

    /// Ivory translation `C(z)`; `B` lives in the zero block so only its
    /// series is needed.
    pub fn c_vector(&self, z: C64) -> Result<CVector> {
        self.admissible(z)?;
        let m = self.dim();
        match self.kind {
            QuadricKind::QC => Ok(CVector::zeros(m)),
            QuadricKind::QWC => Ok(unit(m, m - 1) * (z / 2.0)),
            QuadricKind::IQWC => {
                let p = self.spec.blocks[0].p;
                let jp = sj_block(p);
                let bk = -self.b.rows(0, p).into_owned();
                let mut term = bk.clone();
                let mut out = CVector::zeros(m);
                let mut zk = z;
                for k in 0..p {
                    let coef = binom(-0.5, k) * if k % 2 == 0 { 1.0 } else { -1.0 } / (k as f64 + 1.0);
                    let piece = &term * (zk * coef * 0.5);
                    for i in 0..p {
                        out[i] += piece[i];
                    }
                    term = &jp * term;
                    zk *= z;
                }
                Ok(out)
            }
        }
    }

    pub fn ivory_image(&self, x0: &CVector, z: C64) -> Result<CVector> {
        let res = self.eval(x0).norm() / self.scale(x0);
        if res > 1e-10 {
            return Err(Error::Precondition(format!("point is off the quadric (residual {res:e})")));
        }
        Ok(self.sqrt_rz(z)? * x0 + self.c_vector(z)?)
    }

    /// `(Q_z(x), R_z^{-1}(A x + B))`.
    pub fn q_eval_normal(&self, x: &CVector, z: C64) -> Result<(C64, CVector)> {
        let rinv = self.resolvent(z)?;
        let rb = &rinv * &self.b;
        let val = x.dot(&(&self.a * &rinv * x)) + rb.dot(x) * 2.0 + self.c + z * self.b.dot(&rb);
        let nh = rinv * (&self.a * x + &self.b);
        Ok((val, nh))
    }

    /// "General" means every eigenvalue carries a single SJ block.
    pub fn check_general(&self) -> Result<()> {
        let bl = &self.spec.blocks;
        for i in 0..bl.len() {
            for j in i + 1..bl.len() {
                if (bl[i].eigenvalue() - bl[j].eigenvalue()).norm() <= 1e-10 {
                    return Err(Error::NotGeneral(bl[i].eigenvalue()));
                }
            }
        }
        Ok(())
    }

    /// `det(R_z) Q_z(x)`, a polynomial of degree `n + 1` in `z`.
    fn cleared(&self, x: &CVector, z: C64) -> Result<C64> {
        let mut det = r(1.0);
        for blk in &self.spec.blocks {
            det *= (r(1.0) - z * blk.eigenvalue()).powi(blk.p as i32);
        }
        Ok(self.q_eval_normal(x, z)?.0 * det)
    }

    /// Coefficients (ascending) of `det(R_z) Q_z(x)`, recovered exactly by
    /// a discrete Fourier transform over `n + 2` points of a small circle.
    pub fn elliptic_polynomial(&self, x: &CVector) -> Result<Vec<C64>> {
        let amax = self.spec.blocks.iter().map(|b| b.eigenvalue().norm()).fold(0.0, f64::max);
        let rho = if amax > 0.0 { 0.5 / amax } else { 1.0 };
        let npts = self.n + 2;
        let mut vals = Vec::with_capacity(npts);
        for k in 0..npts {
            let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / npts as f64);
            vals.push(self.cleared(x, w * rho)?);
        }
        let mut coeffs = Vec::with_capacity(npts);
        for j in 0..npts {
            let mut s = r(0.0);
            for (k, v) in vals.iter().enumerate() {
                s += v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / npts as f64);
            }
            coeffs.push(s / (npts as f64 * rho.powi(j as i32)));
        }
        Ok(coeffs)
    }

    /// The `n + 1` roots of `Q_z(x) = 0` in `z`.
    pub fn elliptic_coords(&self, x: &CVector) -> Result<Vec<C64>> {
        self.check_general()?;
        let coeffs = self.elliptic_polynomial(x)?;
        let roots = poly_roots(&coeffs)?;
        if roots.len() != self.n + 1 {
            return Err(Error::RootFinding(format!("expected {} roots, found {}", self.n + 1, roots.len())));
        }
        let mut out = Vec::with_capacity(roots.len());
        for z0 in roots {
            let (val, nh) = self.q_eval_normal(x, z0)?;
            let d = bsq(&nh);
            let herm = nh.dotc(&nh).re;
            if d.norm() <= 1e-7 * herm.max(1e-300) {
                return Err(Error::MultipleRoots(d.norm()));
            }
            out.push(z0 - val / d);
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if (out[i] - out[j]).norm() <= 1e-9 * (1.0 + out[i].norm()) {
                    return Err(Error::MultipleRoots((out[i] - out[j]).norm()));
                }
            }
        }
        Ok(out)
    }

    /// Point on `Q`. QC: `(sqrt A)^{-1} X` with `|X|^2 = 1`; (I)QWC: `L Z(V)`.
    /// Without explicit parameters they are drawn from `seed`.
    pub fn sample_point(&self, lm: Option<&LMap>, params: Option<&CVector>, seed: u64) -> Result<CVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.kind {
            QuadricKind::QC => {
                let x = match params {
                    Some(p) => p.clone(),
                    None => {
                        let y = random_cvector(&mut rng, self.dim(), 1.0);
                        let s = csqrt(bsq(&y))?;
                        y / s
                    }
                };
                Ok(self.spec.inv_sqrt()? * x)
            }
            _ => {
                let owned;
                let lm = match lm {
                    Some(l) => l,
                    None => {
                        owned = build_lmap(self)?;
                        &owned
                    }
                };
                let v = match params {
                    Some(p) => p.clone(),
                    None => random_cvector(&mut rng, self.n, 0.5),
                };
                Ok(lm.point(&v))
            }
        }
    }
}

pub fn random_cvector<R: Rng>(rng: &mut R, m: usize, scale: f64) -> CVector {
    CVector::from_fn(m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
}

#[derive(Debug, Clone)]
pub struct RulingDirection {
    pub x: CVector,
    pub w: CVector,
}

/// Both rulings through `x` inside a random 2-plane of the tangent hyperplane.
///
/// On the plane `w = a + t b` the cone condition `w^T A w = 0` is a quadratic
/// in `t`; the two roots are returned, each normalized to slice coordinate 1.
pub fn ruling_directions(q: &Quadric, x: &CVector, slice_seed: u64) -> Result<Vec<RulingDirection>> {
    if q.dim() < 3 {
        return Err(Error::Dimension("rulings need n + 1 >= 3".into()));
    }
    let nh = q.normal0(x);
    let nn = nh.dotc(&nh).re;
    if nn == 0.0 {
        return Err(Error::Precondition("vanishing normal".into()));
    }
    let proj = |g: CVector| -> CVector {
        let k = g.dot(&nh) / nn;
        g - nh.map(|z| z.conj()) * k
    };
    const RESTARTS: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(slice_seed);
    for _ in 0..RESTARTS {
        let a = proj(random_cvector(&mut rng, q.dim(), 1.0));
        let b = proj(random_cvector(&mut rng, q.dim(), 1.0));
        let aa = a.dot(&(&q.a * &a));
        let ab = a.dot(&(&q.a * &b));
        let bb = b.dot(&(&q.a * &b));
        if bb.norm() < 1e-8 {
            continue;
        }
        let disc = csqrt(ab * ab - aa * bb).unwrap_or(r(0.0));
        let mut out = Vec::with_capacity(2);
        for t in [(-ab + disc) / bb, (-ab - disc) / bb] {
            let w = &a + &b * t;
            if max_abs_vec(&w) < 1e-8 {
                continue;
            }
            out.push(RulingDirection { x: x.clone(), w });
        }
        if out.len() == 2 {
            return Ok(out);
        }
    }
    Err(Error::RulingNotFound(RESTARTS))
}

pub fn ruling_direction(q: &Quadric, x: &CVector, slice_seed: u64) -> Result<RulingDirection> {
    Ok(ruling_directions(q, x, slice_seed)?.swap_remove(0))
}

/// Ruling `w_hat` through `x` with `w^T A w_hat = 0` (the polar of `w`).
pub fn polar_ruling(q: &Quadric, x: &CVector, w: &CVector, slice_seed: u64) -> Result<CVector> {
    let nh = q.normal0(x);
    let aw = &q.a * w;
    let m = q.dim();
    // Null space of the two linear constraints, then the cone quadratic on a 2-plane.
    let mut cons = CMatrix::zeros(2, m);
    cons.set_row(0, &nh.transpose());
    cons.set_row(1, &aw.transpose());
    let basis = null_space(&cons, 1e-10);
    match basis.ncols() {
        0 => return Err(Error::RulingNotFound(0)),
        // n + 1 = 3: the only candidate is w itself.
        1 => return Ok(basis.column(0).into_owned()),
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(slice_seed);
    for _ in 0..8 {
        let ca = random_cvector(&mut rng, basis.ncols(), 1.0);
        let cb = random_cvector(&mut rng, basis.ncols(), 1.0);
        let a = &basis * ca;
        let b = &basis * cb;
        let aa = a.dot(&(&q.a * &a));
        let ab = a.dot(&(&q.a * &b));
        let bb = b.dot(&(&q.a * &b));
        if bb.norm() < 1e-8 {
            continue;
        }
        let disc = csqrt(ab * ab - aa * bb).unwrap_or(r(0.0));
        let wh = &a + &b * ((-ab + disc) / bb);
        if max_abs_vec(&wh) > 1e-8 {
            return Ok(wh);
        }
    }
    Err(Error::RulingNotFound(8))
}

/// Orthonormal (Hermitian) basis of `{w : M w = 0}`.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let cols = m.ncols();
    let mut padded = CMatrix::zeros(cols.max(m.nrows()), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let keep: Vec<usize> = (0..cols).filter(|&i| svd.singular_values[i] <= tol * smax).collect();
    let mut out = CMatrix::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let row = vt.row(i).map(|z| z.conj());
        out.set_column(j, &row.transpose());
    }
    out
}

fn hn(v: &CVector) -> f64 {
    v.norm()
}

fn rel(a: C64, b: C64, scale: f64) -> f64 {
    (a - b).norm() / (1.0 + scale)
}

/// The six Ivory-affinity identities over `sample_count` random pairs of
/// points of `Q`. Each residual is divided by `1 + s`, where `s` bounds the
/// Hermitian size of the products compared.
/// `perturb` is added to every coordinate of `x_z^1` (0 for a clean run).
pub fn ivory_identity_suite_perturbed(
    q: &Quadric,
    z: C64,
    sample_count: usize,
    seed: u64,
    perturb: f64,
) -> Result<ResidualReport> {
    if sample_count == 0 {
        return Err(Error::Invalid("sample_count must be positive".into()));
    }
    let lm = match q.kind {
        QuadricKind::QC => None,
        _ => Some(build_lmap(q)?),
    };
    let srz = q.sqrt_rz(z)?;
    let mut names: [Vec<f64>; 6] = Default::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let s0: u64 = rng.random();
        let s1: u64 = rng.random();
        let x00 = q.sample_point(lm.as_ref(), None, s0)?;
        let x01 = q.sample_point(lm.as_ref(), None, s1)?;
        let xz0 = q.ivory_image(&x00, z)?;
        let mut xz1 = q.ivory_image(&x01, z)?;
        xz1.iter_mut().for_each(|v| *v += perturb);
        let v01 = &xz1 - &x00;
        let v10 = &xz0 - &x01;
        let n00 = q.normal0(&x00);
        let n01 = q.normal0(&x01);
        names[0].push(rel(bsq(&v01), bsq(&v10), hn(&v01).max(hn(&v10)).powi(2)));
        let tsc = (hn(&v01) * hn(&n00)).max(hn(&v10) * hn(&n01));
        names[2].push(rel(v01.dot(&n00), v10.dot(&n01), tsc));
        if q.dim() >= 3 {
            let w0 = ruling_direction(q, &x00, rng.random())?.w;
            let w1 = ruling_direction(q, &x01, rng.random())?.w;
            let wz0 = &srz * &w0;
            let wz1 = &srz * &w1;
            names[1].push(rel(bsq(&wz0), bsq(&w0), hn(&wz0).max(hn(&w0)).powi(2)));
            let ssc = (hn(&v01) * hn(&w0)).max(hn(&v10) * hn(&wz0));
            names[3].push(rel(v01.dot(&w0), -v10.dot(&wz0), ssc));
            let rsc = (hn(&w0) * hn(&wz1)).max(hn(&wz0) * hn(&w1));
            names[4].push(rel(w0.dot(&wz1), wz0.dot(&w1), rsc));
            let wh = polar_ruling(q, &x00, &w0, rng.random())?;
            let whz = &srz * &wh;
            let psc = (hn(&wz0) * hn(&whz)).max(hn(&w0) * hn(&wh));
            names[5].push(rel(wz0.dot(&whz), w0.dot(&wh), psc));
        }
    }
    let mut rep = ResidualReport::new("ivory");
    for (i, name) in ["ivory_length", "ruling_length", "tc_symmetry", "segment_ruling", "ruling_ruling", "polar_ruling"]
        .iter()
        .enumerate()
    {
        rep.push(name, &names[i]);
    }
    if q.dim() < 3 {
        rep.note("ruling identities need n + 1 >= 3; ruling entries have no samples");
    }
    Ok(rep)
}

pub fn ivory_identity_suite(q: &Quadric, z: C64, sample_count: usize, seed: u64) -> Result<ResidualReport> {
    ivory_identity_suite_perturbed(q, z, sample_count, seed, 0.0)
}

/// Random general quadric of the given kind with ambient dimension `n + 1`.
pub fn random_quadric<R: Rng>(rng: &mut R, kind: QuadricKind, n: usize) -> Result<Quadric> {
    let m = n + 1;
    let mut blocks = Vec::new();
    let mut used = 0;
    match kind {
        QuadricKind::IQWC => {
            let p = rng.random_range(2..=m.min(3));
            blocks.push(SJBlock::new(r(0.0), p));
            used += p;
        }
        QuadricKind::QWC => used += 1,
        QuadricKind::QC => {}
    }
    while used < m {
        let p = rng.random_range(1..=(m - used).min(2));
        let a = C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-3.0..3.0));
        blocks.push(SJBlock::new(a, p));
        used += p;
    }
    if kind == QuadricKind::QWC {
        blocks.push(SJBlock::new(r(0.0), 1));
    }
    canonical_quadric(kind, &SJSpec::new(blocks))
}

/// Random `z` admissible for `q` with `|z| <= 0.9 / max(1, max |a|)`.
pub fn random_admissible_z<R: Rng>(rng: &mut R, q: &Quadric) -> C64 {
    let amax = q.spec.blocks.iter().map(|b| b.eigenvalue().norm()).fold(0.0, f64::max).max(1.0);
    loop {
        let z = C64::from_polar(rng.random_range(0.05..0.9) / amax, rng.random_range(-PI..PI));
        if q.admissible(z).is_ok() {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_examples() {
        let q = canonical_quadric(QuadricKind::QC, &SJSpec::diagonal(&[r(1.0); 3])).unwrap();
        assert_eq!(q.c, r(-1.0));
        assert!(max_abs_vec(&q.b) == 0.0);
        let q = diagonal_qwc(&[r(1.0), r(2.0)]).unwrap();
        assert!((q.a[(1, 1)] - r(0.5)).norm() < 1e-15 && q.a[(2, 2)] == r(0.0));
        assert_eq!(q.b, -unit(3, 2));
        let q = canonical_quadric(QuadricKind::IQWC, &SJSpec::new(vec![SJBlock::new(r(0.0), 2)])).unwrap();
        assert!(max_abs(&(&q.a - sj_block(2))) < 1e-15);
        assert!(canonical_quadric(QuadricKind::QC, &SJSpec::diagonal(&[r(1.0), r(0.0)])).is_err());
        assert!(canonical_quadric(QuadricKind::QWC, &SJSpec::diagonal(&[r(0.0), r(1.0)])).is_err());
    }

    #[test]
    fn c_vector_closed_forms_and_identities() {
        let z = c(0.3, -0.2);
        let q = diagonal_qwc(&[r(1.0), r(2.0)]).unwrap();
        assert!(max_abs_vec(&(q.c_vector(z).unwrap() - unit(3, 2) * (z / 2.0))) < 1e-15);
        let q = canonical_quadric(QuadricKind::IQWC, &SJSpec::new(vec![SJBlock::new(r(0.0), 2)])).unwrap();
        let fb = -q.b.clone();
        let want = &fb * (z / 2.0) + sj_block(2) * &fb * (z * z / 8.0);
        let cz = q.c_vector(z).unwrap();
        assert!(max_abs_vec(&(&cz - want)) < 1e-15);
        assert!((fb.dot(&cz) - z * z / 8.0).norm() < 1e-15);
        for kind in [QuadricKind::QC, QuadricKind::QWC, QuadricKind::IQWC] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let q = random_quadric(&mut rng, kind, 3).unwrap();
            let z = random_admissible_z(&mut rng, &q);
            let s = q.sqrt_rz(z).unwrap();
            let cz = q.c_vector(z).unwrap();
            let id = CMatrix::identity(4, 4);
            assert!(max_abs_vec(&(&q.a * &cz + (&id - &s) * &q.b)) < 1e-12);
            assert!(max_abs_vec(&((&id + &s) * &cz + &q.b * z)) < 1e-12);
        }
    }

    #[test]
    fn normals_and_derivative() {
        let q = diagonal_qc(&[r(1.0), r(2.0), r(3.0)]).unwrap();
        let x = CVector::from_vec(vec![c(0.3, 0.1), r(0.7), c(-0.2, 0.4)]);
        let z = c(0.1, 0.05);
        let h = 1e-5;
        let qp = q.q_eval_normal(&x, z + h).unwrap().0;
        let qm = q.q_eval_normal(&x, z - h).unwrap().0;
        let (_, nh) = q.q_eval_normal(&x, z).unwrap();
        assert!(((qp - qm) / (2.0 * h) - bsq(&nh)).norm() < 1e-6);
    }

    #[test]
    fn ivory_roundtrip() {
        let q = diagonal_qwc(&[r(1.0), c(2.0, 0.5)]).unwrap();
        let x0 = q.sample_point(None, None, 11).unwrap();
        let z = c(0.2, 0.1);
        let xz = q.ivory_image(&x0, z).unwrap();
        let (val, _) = q.q_eval_normal(&xz, z).unwrap();
        assert!(val.norm() < 1e-9);
        let back = crate::linalg::inverse(&q.sqrt_rz(z).unwrap(), "t").unwrap() * (&xz - q.c_vector(z).unwrap());
        assert!(max_abs_vec(&(back - &x0)) < 1e-10);
        assert!(max_abs_vec(&(q.ivory_image(&x0, r(0.0)).unwrap() - &x0)) == 0.0);
    }

    #[test]
    fn admissibility() {
        let q = diagonal_qc(&[r(1.0), r(0.5)]).unwrap();
        assert!(matches!(q.admissible(r(3.0)), Err(Error::BranchCut { .. })));
        assert!(matches!(q.admissible(r(0.5)), Err(Error::Resonance { .. })));
        assert!(q.admissible(c(3.0, 0.1)).is_ok());
    }

    #[test]
    fn rulings_two_classes() {
        let q = diagonal_qc(&[r(1.0), r(2.0), r(-3.0)]).unwrap();
        let x = q.sample_point(None, None, 5).unwrap();
        let ws = ruling_directions(&q, &x, 9).unwrap();
        assert_eq!(ws.len(), 2);
        for w in &ws {
            assert!(w.w.dot(&(&q.a * &w.w)).norm() < 1e-10);
            assert!(w.w.dot(&q.normal0(&x)).norm() < 1e-10);
        }
        // The two classes are not proportional.
        let cross = ws[0].w[0] * ws[1].w[1] - ws[0].w[1] * ws[1].w[0];
        assert!(cross.norm() > 1e-6);
    }

    #[test]
    fn ivory_suite_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in [QuadricKind::QC, QuadricKind::QWC, QuadricKind::IQWC] {
            for n in [2, 3] {
                let q = random_quadric(&mut rng, kind, n).unwrap();
                let z = random_admissible_z(&mut rng, &q);
                let rep = ivory_identity_suite(&q, z, 10, 3).unwrap();
                assert!(rep.worst() < 1e-9, "{kind:?} n={n}: {rep:?}");
                let bad = ivory_identity_suite_perturbed(&q, z, 10, 3, 1e-3).unwrap();

                assert!(bad.max_of("ivory_length") > 1e-5, "{kind:?} n={n}: {bad:?}");
            }
        }
    }

    #[test]
    fn elliptic_coordinates_of_qc() {
        let q = diagonal_qc(&[r(1.0), r(0.5), r(1.0 / 3.0)]).unwrap();
        let x = CVector::from_vec(vec![c(0.4, 0.1), c(0.3, -0.2), c(0.9, 0.05)]);
        let zs = q.elliptic_coords(&x).unwrap();
        assert_eq!(zs.len(), 3);
        for z in &zs {
            assert!(q.q_eval_normal(&x, *z).unwrap().0.norm() < 1e-8);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let ni = q.q_eval_normal(&x, zs[i]).unwrap().1;
                let nj = q.q_eval_normal(&x, zs[j]).unwrap().1;
                assert!(ni.dot(&nj).norm() < 1e-8);
            }
        }
    }
}
