//! Affine parametrization `x0 = L Z(V)` of quadrics without center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::confocal::{random_cvector, Quadric, QuadricKind};
use crate::error::{Error, Result};
use crate::linalg::{bsq, csqrt_vec_normalize, inverse, max_abs, max_abs_vec, r, sqrtm_dense, unit, CMatrix, CVector, C64};
use crate::report::ResidualReport;
use crate::sjcalc::{isotropic_vector, SJSpec};

#[derive(Debug, Clone)]
pub struct LMap {
    pub kind: QuadricKind,
    pub l: CMatrix,
    pub l_inv: CMatrix,
    /// `L^T A^2 L`; last row and column vanish.
    pub a_prime: CMatrix,
    /// `L^T L`.
    pub cal_a: CMatrix,
    /// Spanning vectors of `ker(A')`.
    pub kernel: Vec<CVector>,
    /// SJ data of `A'` when it is inherited from the quadric (QWC).
    pub a_prime_spec: Option<SJSpec>,
}

/// `Z(V) = V + |V|^2/2 e_{n+1}`.
pub fn z_of(v: &CVector) -> CVector {
    let n = v.len();
    let mut z = CVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(v);
    z[n] = bsq(v) / 2.0;
    z
}

pub fn build_lmap(q: &Quadric) -> Result<LMap> {
    let m = q.dim();
    let en = unit(m, m - 1);
    match q.kind {
        QuadricKind::QC => Err(Error::Invalid("the L-map exists only for QWC and IQWC".into())),
        QuadricKind::QWC => {
            let mut shifted = q.spec.clone();
            let last = shifted.blocks.len() - 1;
            shifted.blocks[last].re = 1.0;
            shifted.blocks[last].im = 0.0;
            let l = shifted.inv_sqrt()?;
            let l_inv = shifted.sqrt()?;
            Ok(LMap {
                kind: q.kind,
                cal_a: l.transpose() * &l,
                l,
                l_inv,
                a_prime: q.a.clone(),
                kernel: vec![en],
                a_prime_spec: Some(q.spec.clone()),
            })
        }
        QuadricKind::IQWC => {
            let f1 = isotropic_vector(1, m)?;
            let fb = f1.map(|z| z.conj());
            let g = &q.a + &fb * fb.transpose();
            let s = sqrtm_dense(&g)?;
            let rlast = &s * &f1;
            let rot = complete_rotation(&rlast)?;
            let s_inv = inverse(&s, "sqrt(A + conj(f1) conj(f1)^T)")?;
            let l = &s_inv * &rot;
            let l_inv = rot.transpose() * &s;
            let a_prime = l.transpose() * &q.a * &q.a * &l;
            let kf = l.transpose() * &f1;
            Ok(LMap {
                kind: q.kind,
                cal_a: l.transpose() * &l,
                l,
                l_inv,
                a_prime,
                kernel: vec![en, kf],
                a_prime_spec: None,
            })
        }
    }
}

/// Complex rotation with last column `r` (`|r|^2 = 1`), completed by bilinear
/// Gram-Schmidt over `e_1, e_2, ...`, skipping near-isotropic candidates.
pub fn complete_rotation(rl: &CVector) -> Result<CMatrix> {
    let m = rl.len();
    let nr = bsq(rl);
    if (nr - r(1.0)).norm() > 1e-8 {
        return Err(Error::Completion(format!("|r|^2 = {nr} is not 1")));
    }
    let mut basis: Vec<CVector> = vec![rl.clone()];
    for k in 0..m {
        if basis.len() == m {
            break;
        }
        let mut v = unit(m, k);
        for _ in 0..2 {
            for u in &basis {
                let p = u.dot(&v);
                v -= u * p;
            }
        }
        if bsq(&v).norm() < 1e-6 * v.dotc(&v).re.max(1e-300) || v.dotc(&v).re < 1e-12 {
            continue;
        }
        basis.push(csqrt_vec_normalize(&v)?);
    }
    if basis.len() < m {
        return Err(Error::Completion("isotropic obstruction in the candidate basis".into()));
    }
    let mut rot = CMatrix::zeros(m, m);
    for (j, u) in basis[1..].iter().enumerate() {
        rot.set_column(j, u);
    }
    rot.set_column(m - 1, rl);
    Ok(rot)
}

impl LMap {
    pub fn n(&self) -> usize {
        self.l.nrows() - 1
    }

    pub fn point(&self, v: &CVector) -> CVector {
        &self.l * z_of(v)
    }

    /// `I_{1,n} L^{-1} B` as an `n`-vector.
    pub fn lb(&self, q: &Quadric) -> CVector {
        let full = &self.l_inv * &q.b;
        full.rows(0, self.n()).into_owned()
    }

    /// Upper-left `n x n` block of `A'`.
    pub fn a_prime_nn(&self) -> CMatrix {
        let n = self.n();
        self.a_prime.view((0, 0), (n, n)).into_owned()
    }

    /// `sqrt(I - z A')` on the csqrt branch.
    pub fn sqrt_r_prime(&self, z: C64) -> Result<CMatrix> {
        let m = self.l.nrows();
        match &self.a_prime_spec {
            Some(spec) => spec.affine_power(r(1.0), -z, 1),
            None => {
                let rp = CMatrix::identity(m, m) - &self.a_prime * z;
                sqrtm_dense(&rp)
            }
        }
    }

    pub fn invariants(&self, q: &Quadric) -> f64 {
        let m = q.dim();
        let mut i1n = CMatrix::identity(m, m);
        i1n[(m - 1, m - 1)] = r(0.0);
        let mut res = max_abs(&(self.l.transpose() * &q.a * &self.l - i1n));
        let en = unit(m, m - 1);
        res = res.max(max_abs_vec(&(self.l.transpose() * &q.b + &en)));
        res = res.max(max_abs(&(&self.a_prime - self.a_prime.transpose())));
        for k in &self.kernel {
            res = res.max(max_abs_vec(&(&self.a_prime * k)));
        }
        res
    }

    /// JSON export of `L` and `A'` with entries as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out {
            l: Vec<Vec<[f64; 2]>>,
            a_prime: Vec<Vec<[f64; 2]>>,
        }
        serde_json::to_value(Out { l: pairs(&self.l), a_prime: pairs(&self.a_prime) }).unwrap()
    }
}

pub fn pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn i1n_vec(v: &CVector) -> CVector {
    let mut w = v.clone();
    let k = w.len() - 1;
    w[k] = r(0.0);
    w
}

/// The five identities tying `L`, `C(z)`, `sqrt(R_z)` and `sqrt(R'_z)` together.
///
/// Entry `lies_on_z` (`|I L^{-1} C|^2 = 2 e^T L^{-1} C`) holds for IQWC only;
/// for QWC it carries no samples and a note says so.
pub fn lmap_identity_suite(q: &Quadric, lm: &LMap, z: C64, samples: usize, seed: u64) -> Result<ResidualReport> {
    let m = q.dim();
    let n = m - 1;
    let srz = q.sqrt_rz(z)?;
    let srp = lm.sqrt_r_prime(z)?;
    let cz = q.c_vector(z)?;
    let lic = &lm.l_inv * &cz;
    let ilic = i1n_vec(&lic);
    let en = unit(m, m - 1);
    let mut i1n = CMatrix::identity(m, m);
    i1n[(n, n)] = r(0.0);
    let mut rep = ResidualReport::new("lmap");

    let conj = &lm.l_inv * &srz * &lm.l;
    let r1 = max_abs(&(&i1n * &conj - &i1n * &srp));
    let e_row = conj.row(n).transpose();
    let r2 = max_abs_vec(&(e_row - (-&ilic + &en)));
    let lhs4 = (CMatrix::identity(m, m) + &srp) * &ilic;
    let rhs4 = i1n_vec(&(&lm.l_inv * &q.b)) * (-z);
    let r4 = max_abs_vec(&(lhs4 - rhs4));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lbn = lm.lb(q);
    let bsq_b = bsq(&q.b);
    let ap = lm.a_prime_nn();
    let mut r5 = Vec::with_capacity(samples);
    let mut rt = Vec::with_capacity(samples);
    for _ in 0..samples.max(1) {
        let v0 = random_cvector(&mut rng, n, 0.5);
        let v1 = random_cvector(&mut rng, n, 0.5);
        let x0 = lm.point(&v0);
        let nh = q.normal0(&x0);
        let quad = v0.dot(&(&ap * &v0)) + v0.dot(&lbn) * 2.0 + bsq_b;
        r5.push((bsq(&nh) - quad).norm());
        let x1 = lm.point(&v1);
        let xz1 = &srz * &x1 + &cz;
        let ambient = (&xz1 - &x0).dot(&nh);
        let (z0, z1) = (z_of(&v0), z_of(&v1));
        let formula = z0.dot(&(&i1n * &srp * &z1)) + (&z0 + &z1).dot(&(&ilic - &en)) - lic[n];
        rt.push((ambient - formula).norm());
        let _ = rng.random::<u8>();
    }
    rep.push("conj_sqrt", &[r1]);
    rep.push("last_row", &[r2]);
    if q.kind == QuadricKind::IQWC {
        rep.push("lies_on_z", &[(bsq(&ilic) - lic[n] * 2.0).norm()]);
    } else {
        rep.push("lies_on_z", &[]);
        rep.note("lies_on_z holds for IQWC only; not applicable to QWC");
    }
    rep.push("c_relation", &[r4]);
    rep.push("normal_norm", &r5);
    rep.push("tangency_z", &rt);
    Ok(rep)
}
