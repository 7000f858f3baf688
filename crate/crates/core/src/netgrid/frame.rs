//! Frame fields `(R, M, N)` of the deformation systems and their residual suites.
//!
//! Conventions: `E_k = e_k e_k^T` is the coefficient of `delta'` on primary
//! axis `k` and of `delta''` on secondary axis `n + k`; `Omega_l = d_{n+l}R R^T`.
//! Mixed 2-form coefficients are those of `du^j ^ du^{n+l}` (primary first).

use rayon::prelude::*;

use crate::confocal::{Quadric, QuadricKind};
use crate::error::{Error, Result};
use crate::linalg::{bsq, max_abs, max_abs_vec, r, CMatrix, CVector, C64};
use crate::lmap::LMap;
use crate::report::ResidualReport;

use super::forms::{constant_one_form, FormField};
use super::grid::{Field, GridSpec};

/// Constant data of a (I)QWC entering the systems, restricted to `C^n`.
#[derive(Debug, Clone)]
pub struct FrameModel {
    pub kind: QuadricKind,
    pub n: usize,
    /// `n x n` block of `A'`.
    pub a_prime: CMatrix,
    /// `I_{1,n} L^{-1} B`.
    pub lb: CVector,
    pub b_sq: C64,
    /// `n x n` block of `calA = L^T L`.
    pub cal_a: CMatrix,
    /// First `n` entries of the last row of `calA`.
    pub cal_a_last: CVector,
    /// `n x n` block of `calA^2`.
    pub cal_a2: CMatrix,
    /// Full `L` and `L^{-1}` for realization.
    pub l: CMatrix,
    pub l_inv: CMatrix,
}

impl FrameModel {
    pub fn new(q: &Quadric, lm: &LMap) -> Self {
        let n = q.n;
        let full2 = &lm.cal_a * &lm.cal_a;
        FrameModel {
            kind: q.kind,
            n,
            a_prime: lm.a_prime_nn(),
            lb: lm.lb(q),
            b_sq: bsq(&q.b),
            cal_a: lm.cal_a.view((0, 0), (n, n)).into_owned(),
            cal_a_last: lm.cal_a.row(n).columns(0, n).transpose(),
            cal_a2: full2.view((0, 0), (n, n)).into_owned(),
            l: lm.l.clone(),
            l_inv: lm.l_inv.clone(),
        }
    }

    /// `Lambda^T Lambda + V^T A' V + 2 V^T L^{-1} B + |B|^2`.
    pub fn prime_integral(&self, v: &CVector, lam: &CVector) -> C64 {
        bsq(lam) + v.dot(&(&self.a_prime * v)) + v.dot(&self.lb) * 2.0 + self.b_sq
    }

    /// `H = |(L^T)^{-1} V + B|^2`.
    pub fn h_value(&self, v: &CVector) -> C64 {
        v.dot(&(&self.a_prime * v)) + v.dot(&self.lb) * 2.0 + self.b_sq
    }

    pub fn is_diagonal(&self) -> bool {
        crate::linalg::is_diagonal(&self.a_prime)
    }
}

pub fn ek(n: usize, k: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(k, k)] = r(1.0);
    e
}

/// `M E_l`: keep column `l` only.
pub fn col_only(m: &CMatrix, l: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    out.set_column(l, &m.column(l));
    out
}

/// `R` with derivatives along every axis, plus optional `M`, `N`.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub r: Field,
    pub dr: Vec<Field>,
    pub m: Option<Field>,
    pub nmat: Option<Field>,
}

impl FrameField {
    /// Derivatives of `R` taken by the order-2 stencil.
    pub fn from_r(r: Field) -> Self {
        let dr = (0..r.grid.ndim()).map(|a| r.partial(a)).collect();
        FrameField { r, dr, m: None, nmat: None }
    }

    /// Derivatives supplied by the caller (closed form or from the flow).
    pub fn with_derivatives(r: Field, dr: Vec<Field>) -> Self {
        assert_eq!(dr.len(), r.grid.ndim());
        FrameField { r, dr, m: None, nmat: None }
    }

    pub fn with_mn(mut self, m: Field, nmat: Field) -> Self {
        self.m = Some(m);
        self.nmat = Some(nmat);
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.r.grid
    }

    pub fn n(&self) -> usize {
        self.r.data[0].nrows()
    }

    pub fn m_or_zero(&self) -> Field {
        self.m.clone().unwrap_or_else(|| Field::constant(self.grid(), &CMatrix::zeros(self.n(), self.n())))
    }

    pub fn n_or_zero(&self) -> Field {
        self.nmat.clone().unwrap_or_else(|| Field::constant(self.grid(), &CMatrix::zeros(self.n(), self.n())))
    }

    /// `omega'_k = sum_j [(R^T R_j)_{jk} E_{jk} + (R^T R_j)_{kj} E_{kj}]` at one point.
    pub fn omega_at(&self, i: usize, k: usize) -> CMatrix {
        let n = self.n();
        let rt = self.r.data[i].transpose();
        let mut w = CMatrix::zeros(n, n);
        for j in 0..n {
            let x = &rt * &self.dr[j].data[i];
            w[(j, k)] += x[(j, k)];
            w[(k, j)] += x[(k, j)];
        }
        w
    }

    /// `Omega_l = d_{n+l}R R^T` at one point.
    pub fn big_omega_at(&self, i: usize, l: usize) -> CMatrix {
        let n = self.n();
        &self.dr[n + l].data[i] * self.r.data[i].transpose()
    }

    pub fn omega_field(&self, k: usize) -> Field {
        let data = (0..self.grid().npoints()).into_par_iter().map(|i| self.omega_at(i, k)).collect();
        Field { grid: self.grid().clone(), data }
    }

    pub fn big_omega_field(&self, l: usize) -> Field {
        let data = (0..self.grid().npoints()).into_par_iter().map(|i| self.big_omega_at(i, l)).collect();
        Field { grid: self.grid().clone(), data }
    }
}

/// Frames together with a solution `(V, Lambda)` of the moving-frame system.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub frames: FrameField,
    pub v: Field,
    pub lam: Field,
}

impl FrameState {
    pub fn v_at(&self, i: usize) -> CVector {
        self.v.data[i].column(0).into_owned()
    }

    pub fn lam_at(&self, i: usize) -> CVector {
        self.lam.data[i].column(0).into_owned()
    }
}

/// `omega'` as a 1-form over the primary axes.
pub fn omega_prime(frames: &FrameField) -> FormField {
    let n = frames.n();
    FormField::one_form(frames.grid(), (0..n).map(|k| (k, frames.omega_field(k))).collect())
}

/// Pointwise `max |omega'_k + omega'_k^T|`.
pub fn omega_antisymmetry(frames: &FrameField) -> Vec<f64> {
    let n = frames.n();
    (0..frames.grid().npoints())
        .into_par_iter()
        .map(|i| (0..n).map(|k| max_abs(&(frames.omega_at(i, k) + frames.omega_at(i, k).transpose()))).fold(0.0, f64::max))
        .collect()
}

fn orthogonality(frames: &FrameField) -> Vec<f64> {
    let n = frames.n();
    let id = CMatrix::identity(n, n);
    frames.r.data.par_iter().map(|r| max_abs(&(r.transpose() * r - &id))).collect()
}

/// Residuals of `d'^omega' = omega'^omega' - delta'R^T A'R ^ delta'` ("structure"),
/// `omega' ^ delta' = delta' ^ R^T d'R` ("cartan") and `R^T R = I` ("orthogonality").
pub fn residual_defqwc(frames: &FrameField, a_prime: &CMatrix) -> ResidualReport {
    let g = frames.grid();
    let n = frames.n();
    let prim: Vec<usize> = g.primary_axes();
    let om = omega_prime(frames);
    let delta = constant_one_form(g, prim.iter().map(|&k| (k, ek(n, k))).collect());
    let rar = FormField::one_form(
        g,
        prim.iter().map(|&k| (k, frames.r.map(|rr| ek(n, k) * rr.transpose() * a_prime * rr))).collect(),
    );
    let rtdr = FormField::one_form(
        g,
        prim.iter().map(|&k| (k, frames.r.zip_map(&frames.dr[k], |rr, d| rr.transpose() * d))).collect(),
    );
    let line1 = om.d_wedge(&prim).sub(&om.wedge(&om).sub(&rar.wedge(&delta)));
    let line2 = om.wedge(&delta).sub(&delta.wedge(&rtdr));
    let mut rep = ResidualReport::new("defqwc").with_h(g.max_step());
    rep.push("structure", &line1.pointwise_norms());
    rep.push("cartan", &line2.pointwise_norms());
    rep.push("orthogonality", &orthogonality(frames));
    rep
}

/// Diagnostics of [`extract_mn`].
#[derive(Debug, Clone, Default)]
pub struct ExtractInfo {
    /// Points where the `M` system was rank deficient (min-norm solution used).
    pub rank_deficient: usize,
    /// Largest relative residual of the matching systems.
    pub max_relative_residual: f64,
}

/// Recover `M` and `N` from `R` by matching `d''^omega'` and the `N` relation.
///
/// Per point and secondary index `l`, column `m_l = M e_l` solves
/// `d_{n+l} omega'_k = R_{lk} (m_l e_k^T - e_k m_l^T)` for all `k` in the least
/// squares sense, and `n_l = N e_l` is read from
/// `Omega_l A' - A' Omega_l = n_l e_l^T + e_l n_l^T`.
pub fn extract_mn(frames: &FrameField, a_prime: &CMatrix, tol: f64) -> Result<(Field, Field, ExtractInfo)> {
    let g = frames.grid().clone();
    if g.extra == 0 {
        return Err(Error::MissingAxes("extract_mn needs secondary axes".into()));
    }
    let n = frames.n();
    let om: Vec<Field> = (0..n).map(|k| frames.omega_field(k)).collect();
    let dom: Vec<Vec<Field>> = (0..g.extra).map(|l| om.iter().map(|w| w.partial(n + l)).collect()).collect();
    let results: Vec<(CMatrix, CMatrix, bool, f64)> = (0..g.npoints())
        .into_par_iter()
        .map(|i| {
            let rr = &frames.r.data[i];
            let mut mm = CMatrix::zeros(n, n);
            let mut nn = CMatrix::zeros(n, n);
            let mut deficient = false;
            let mut worst = 0.0f64;
            for l in 0..g.extra {
                // Rows: entries (a, k) of each d_{n+l} omega'_k; unknowns: m_l.
                let mut sys = CMatrix::zeros(n * n * n, n);
                let mut rhs = CVector::zeros(n * n * n);
                let mut row = 0;
                for k in 0..n {
                    let t = &dom[l][k].data[i];
                    let rlk = rr[(l, k)];
                    for a in 0..n {
                        for b in 0..n {
                            if a != k && b == k {
                                sys[(row, a)] += rlk;
                            }
                            if a == k && b != k {
                                sys[(row, b)] -= rlk;
                            }
                            rhs[row] = t[(a, b)];
                            row += 1;
                        }
                    }
                }
                let svd = sys.clone().svd(true, true);
                let smax = svd.singular_values.max();
                let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax.max(1e-300)).count();
                if rank < n {
                    deficient = true;
                }
                let ml = svd.solve(&rhs, 1e-8 * smax.max(1e-300)).unwrap_or_else(|_| CVector::zeros(n));
                let resid = max_abs_vec(&(&sys * &ml - &rhs));
                let scale = max_abs_vec(&rhs).max(1e-300);
                if max_abs_vec(&rhs) > 1e-13 {
                    worst = worst.max(resid / scale);
                }
                mm.set_column(l, &ml);
                let om_l = frames.big_omega_at(i, l);
                let s = &om_l * a_prime - a_prime * &om_l;
                let mut nl = CVector::zeros(n);
                for a in 0..n {
                    nl[a] = if a == l { s[(l, l)] / 2.0 } else { s[(a, l)] };
                }
                let rebuilt = &nl * crate::linalg::unit(n, l).transpose() + crate::linalg::unit(n, l) * nl.transpose();
                let sres = max_abs(&(rebuilt - &s));
                let sscale = max_abs(&s);
                if sscale > 1e-13 {
                    worst = worst.max(sres / sscale);
                }
                nn.set_column(l, &nl);
            }
            (mm, nn, deficient, worst)
        })
        .collect();
    let mut info = ExtractInfo::default();
    let mut mdata = Vec::with_capacity(results.len());
    let mut ndata = Vec::with_capacity(results.len());
    for (m, nm, d, w) in results {
        mdata.push(m);
        ndata.push(nm);
        info.rank_deficient += d as usize;
        info.max_relative_residual = info.max_relative_residual.max(w);
    }
    if info.max_relative_residual > tol {
        return Err(Error::Inconsistent(format!(
            "matching system residual {:.3e} exceeds {tol:.1e}; R does not solve the extended system",
            info.max_relative_residual
        )));
    }
    Ok((Field { grid: g.clone(), data: mdata }, Field { grid: g, data: ndata }, info))
}

/// Residuals of the extended compatibility conditions.
///
/// Entries (one per displayed group of conditions):
/// * `ext1` `d'^omega' = omega'^omega' - delta'R^TA'R ^ delta'`
/// * `ext2` `omega' ^ delta' = delta' ^ R^T d'R`
/// * `ext3` `d''^omega' = M delta'' ^ R delta' + delta'R^T ^ delta''M^T`
/// * `ext4` `d'^(d''R R^T) = delta''M^T ^ delta'R^T + R delta' ^ M delta''`
/// * `ext5` `d'^(M delta'') = omega' ^ M delta'' + delta'R^T ^ N delta''`
/// * `ext6` `d'^(N delta'') = R delta' ^ M delta'' A' - A'R delta' ^ M delta''`
/// * `ext7` `d''^(M delta'') = M delta'' ^ X`, `X = d''RR^T + calA delta''N^T`
/// * `ext8` `d''^(N delta'') = delta''M^T ^ M delta'' + N delta'' ^ X + d''RR^T ^ N delta''`
/// * `ext9` `A' d''RR^T + delta''N^T = d''RR^T A' - N delta''`
/// * `ext10` `M delta'' calA ^ delta''M^T = 0`, `e^T calA delta''M^T = e^T calA delta''N^T = 0`,
///   `e^T calA d''RR^T L^{-1}B = 0`
/// * `ext11` `M delta'' L^{-1}B = 0`, `M delta'' calA ^ d''RR^T L^{-1}B = N delta'' calA ^ d''RR^T L^{-1}B = 0`
/// * `newcond1` the 3-form `M delta'' calA ^ delta''N^T ^ R delta' + delta'R^T ^ N delta'' ^ calA delta''M^T`
/// * `newcond2` the conditions with `A'^k L^{-1}B`, `k = 0..n-1`
/// * `geomcond1..3` `M calA ^ calA M^T`, `N calA ^ calA M^T`, `N calA ^ calA N^T`
/// * `orthogonality` `R^T R - I`
pub fn residual_extended(frames: &FrameField, model: &FrameModel) -> ResidualReport {
    let g = frames.grid().clone();
    let n = frames.n();
    let ex = g.extra;
    let mf = frames.m_or_zero();
    let nf = frames.n_or_zero();
    let om: Vec<Field> = (0..n).map(|k| frames.omega_field(k)).collect();
    let bo: Vec<Field> = (0..ex).map(|l| frames.big_omega_field(l)).collect();
    let nd = g.ndim();
    let dom: Vec<Vec<Field>> = (0..nd).map(|a| om.iter().map(|w| w.partial(a)).collect()).collect();
    let dbo: Vec<Vec<Field>> = (0..n).map(|a| bo.iter().map(|w| w.partial(a)).collect()).collect();
    let dm: Vec<Field> = (0..nd).map(|a| mf.partial(a)).collect();
    let dn: Vec<Field> = (0..nd).map(|a| nf.partial(a)).collect();
    let ap = &model.a_prime;
    let ca = &model.cal_a;
    let ca2 = &model.cal_a2;
    let lb = &model.lb;
    let id = CMatrix::identity(n, n);
    let e = |k: usize| ek(n, k);

    let rows: Vec<[f64; 17]> = (0..g.npoints())
        .into_par_iter()
        .map(|i| {
            let rr = &frames.r.data[i];
            let rt = rr.transpose();
            let m = &mf.data[i];
            let nm = &nf.data[i];
            let w: Vec<&CMatrix> = (0..n).map(|k| &om[k].data[i]).collect();
            let o: Vec<&CMatrix> = (0..ex).map(|l| &bo[l].data[i]).collect();
            let x: Vec<CMatrix> = (0..ex).map(|l| o[l] + ca * e(l) * nm.transpose()).collect();
            let rtdr: Vec<CMatrix> = (0..n).map(|k| &rt * &frames.dr[k].data[i]).collect();
            let mut v = [0.0f64; 17];
            let mut upd = |idx: usize, val: f64| v[idx] = v[idx].max(val);
            for j in 0..n {
                for k in j + 1..n {
                    let l1 = &dom[j][k].data[i] - &dom[k][j].data[i] - (w[j] * w[k] - w[k] * w[j])
                        + (e(j) * &rt * ap * rr * e(k) - e(k) * &rt * ap * rr * e(j));
                    upd(0, max_abs(&l1));
                    let l2 = (w[j] * e(k) - w[k] * e(j)) - (e(j) * &rtdr[k] - e(k) * &rtdr[j]);
                    upd(1, max_abs(&l2));
                }
            }
            for j in 0..n {
                for l in 0..ex {
                    let el = e(l);
                    let ml = m * &el;
                    let nl = nm * &el;
                    let l3 = -&dom[n + l][j].data[i] + &ml * rr * e(j) - e(j) * &rt * &el * m.transpose();
                    upd(2, max_abs(&l3));
                    let l4 = &dbo[j][l].data[i] + &el * m.transpose() * e(j) * &rt - rr * e(j) * &ml;
                    upd(3, max_abs(&l4));
                    let l5 = &dm[j].data[i] * &el - w[j] * &ml - e(j) * &rt * &nl;
                    upd(4, max_abs(&l5));
                    let l6 = &dn[j].data[i] * &el - (rr * e(j) * &ml * ap - ap * rr * e(j) * &ml);
                    upd(5, max_abs(&l6));
                }
            }
            for l in 0..ex {
                for p in l + 1..ex {
                    let (el, ep) = (e(l), e(p));
                    let l7 = &dm[n + l].data[i] * &ep - &dm[n + p].data[i] * &el - (m * &el * &x[p] - m * &ep * &x[l]);
                    upd(6, max_abs(&l7));
                    let l8 = &dn[n + l].data[i] * &ep - &dn[n + p].data[i] * &el
                        - (&el * m.transpose() * m * &ep - &ep * m.transpose() * m * &el)
                        - (nm * &el * &x[p] - nm * &ep * &x[l])
                        - (o[l] * nm * &ep - o[p] * nm * &el);
                    upd(7, max_abs(&l8));
                    upd(9, max_abs(&(m * &el * ca * &ep * m.transpose() - m * &ep * ca * &el * m.transpose())));
                    let a = m * &el * ca * o[p] * lb - m * &ep * ca * o[l] * lb;
                    let b = nm * &el * ca * o[p] * lb - nm * &ep * ca * o[l] * lb;
                    upd(10, max_abs_vec(&a).max(max_abs_vec(&b)));
                    for j in 0..n {
                        let t = (m * &el * ca * &ep * nm.transpose() - m * &ep * ca * &el * nm.transpose()) * rr * e(j)
                            + e(j) * &rt * (nm * &el * ca * &ep * m.transpose() - nm * &ep * ca * &el * m.transpose());
                        upd(11, max_abs(&t));
                    }
                    let mut apk = id.clone();
                    for _ in 0..n {
                        let v1 = m * &el * ca * o[p] * &apk * lb - m * &ep * ca * o[l] * &apk * lb;
                        let v2 = nm * &el * ca * o[p] * &apk * lb - nm * &ep * ca * o[l] * &apk * lb;
                        upd(12, max_abs_vec(&v1).max(max_abs_vec(&v2)));
                        apk = &apk * ap;
                    }
                    upd(13, max_abs(&(m * &el * ca2 * &ep * m.transpose() - m * &ep * ca2 * &el * m.transpose())));
                    upd(14, max_abs(&(nm * &el * ca2 * &ep * m.transpose() - nm * &ep * ca2 * &el * m.transpose())));
                    upd(15, max_abs(&(nm * &el * ca2 * &ep * nm.transpose() - nm * &ep * ca2 * &el * nm.transpose())));
                }
                let el = e(l);
                let l9 = ap * o[l] + &el * nm.transpose() - (o[l] * ap - nm * &el);
                upd(8, max_abs(&l9));
                let last = model.cal_a_last.transpose();
                let a1 = &last * &el * m.transpose();
                let a2 = &last * &el * nm.transpose();
                let a3 = (&last * o[l] * lb)[0].norm();
                upd(9, a1.iter().chain(a2.iter()).map(|x| x.norm()).fold(a3, f64::max));
                upd(10, max_abs_vec(&(m * &el * lb)));
                let mut apk = id.clone();
                for _ in 0..n {
                    upd(12, max_abs_vec(&(m * &el * &apk * lb)).max(max_abs_vec(&(nm * &el * &apk * lb))));
                    apk = &apk * ap;
                }
            }
            v[16] = max_abs(&(&rt * rr - &id));
            v
        })
        .collect();
    let names = [
        "ext1", "ext2", "ext3", "ext4", "ext5", "ext6", "ext7", "ext8", "ext9", "ext10", "ext11", "newcond1", "newcond2",
        "geomcond1", "geomcond2", "geomcond3", "orthogonality",
    ];
    let mut rep = ResidualReport::new("extended").with_h(g.max_step());
    for (c, name) in names.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|row| row[c]).collect();
        rep.push(name, &col);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::sjcalc::random_rotation_scaled;

    fn rot2(t: C64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn constant_r_has_zero_omega() {
        let g = GridSpec::new(2, 0, 0.1, vec![5, 5]).unwrap();
        let fr = FrameField::from_r(Field::constant(&g, &rot2(c(0.3, 0.1))));
        assert!(omega_prime(&fr).pointwise_norms().iter().all(|&x| x < 1e-14));
    }

    #[test]
    fn identity_frame_defqwc() {
        let g = GridSpec::new(2, 0, 0.1, vec![5, 5]).unwrap();
        let fr = FrameField::from_r(Field::constant(&g, &CMatrix::identity(2, 2)));
        let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![r(1.0), r(0.5)]));
        assert!(residual_defqwc(&fr, &diag).worst() < 1e-12);
        let mut off = diag.clone();
        off[(0, 1)] = r(0.2);
        off[(1, 0)] = r(0.2);
        assert!(residual_defqwc(&fr, &off).max_of("structure") > 0.1);
    }

    #[test]
    fn only_orthogonal_frames_are_antisymmetric() {
        let g = GridSpec::new(3, 0, 0.05, vec![5, 5, 5]).unwrap();
        let s1 = random_rotation_scaled(3, 1, 0.5);
        let s2 = random_rotation_scaled(3, 2, 0.5);
        let fr = FrameField::from_r(Field::from_fn(&g, |u| {
            let a = crate::linalg::expm(&((&s1 - s1.transpose()) * r(u[0] + u[1] * u[2])));
            &a * &s2
        }));
        let asym = omega_antisymmetry(&fr).into_iter().fold(0.0, f64::max);
        assert!(asym < 1e-3);
        // a symmetric generator leaves the orthogonal group
        let bent = FrameField::from_r(Field::from_fn(&g, |u| {
            let a = crate::linalg::expm(&((&s1 + s1.transpose()) * r(u[0] + u[1] * u[2])));
            &a * &s2
        }));
        let asym = omega_antisymmetry(&bent).into_iter().fold(0.0, f64::max);
        assert!(asym > 1e-2);
    }
}
