//! Bäcklund transformations of (I)QWC deformations and the permutability
//! quadrilateral.
//!
//! A transformation with spectral parameter `z` and signed root `s = ±sqrt(z)`
//! uses `D = sqrt(I - z A') / s`. The rotation `R_1` of the leaf solves the
//! Ricatti system
//!
//! ```text
//! d_k R_1     = D R_0 E_k - R_1 omega'_0k - R_1 E_k R_0^T D R_1
//! d_{n+l} R_1 = D^-1 (Omega_0l D^2 + N_0 E_l) D^-1 R_1 + D^-1 E_l M_0^T - R_1 M_0 E_l D^-1 R_1
//! ```
//!
//! and the leaf itself is algebraic in `(V_0, Lambda_0, R_0, R_1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confocal::Quadric;
use crate::error::{Error, Result};
use crate::linalg::{as_col, inverse, is_diagonal, max_abs, r, sqrtm_dense, CMatrix, CVector, C64};
use crate::netgrid::frame::{ek, residual_extended, FrameField, FrameModel, FrameState};
use crate::netgrid::grid::Field;
use crate::netgrid::integrate::{integrate_sweeps, plaquette, system_residual, FrameSystem, SweepOptions, SweepSystem};
use crate::netgrid::realize::{x0_tangent, FundamentalSystem};
use crate::report::ResidualReport;
use crate::sjcalc::csqrt;

/// Spectral data of one transformation.
#[derive(Debug, Clone)]
pub struct BTParams {
    pub z: C64,
    /// `+1` or `-1`.
    pub branch: i8,
    /// Signed `sqrt(z)`.
    pub sqrt_z: C64,
    /// `sqrt(R'_z) = sqrt(I - z A')`.
    pub sqrt_rp: CMatrix,
    pub d: CMatrix,
    pub d_inv: CMatrix,
    /// `I_{1,n} L^{-1} C(z)`; zero unless set from a quadric.
    pub lc: CVector,
}

pub fn dmat(a_prime: &CMatrix, z: C64, branch: i8) -> Result<BTParams> {
    let n = a_prime.nrows();
    if z.norm() < 1e-14 {
        return Err(Error::Precondition("z = 0".into()));
    }
    if branch != 1 && branch != -1 {
        return Err(Error::Invalid(format!("branch must be +1 or -1, got {branch}")));
    }
    let rp = CMatrix::identity(n, n) - a_prime * z;
    for ev in crate::linalg::eigenvalues(&rp) {
        if ev.norm() < 1e-10 {
            return Err(Error::Resonance { z });
        }
    }
    let sqrt_rp = if is_diagonal(a_prime) {
        let d: Vec<C64> = (0..n).map(|j| csqrt(rp[(j, j)])).collect::<Result<_>>()?;
        CMatrix::from_diagonal(&CVector::from_vec(d))
    } else {
        sqrtm_dense(&rp)?
    };
    let sqrt_z = csqrt(z)? * f64::from(branch);
    let d = &sqrt_rp / sqrt_z;
    let d_inv = inverse(&d, "D")?;
    Ok(BTParams { z, branch, sqrt_z, sqrt_rp, d, d_inv, lc: CVector::zeros(n) })
}

impl BTParams {
    /// Parameters for a quadric, including the offset `I_{1,n} L^{-1} C(z)`.
    pub fn for_quadric(q: &Quadric, model: &FrameModel, z: C64, branch: i8) -> Result<Self> {
        let mut bt = dmat(&model.a_prime, z, branch)?;
        let c = q.c_vector(z)?;
        bt.lc = (&model.l_inv * c).rows(0, model.n).into_owned();
        Ok(bt)
    }

    /// The same `z` with the other root.
    pub fn flipped(&self) -> Self {
        BTParams {
            branch: -self.branch,
            sqrt_z: -self.sqrt_z,
            d: -&self.d,
            d_inv: -&self.d_inv,
            ..self.clone()
        }
    }
}

/// The Ricatti system of `R_1` over a fixed seed frame.
pub struct RicattiSystem<'a> {
    pub seed: &'a FrameField,
    pub bt: &'a BTParams,
    m: Field,
    nmat: Field,
}

impl<'a> RicattiSystem<'a> {
    pub fn new(seed: &'a FrameField, bt: &'a BTParams) -> Self {
        RicattiSystem { seed, bt, m: seed.m_or_zero(), nmat: seed.n_or_zero() }
    }
}

impl SweepSystem for RicattiSystem<'_> {
    /// `[P, Q, S, T]` with `R_a = P + Q R + R S + R T R`.
    fn coeffs(&self, i: usize, axis: usize) -> Vec<CMatrix> {
        let n = self.seed.n();
        let r0 = &self.seed.r.data[i];
        let (d, di) = (&self.bt.d, &self.bt.d_inv);
        let zero = CMatrix::zeros(n, n);
        if axis < n {
            let e = ek(n, axis);
            vec![d * r0 * &e, zero, -self.seed.omega_at(i, axis), -(&e * r0.transpose() * d)]
        } else {
            let l = axis - n;
            let e = ek(n, l);
            let om = self.seed.big_omega_at(i, l);
            let m0 = &self.m.data[i];
            let n0 = &self.nmat.data[i];
            vec![
                di * &e * m0.transpose(),
                di * (om * d * d + n0 * &e) * di,
                zero,
                -(m0 * &e * di),
            ]
        }
    }

    fn rhs(&self, c: &[CMatrix], y: &CMatrix) -> CMatrix {
        &c[0] + &c[1] * y + y * &c[2] + y * &c[3] * y
    }
}

/// Pointwise `max |R R^T - I|`.
pub fn orthogonality(r: &Field) -> Vec<f64> {
    let n = r.data[0].nrows();
    let id = CMatrix::identity(n, n);
    r.data.par_iter().map(|m| max_abs(&(m * m.transpose() - &id))).collect()
}

/// `R_1` with derivatives from the flow, plus diagnostics.
#[derive(Debug, Clone)]
pub struct RicattiRun {
    pub r: Field,
    /// `d_a R_1` evaluated from the right-hand side.
    pub dr: Vec<Field>,
    pub report: ResidualReport,
}

pub fn integrate_ricatti(seed: &FrameField, bt: &BTParams, r1_init: &CMatrix, opts: SweepOptions) -> Result<RicattiRun> {
    let grid = seed.grid().clone();
    let sys = RicattiSystem::new(seed, bt);
    let ys = integrate_sweeps(&sys, &grid, r1_init, opts)?;
    let axes: Vec<usize> = (0..grid.ndim()).collect();
    let (plaq, expected) = plaquette(&sys, &grid, &ys, &axes);
    let pde = system_residual(&sys, &grid, &ys, &axes);
    let dr: Vec<Field> = axes
        .iter()
        .map(|&a| Field {
            grid: grid.clone(),
            data: (0..grid.npoints()).into_par_iter().map(|i| sys.rhs(&sys.coeffs(i, a), &ys[i])).collect(),
        })
        .collect();
    let r = Field { grid: grid.clone(), data: ys };
    let mut report = ResidualReport::new("ricatti").with_h(grid.max_step());
    report.push("orthogonality", &orthogonality(&r));
    report.push("plaquette", &plaq);
    report.push("pde", &pde);
    report.note(format!("plaquette expectation h^2 S = {expected:.3e}"));
    if !is_diagonal(&bt.sqrt_rp) && grid.extra > 0 {
        report.note("warning: non-diagonal A' with secondary axes; integrability of the extended flow is not guaranteed");
    }
    Ok(RicattiRun { r, dr, report })
}

/// The algebraic transform at one point:
/// `V_1 = sqrt(R') V_0 - s R_1 Lambda_0 + lc`,
/// `Lambda_1 = R_0^T (s A' V_0 + sqrt(R') R_1 Lambda_0 + s lb)`.
pub fn leaf_point(
    model: &FrameModel,
    bt: &BTParams,
    v0: &CVector,
    lam0: &CVector,
    r0: &CMatrix,
    r1: &CMatrix,
) -> (CVector, CVector) {
    let s = bt.sqrt_z;
    let v1 = &bt.sqrt_rp * v0 - r1 * lam0 * s + &bt.lc;
    let l1 = r0.transpose() * ((&model.a_prime * v0) * s + &bt.sqrt_rp * (r1 * lam0) + &model.lb * s);
    (v1, l1)
}

/// `(V_1, Lambda_1)` over the grid.
pub fn leaf(seed: &FrameState, r1: &Field, bt: &BTParams, model: &FrameModel) -> (Field, Field) {
    let grid = seed.v.grid.clone();
    let pairs: Vec<(CMatrix, CMatrix)> = (0..grid.npoints())
        .into_par_iter()
        .map(|i| {
            let (v, l) = leaf_point(model, bt, &seed.v_at(i), &seed.lam_at(i), &seed.frames.r.data[i], &r1.data[i]);
            (as_col(&v), as_col(&l))
        })
        .collect();
    let (v, l): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    (Field { grid: grid.clone(), data: v }, Field { grid, data: l })
}

/// `M_1 E_l = R_0^T (D R_1 M_0 - N_0) E_l D^-1`, `N_1 E_l = (A' R_1 M_0 E_l - R_1 M_0 E_l A' + D N_0 E_l) D^-1`.
/// Returns `(M_1, N_1, leakage)` where `leakage` is the part of the right-hand
/// sides outside column `l`.
pub fn leaf_frames(seed: &FrameField, r1: &Field, bt: &BTParams, a_prime: &CMatrix) -> Result<(Field, Field, Vec<f64>)> {
    let n = seed.n();
    for j in 0..n - 1 {
        if a_prime[(j, n - 1)].norm() > 1e-12 {
            return Err(Error::Precondition("leaf frames need A' e_n in C e_n".into()));
        }
    }
    let grid = seed.grid().clone();
    let extra = grid.extra;
    let m0 = seed.m_or_zero();
    let n0 = seed.n_or_zero();
    let out: Vec<(CMatrix, CMatrix, f64)> = (0..grid.npoints())
        .into_par_iter()
        .map(|i| {
            let (r0, r1) = (&seed.r.data[i], &r1.data[i]);
            let mut m1 = CMatrix::zeros(n, n);
            let mut n1 = CMatrix::zeros(n, n);
            let mut leak = 0.0f64;
            for l in 0..extra {
                let e = ek(n, l);
                let cm = r0.transpose() * (&bt.d * r1 * &m0.data[i] - &n0.data[i]) * &e * &bt.d_inv;
                let rme = r1 * &m0.data[i] * &e;
                let cn = (a_prime * &rme - &rme * a_prime + &bt.d * &n0.data[i] * &e) * &bt.d_inv;
                for (src, dst) in [(&cm, &mut m1), (&cn, &mut n1)] {
                    dst.set_column(l, &src.column(l));
                    let mut rest = src.clone();
                    rest.column_mut(l).fill(r(0.0));
                    leak = leak.max(max_abs(&rest));
                }
            }
            (m1, n1, leak)
        })
        .collect();
    let mut mf = Vec::with_capacity(out.len());
    let mut nf = Vec::with_capacity(out.len());
    let mut leak = Vec::with_capacity(out.len());
    for (a, b, c) in out {
        mf.push(a);
        nf.push(b);
        leak.push(c);
    }
    Ok((Field { grid: grid.clone(), data: mf }, Field { grid, data: nf }, leak))
}

/// A leaf of a Bäcklund transformation.
#[derive(Debug, Clone)]
pub struct LeafState {
    pub state: FrameState,
    pub params: BTParams,
    /// Identifier of the seed this leaf was built from.
    pub seed_id: String,
    pub report: ResidualReport,
}

/// Build the full leaf state from an integrated `R_1`.
pub fn transform(seed: &FrameState, run: &RicattiRun, bt: &BTParams, model: &FrameModel, seed_id: &str) -> Result<LeafState> {
    let grid = seed.v.grid.clone();
    let (v1, l1) = leaf(seed, &run.r, bt, model);
    let mut frames = FrameField::with_derivatives(run.r.clone(), run.dr.clone());
    let mut report = ResidualReport::new("leaf").with_h(grid.max_step());
    if grid.extra > 0 {
        let (m1, n1, leak) = leaf_frames(&seed.frames, &run.r, bt, &model.a_prime)?;
        frames = frames.with_mn(m1, n1);
        report.push("frame_leakage", &leak);
    }
    let pi: Vec<f64> = (0..grid.npoints())
        .into_par_iter()
        .map(|i| model.prime_integral(&v1.data[i].column(0).into_owned(), &l1.data[i].column(0).into_owned()).norm())
        .collect();
    report.push("prime_integral", &pi);
    let ext = residual_extended(&frames, model);
    report.merge(ext, "extended");
    let sys = FrameSystem::new(&frames, model, false);
    let ys: Vec<CMatrix> = v1
        .data
        .iter()
        .zip(&l1.data)
        .map(|(v, l)| {
            let mut y = CMatrix::zeros(2 * model.n, 1);
            y.view_mut((0, 0), (model.n, 1)).copy_from(v);
            y.view_mut((model.n, 0), (model.n, 1)).copy_from(l);
            y
        })
        .collect();
    let axes: Vec<usize> = (0..grid.ndim()).collect();
    report.push("moving_frame", &system_residual(&sys, &grid, &ys, &axes));
    let state = FrameState { frames, v: v1, lam: l1 };
    Ok(LeafState { state, params: bt.clone(), seed_id: seed_id.into(), report })
}

/// The inverse transform `(branch flipped, R_0 <-> R_1)` applied to a leaf point.
pub fn involution_point(
    model: &FrameModel,
    bt: &BTParams,
    v1: &CVector,
    lam1: &CVector,
    r0: &CMatrix,
    r1: &CMatrix,
) -> (CVector, CVector) {
    leaf_point(model, &bt.flipped(), v1, lam1, r1, r0)
}

/// Pointwise distance of the inverse transform of the leaf from the seed.
pub fn involution_residual(seed: &FrameState, leaf: &LeafState, model: &FrameModel) -> Vec<f64> {
    (0..seed.v.grid.npoints())
        .into_par_iter()
        .map(|i| {
            let (v, l) = involution_point(
                model,
                &leaf.params,
                &leaf.state.v_at(i),
                &leaf.state.lam_at(i),
                &seed.frames.r.data[i],
                &leaf.state.frames.r.data[i],
            );
            crate::linalg::max_abs_vec(&(v - seed.v_at(i))).max(crate::linalg::max_abs_vec(&(l - seed.lam_at(i))))
        })
        .collect()
}

/// `x^1 = x^0 + [V_1 .. V_{2n-1}]^T (sqrt(R') V_1 - V_0 + lc)`.
pub fn leaf_space(x0: &Field, fs: &FundamentalSystem, v0: &Field, v1: &Field, bt: &BTParams) -> Field {
    let data = (0..x0.grid.npoints())
        .into_par_iter()
        .map(|i| {
            let w = &bt.sqrt_rp * v1.data[i].column(0) - v0.data[i].column(0) + &bt.lc;
            &x0.data[i] + as_col(&(fs.cal_v(i).transpose() * w))
        })
        .collect();
    Field { grid: x0.grid.clone(), data }
}

/// Isometry and conjugate-net residuals of a realized leaf `x^1` against
/// `x_0^1 = L Z(V_1)`, plus the segment check `|x^1 - x^0|^2`.
pub fn leaf_space_report(x0: &Field, x1: &Field, leaf: &LeafState, seed: &FrameState, bt: &BTParams, model: &FrameModel) -> ResidualReport {
    let grid = x1.grid.clone();
    let n = model.n;
    let npts = grid.npoints();
    let dx: Vec<Field> = (0..n).map(|k| x1.partial(k)).collect();
    let mut iso = vec![0.0; npts];
    let mut conj = vec![0.0; npts];
    let mut seg = vec![0.0; npts];
    for i in 0..npts {
        let v1 = leaf.state.v_at(i);
        let t: Vec<CVector> = (0..n)
            .map(|k| x0_tangent(model, &v1, &(leaf.state.frames.r.data[i].column(k) * leaf.state.lam.data[i][(k, 0)])))
            .collect();
        for j in 0..n {
            for k in j..n {
                let gd = dx[j].data[i].column(0).dot(&dx[k].data[i].column(0));
                iso[i] = f64::max(iso[i], (gd - t[j].dot(&t[k])).norm());
            }
        }
        let w = &bt.sqrt_rp * &v1 - seed.v_at(i) + &bt.lc;
        let d = (&x1.data[i] - &x0.data[i]).column(0).into_owned();
        seg[i] = (d.dot(&d) - crate::linalg::bsq(&x0_tangent(model, &seed.v_at(i), &w))).norm();
    }
    for j in 0..n {
        for k in j + 1..n {
            let xjk = dx[j].partial(k);
            for i in 0..npts {
                let m = CMatrix::from_columns(&[dx[j].data[i].column(0).into_owned(), dx[k].data[i].column(0).into_owned()]);
                let z = xjk.data[i].column(0).into_owned();
                let rem = match m.clone().svd(true, true).solve(&z, 1e-14) {
                    Ok(c) => (&z - m * c).norm(),
                    Err(_) => z.norm(),
                };
                conj[i] = f64::max(conj[i], rem);
            }
        }
    }
    let mut report = ResidualReport::new("leaf_space").with_h(grid.max_step());
    report.push("isometry", &iso);
    report.push("conjugate_net", &conj);
    report.push("segment", &seg);
    report
}

/// Fourth rotation `R_3 = (D_2 - D_1 R_2 R_1^T)(D_2 R_2 R_1^T - D_1)^-1 R_0`.
/// Points where the inverted factor is numerically singular are masked.
pub fn bpt_rotation(r0: &Field, r1: &Field, r2: &Field, bt1: &BTParams, bt2: &BTParams) -> Result<(Field, Vec<bool>)> {
    if (bt1.z - bt2.z).norm() < 1e-12 {
        return Err(Error::Precondition("the permutability quadrilateral needs z_1 != z_2".into()));
    }
    let n = r0.data[0].nrows();
    let out: Vec<(CMatrix, bool)> = (0..r0.grid.npoints())
        .into_par_iter()
        .map(|i| {
            let p = &r2.data[i] * r1.data[i].transpose();
            let den = &bt2.d * &p - &bt1.d;
            let num = &bt2.d - &bt1.d * &p;
            let scale = max_abs(&den).max(1e-300);
            match den.clone().try_inverse() {
                Some(inv) if max_abs(&inv) * scale < 1e10 => (num * inv * &r0.data[i], false),
                _ => (CMatrix::identity(n, n), true),
            }
        })
        .collect();
    let (data, mask): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok((Field { grid: r0.grid.clone(), data }, mask))
}

/// The four vertices of the permutability quadrilateral and its residuals.
#[derive(Debug, Clone)]
pub struct BianchiQuad {
    pub leaf1: LeafState,
    pub leaf2: LeafState,
    /// `R_3`, and the fourth leaf built from `leaf1` with `(z_2, R_3)`.
    pub leaf3: LeafState,
    pub mask: Vec<bool>,
    pub report: ResidualReport,
}

fn masked_values(v: &[f64], mask: &[bool]) -> Vec<f64> {
    v.iter().zip(mask).filter(|(_, &m)| !m).map(|(x, _)| *x).collect()
}

/// FD Ricatti residual of `r` over the seed frames `seed` and parameters `bt`.
pub fn ricatti_residual(seed: &FrameField, bt: &BTParams, r: &Field) -> Vec<f64> {
    let sys = RicattiSystem::new(seed, bt);
    let axes: Vec<usize> = (0..r.grid.ndim()).collect();
    system_residual(&sys, &r.grid, &r.data, &axes)
}

pub fn bianchi_quad(
    seed: &FrameState,
    model: &FrameModel,
    bt1: &BTParams,
    bt2: &BTParams,
    r1_init: &CMatrix,
    r2_init: &CMatrix,
    opts: SweepOptions,
) -> Result<BianchiQuad> {
    if (bt1.z - bt2.z).norm() < 1e-12 {
        return Err(Error::Precondition("the permutability quadrilateral needs z_1 != z_2".into()));
    }
    let (run1, run2) = rayon::join(
        || integrate_ricatti(&seed.frames, bt1, r1_init, opts),
        || integrate_ricatti(&seed.frames, bt2, r2_init, opts),
    );
    let (run1, run2) = (run1?, run2?);
    let leaf1 = transform(seed, &run1, bt1, model, "seed")?;
    let leaf2 = transform(seed, &run2, bt2, model, "seed")?;
    let (r3, mask) = bpt_rotation(&seed.frames.r, &run1.r, &run2.r, bt1, bt2)?;
    let npts = mask.len();
    let masked = mask.iter().filter(|&&b| b).count();
    if masked * 100 > npts {
        return Err(Error::TooManyMasked { masked, total: npts });
    }
    let (r3_swapped, _) = bpt_rotation(&seed.frames.r, &run2.r, &run1.r, bt2, bt1)?;
    let n = model.n;
    let id = CMatrix::identity(n, n);
    let target = &id * (1.0 / bt2.z - 1.0 / bt1.z);
    let mut ident = vec![0.0; npts];
    let mut swap = vec![0.0; npts];
    for i in 0..npts {
        let p = &run2.r.data[i] * run1.r.data[i].transpose();
        let q = &r3.data[i] * seed.frames.r.data[i].transpose();
        ident[i] = max_abs(&((&bt2.d * q + &bt1.d) * (&bt2.d * p - &bt1.d) - &target));
        swap[i] = max_abs(&(&r3.data[i] - &r3_swapped.data[i]));
    }
    // R_3 as the Ricatti flow over each intermediate leaf; derivatives of R_3
    // for the fourth leaf come from the first of these systems.
    let sys13 = RicattiSystem::new(&leaf1.state.frames, bt2);
    let dr3: Vec<Field> = (0..r3.grid.ndim())
        .map(|a| Field {
            grid: r3.grid.clone(),
            data: (0..npts).into_par_iter().map(|i| sys13.rhs(&sys13.coeffs(i, a), &r3.data[i])).collect(),
        })
        .collect();
    let ric1 = ricatti_residual(&leaf1.state.frames, bt2, &r3);
    let ric2 = ricatti_residual(&leaf2.state.frames, bt1, &r3);
    let run3 = RicattiRun { r: r3.clone(), dr: dr3, report: ResidualReport::new("bpt") };
    let leaf3 = transform(&leaf1.state, &run3, bt2, model, "leaf1")?;
    let (v3b, l3b) = leaf(&leaf2.state, &r3, bt1, model);
    let fourth: Vec<f64> = (0..npts)
        .map(|i| max_abs(&(&leaf3.state.v.data[i] - &v3b.data[i])).max(max_abs(&(&leaf3.state.lam.data[i] - &l3b.data[i]))))
        .collect();
    let mut report = ResidualReport::new("bianchi_quad").with_h(seed.v.grid.max_step());
    report.push("r3_orthogonality", &masked_values(&orthogonality(&r3), &mask));
    report.push("bpt_identity", &masked_values(&ident, &mask));
    report.push("swap_symmetry", &masked_values(&swap, &mask));
    report.push("ricatti_leaf1", &masked_values(&ric1, &mask));
    report.push("ricatti_leaf2", &masked_values(&ric2, &mask));
    report.push("fourth_leaf", &masked_values(&fourth, &mask));
    report.merge(run1.report.clone(), "run1");
    report.merge(run2.report.clone(), "run2");
    report.masked = masked;
    Ok(BianchiQuad { leaf1, leaf2, leaf3, mask, report })
}

/// Closed-form `R_1` over the diagonal seed with `n = 2`, `R_0 = I`,
/// `M_0 = diag(m, 0)`, `N_0 = 0`: the rotation by `t` with
/// `tan(t/2) = tan(t_0/2) exp(-(d_1 u^1 + d_2 u^2 + m u^3 / d_1))`.
pub fn closed_form_rotation_n2(bt: &BTParams, theta0: C64, rate: C64, u: &[f64]) -> CMatrix {
    let (d1, d2) = (bt.d[(0, 0)], bt.d[(1, 1)]);
    let mut expo = d1 * u[0] + d2 * u[1];
    if u.len() > 2 {
        expo += rate * u[2] / d1;
    }
    let t = ((theta0 / 2.0).tan() * (-expo).exp()).atan() * 2.0;
    let (c, s) = (t.cos(), t.sin());
    CMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Derivatives of the closed-form rotation from the Ricatti right-hand side.
pub fn closed_form_run_n2(seed: &FrameField, bt: &BTParams, theta0: C64, rate: C64) -> RicattiRun {
    let grid = seed.grid().clone();
    let r = Field::from_fn(&grid, |u| closed_form_rotation_n2(bt, theta0, rate, u));
    let sys = RicattiSystem::new(seed, bt);
    let dr = (0..grid.ndim())
        .map(|a| Field {
            grid: grid.clone(),
            data: (0..grid.npoints()).into_par_iter().map(|i| sys.rhs(&sys.coeffs(i, a), &r.data[i])).collect(),
        })
        .collect();
    let mut report = ResidualReport::new("closed_form").with_h(grid.max_step());
    report.push("orthogonality", &orthogonality(&r));
    RicattiRun { r, dr, report }
}

/// Serializable description of a transformation, as read from configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacklundConfig {
    /// `[re, im]`.
    pub z: [f64; 2],
    #[serde(default = "default_branch")]
    pub branch: i8,
    /// `"identity"` or `"random:<seed>"`.
    #[serde(rename = "R1_init", default = "default_init")]
    pub r1_init: String,
}

fn default_branch() -> i8 {
    1
}

fn default_init() -> String {
    "identity".into()
}

impl BacklundConfig {
    pub fn z(&self) -> C64 {
        C64::new(self.z[0], self.z[1])
    }

    pub fn initial_rotation(&self, n: usize) -> Result<CMatrix> {
        if self.r1_init == "identity" {
            return Ok(CMatrix::identity(n, n));
        }
        match self.r1_init.strip_prefix("random:").map(str::parse::<u64>) {
            Some(Ok(seed)) => Ok(crate::sjcalc::random_rotation_scaled(n, seed, 0.3)),
            _ => Err(Error::Invalid(format!("R1_init must be \"identity\" or \"random:<seed>\", got {:?}", self.r1_init))),
        }
    }
}
