//! Fundamental solutions of the homogeneous system and the space realization
//! `d'x = [V_1 .. V_{2n-1}]^T d'V`.

use rayon::prelude::*;

use crate::confocal::QuadricKind;
use crate::error::{Error, Result};
use crate::linalg::{as_col, bsq, max_abs, r, CMatrix, CVector, C64, I};
use crate::lmap::LMap;
use crate::report::ResidualReport;
use crate::sjcalc::csqrt;

use super::frame::{FrameField, FrameModel};
use super::grid::Field;
use super::integrate::{integrate_sweeps, plaquette, stack, stencil_curl, FrameSystem, SweepOptions};

/// The bilinear form `diag(A', I_n)`.
pub fn joined_form(model: &FrameModel) -> CMatrix {
    let n = model.n;
    let mut g = CMatrix::identity(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&model.a_prime);
    g
}

/// Orthonormalize `e_1, .., e_m` against `basis` w.r.t. the symmetric form
/// `g`, appending until `want` vectors are collected. Near-isotropic
/// candidates are skipped.
pub fn form_gram_schmidt(g: &CMatrix, mut basis: Vec<CVector>, want: usize) -> Result<Vec<CVector>> {
    let m = g.nrows();
    let fixed = basis.len();
    for k in 0..m {
        if basis.len() == want {
            break;
        }
        let mut w = CVector::zeros(m);
        w[k] = r(1.0);
        for _ in 0..2 {
            for b in &basis {
                let p = b.dot(&(g * &w));
                w -= b * p;
            }
        }
        let nn = w.dot(&(g * &w));
        if nn.norm() < 1e-6 * w.norm_squared() || w.norm_squared() < 1e-12 {
            continue;
        }
        w /= csqrt(nn)?;
        basis.push(w);
    }
    if basis.len() < want {
        return Err(Error::GramSchmidt(format!("found {} of {} orthonormal solutions", basis.len() - fixed, want - fixed)));
    }
    Ok(basis)
}

/// `2n` independent solutions `[calV; calL]` of the homogeneous system.
///
/// QWC: columns orthonormal for `diag(A', I)`, the last one `i (V, Lambda)`.
/// IQWC: `2n - 1` orthonormal columns followed by the isotropic `[L^T f_1; 0]`.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    pub kind: QuadricKind,
    pub y: Field,
    pub report: ResidualReport,
}

impl FundamentalSystem {
    pub fn n(&self) -> usize {
        self.y.data[0].nrows() / 2
    }

    /// `[V_1 .. V_{2n-1}]` at point `i`.
    pub fn cal_v(&self, i: usize) -> CMatrix {
        let n = self.n();
        self.y.data[i].view((0, 0), (n, 2 * n - 1)).into_owned()
    }

    /// `[Lambda_1 .. Lambda_{2n-1}]` at point `i`.
    pub fn cal_l(&self, i: usize) -> CMatrix {
        let n = self.n();
        self.y.data[i].view((n, 0), (n, 2 * n - 1)).into_owned()
    }
}

/// The Gram matrix `Y^T diag(A', I) Y` expected for a fundamental system.
fn gram_target(kind: QuadricKind, n: usize) -> CMatrix {
    let mut t = CMatrix::identity(2 * n, 2 * n);
    if kind == QuadricKind::IQWC {
        t[(2 * n - 1, 2 * n - 1)] = r(0.0);
    }
    t
}

pub fn fundamental_system(
    frames: &FrameField,
    model: &FrameModel,
    lm: &LMap,
    v0: &CVector,
    lam0: &CVector,
    opts: SweepOptions,
) -> Result<FundamentalSystem> {
    let n = model.n;
    let g = joined_form(model);
    let y0 = match model.kind {
        QuadricKind::QWC => {
            let first = stack(v0, lam0).column(0) * I;
            let mut cols = form_gram_schmidt(&g, vec![first], 2 * n)?;
            cols.rotate_left(1);
            CMatrix::from_columns(&cols)
        }
        QuadricKind::IQWC => {
            let kf = &lm.kernel[1];
            let mut s = CVector::zeros(2 * n);
            s.rows_mut(0, n).copy_from(&kf.rows(0, n));
            if crate::linalg::max_abs_vec(&(&model.a_prime * s.rows(0, n))) > 1e-10 {
                return Err(Error::Inconsistent("head(L^T f_1) is not in the kernel of A'".into()));
            }
            let mut cols = form_gram_schmidt(&g, vec![], 2 * n - 1)?;
            cols.push(s);
            CMatrix::from_columns(&cols)
        }
        QuadricKind::QC => return Err(Error::Invalid("fundamental systems exist only for (I)QWC".into())),
    };
    let sys = FrameSystem::new(frames, model, true);
    let grid = frames.grid().clone();
    let ys = integrate_sweeps(&sys, &grid, &y0, opts)?;
    let axes: Vec<usize> = (0..grid.ndim()).collect();
    let (plaq, _) = plaquette(&sys, &grid, &ys, &axes);
    let target = gram_target(model.kind, n);
    let vla: Vec<f64> = ys.par_iter().map(|y| max_abs(&(y.transpose() * &g * y - &target))).collect();
    let mut report = ResidualReport::new("fundamental_system").with_h(grid.max_step());
    report.push("vla_base", &vla[..1]);
    report.push("vla", &vla);
    if model.kind == QuadricKind::QWC {
        // [calV; calL][calV^T calL^T] = diag(calA, I)
        let mut t0 = CMatrix::identity(2 * n, 2 * n);
        t0.view_mut((0, 0), (n, n)).copy_from(&model.cal_a);
        let vla0: Vec<f64> = ys.par_iter().map(|y| max_abs(&(y * y.transpose() - &t0))).collect();
        report.push("vla0", &vla0);
    }
    report.push("plaquette", &plaq);
    Ok(FundamentalSystem { kind: model.kind, y: Field { grid, data: ys }, report })
}

/// Trapezoid quadrature of `sum_a T_a du^a` along lexicographic sweeps over
/// `axes`, starting from zero wherever all `axes` indices vanish.
pub fn quadrature(tangents: &[Field], axes: &[usize]) -> Field {
    let grid = tangents[0].grid.clone();
    let rows = tangents[0].data[0].nrows();
    let npts = grid.npoints();
    let mut data: Vec<Option<CMatrix>> = (0..npts)
        .map(|i| {
            let m = grid.multi(i);
            axes.iter().all(|&a| m[a] == 0).then(|| CMatrix::zeros(rows, 1))
        })
        .collect();
    for (s, &a) in axes.iter().enumerate() {
        let stride = grid.stride(a);
        let h = grid.step(a);
        let starts: Vec<usize> = (0..npts)
            .filter(|&i| {
                let m = grid.multi(i);
                axes[s..].iter().all(|&b| m[b] == 0)
            })
            .collect();
        for st in starts {
            for k in 1..grid.extent[a] {
                let (i0, i1) = (st + (k - 1) * stride, st + k * stride);
                let prev = data[i0].clone().expect("quadrature start not yet filled");
                data[i1] = Some(prev + (&tangents[s].data[i0] + &tangents[s].data[i1]) * r(h / 2.0));
            }
        }
    }
    Field { grid, data: data.into_iter().map(|x| x.expect("grid point not reached")).collect() }
}

/// Exact tangents `x_0,k = L [d_k V; V^T d_k V]` of `x_0 = L Z(V)`.
pub fn x0_tangent(model: &FrameModel, v: &CVector, dv: &CVector) -> CVector {
    let n = model.n;
    let mut dz = CVector::zeros(n + 1);
    dz.rows_mut(0, n).copy_from(dv);
    dz[n] = v.dot(dv);
    &model.l * dz
}

/// `d_k V = R e_k lambda_k`.
fn dv_at(frames: &FrameField, lam: &Field, i: usize, k: usize) -> CVector {
    frames.r.data[i].column(k) * lam.data[i][(k, 0)]
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub x: Field,
    /// Exact primary tangents `x_k`.
    pub tangents: Vec<Field>,
    pub report: ResidualReport,
}

/// Remainder of `z` after least-squares projection on the span of `a` and `b`.
fn span_remainder(z: &CVector, a: &CVector, b: &CVector) -> f64 {
    let m = CMatrix::from_columns(&[a.clone(), b.clone()]);
    let svd = m.clone().svd(true, true);
    match svd.solve(z, 1e-14) {
        Ok(coef) => (z - m * coef).norm(),
        Err(_) => z.norm(),
    }
}

pub fn realize_surface(
    fs: &FundamentalSystem,
    frames: &FrameField,
    model: &FrameModel,
    v: &Field,
    lam: &Field,
) -> Result<Realization> {
    if model.kind != QuadricKind::QWC {
        return Err(Error::Invalid("space realization is implemented for QWC".into()));
    }
    let grid = v.grid.clone();
    let n = model.n;
    let npts = grid.npoints();
    let axes = grid.primary_axes();
    let tangents: Vec<Field> = axes
        .iter()
        .map(|&k| Field {
            grid: grid.clone(),
            data: (0..npts).into_par_iter().map(|i| as_col(&(fs.cal_v(i).transpose() * dv_at(frames, lam, i, k)))).collect(),
        })
        .collect();
    let (curl, expected) = stencil_curl(&tangents, &axes);
    let cmax = curl.iter().cloned().fold(0.0, f64::max);
    let limit = 10.0 * expected.max(1e-10);
    if cmax > limit {
        return Err(Error::NonIntegrable { residual: cmax, threshold: limit });
    }
    let x = quadrature(&tangents, &axes);
    let vcol = |i: usize| v.data[i].column(0).into_owned();
    let x0t: Vec<Vec<CVector>> = (0..npts)
        .into_par_iter()
        .map(|i| axes.iter().map(|&k| x0_tangent(model, &vcol(i), &dv_at(frames, lam, i, k))).collect())
        .collect();
    let dx: Vec<Field> = axes.iter().map(|&k| x.partial(k)).collect();
    let mut iso_fd = vec![0.0; npts];
    let mut iso_exact = vec![0.0; npts];
    for i in 0..npts {
        for j in 0..n {
            for k in j..n {
                let g0 = x0t[i][j].dot(&x0t[i][k]);
                let gd = dx[j].data[i].column(0).dot(&dx[k].data[i].column(0));
                let ge = tangents[j].data[i].column(0).dot(&tangents[k].data[i].column(0));
                iso_fd[i] = f64::max(iso_fd[i], (gd - g0).norm());
                iso_exact[i] = f64::max(iso_exact[i], (ge - g0).norm());
            }
        }
    }
    let mut conj = vec![0.0; npts];
    let mut multipl = vec![0.0; npts];
    let dlam: Vec<Field> = axes.iter().map(|&k| lam.partial(k)).collect();
    for j in 0..n {
        for k in j + 1..n {
            let xjk = dx[j].partial(k);
            for i in 0..npts {
                let z = xjk.data[i].column(0).into_owned();
                let xj = tangents[j].data[i].column(0).into_owned();
                let xk = tangents[k].data[i].column(0).into_owned();
                conj[i] = f64::max(conj[i], span_remainder(&z, &xj, &xk));
                let lj = lam.data[i][(j, 0)];
                let lk = lam.data[i][(k, 0)];
                let pred = &xj * (dlam[k].data[i][(j, 0)] / lj) + &xk * (dlam[j].data[i][(k, 0)] / lk);
                multipl[i] = f64::max(multipl[i], (z - pred).norm());
            }
        }
    }
    let mut deficit = vec![0.0; npts];
    let mut ls_ratio = f64::INFINITY;
    for i in 0..npts {
        let y = &fs.y.data[i];
        let l = lam.data[i].column(0).into_owned();
        let mut rhs = CVector::zeros(2 * n);
        rhs.rows_mut(n, n).copy_from(&l);
        let ll = bsq(&l).norm();
        let sol = y.clone().lu().solve(&rhs).ok_or(Error::Singular("fundamental system"))?;
        deficit[i] = (0.5 * ll - sol[2 * n - 1].norm()).max(0.0);
        let reduced = y.columns(0, 2 * n - 1).into_owned();
        ls_ratio = ls_ratio.min(span_remainder_many(&reduced, &rhs) / ll.max(1e-300));
    }
    let mut report = ResidualReport::new("realization").with_h(grid.max_step());
    report.push("curl", &curl);
    report.push("isometry", &iso_fd);
    report.push("isometry_exact", &iso_exact);
    report.push("conjugate_net", &conj);
    report.push("multipl", &multipl);
    report.push("joined_form_deficit", &deficit);
    report.note(format!("least-squares remainder of the joined-form system / |Lambda^T Lambda| >= {ls_ratio:.3e}"));
    Ok(Realization { x, tangents, report })
}

/// Least-squares remainder `min |M c - z|`.
fn span_remainder_many(m: &CMatrix, z: &CVector) -> f64 {
    let svd = m.clone().svd(true, true);
    match svd.solve(z, 1e-14) {
        Ok(coef) => (z - m * coef).norm(),
        Err(_) => z.norm(),
    }
}

/// Compare finite-difference Christoffel symbols of the metric of `x_0` with
/// `Gamma^j_jk = (log lambda_j)_k`, `Gamma^k_jj = lambda_j^2/lambda_k^2 (log(sqrt H / lambda_j))_k`
/// and `Gamma^l_jk = 0` (`j, k, l` distinct). The `Gamma^k_jj` residual is
/// divided by `1 + |lambda_j^2 / lambda_k^2|`.
pub fn christoffel_check(frames: &FrameField, model: &FrameModel, v: &Field, lam: &Field) -> Result<ResidualReport> {
    let grid = v.grid.clone();
    let n = model.n;
    let npts = grid.npoints();
    let metric = Field {
        grid: grid.clone(),
        data: (0..npts)
            .into_par_iter()
            .map(|i| {
                let vi = v.data[i].column(0).into_owned();
                let t: Vec<CVector> = (0..n).map(|k| x0_tangent(model, &vi, &dv_at(frames, lam, i, k))).collect();
                CMatrix::from_fn(n, n, |a, b| t[a].dot(&t[b]))
            })
            .collect(),
    };
    let h = Field { grid: grid.clone(), data: v.data.iter().map(|vi| CMatrix::from_element(1, 1, model.h_value(&vi.column(0).into_owned()))).collect() };
    let dg: Vec<Field> = (0..n).map(|k| metric.partial(k)).collect();
    let dl: Vec<Field> = (0..n).map(|k| lam.partial(k)).collect();
    let dh: Vec<Field> = (0..n).map(|k| h.partial(k)).collect();
    let mut jjk = vec![0.0; npts];
    let mut kjj = vec![0.0; npts];
    let mut distinct = vec![0.0; npts];
    for i in 0..npts {
        let g = &metric.data[i];
        let ginv = g.clone().try_inverse().ok_or(Error::Singular("induced metric"))?;
        // first kind [ab, c] = (d_a g_bc + d_b g_ac - d_c g_ab) / 2
        let gamma = |l: usize, a: usize, b: usize| -> C64 {
            (0..n)
                .map(|c| ginv[(l, c)] * (dg[a].data[i][(b, c)] + dg[b].data[i][(a, c)] - dg[c].data[i][(a, b)]) * 0.5)
                .sum()
        };
        let lamv = |j: usize| lam.data[i][(j, 0)];
        let hv = h.data[i][(0, 0)];
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let want = dl[k].data[i][(j, 0)] / lamv(j);
                jjk[i] = f64::max(jjk[i], (gamma(j, j, k) - want).norm());
                let log_term = dh[k].data[i][(0, 0)] / (hv * 2.0) - dl[k].data[i][(j, 0)] / lamv(j);
                let ratio = lamv(j) * lamv(j) / (lamv(k) * lamv(k));
                // relative to the size of the amplifying factor
                kjj[i] = f64::max(kjj[i], (gamma(k, j, j) - ratio * log_term).norm() / (1.0 + ratio.norm()));
                for l in 0..n {
                    if l != j && l != k {
                        distinct[i] = f64::max(distinct[i], gamma(l, j, k).norm());
                    }
                }
            }
        }
    }
    let mut report = ResidualReport::new("christoffel").with_h(grid.max_step());
    report.push("gamma_jjk", &jjk);
    report.push("gamma_kjj", &kjj);
    report.push("gamma_distinct", &distinct);
    Ok(report)
}
