//! RK4 sweeps along coordinate lines and the moving-frame linear system.
//!
//! Integration starts at the base corner and proceeds stage by stage: stage
//! `a` integrates every line along axis `a` whose start has zero indices on
//! axes `a..`. Lines of one stage run in parallel. Coefficients between grid
//! nodes come from cubic Lagrange interpolation along the line.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, r, CMatrix, CVector};
use crate::report::ResidualReport;

use super::frame::{col_only, ek, FrameField, FrameModel};
use super::grid::{Field, GridSpec};

/// A first-order system `Y_a = F(c_a(u), Y)` on each axis `a`, where the
/// coefficient matrices `c_a` are known at grid nodes.
pub trait SweepSystem: Sync {
    fn coeffs(&self, i: usize, axis: usize) -> Vec<CMatrix>;
    fn rhs(&self, coeffs: &[CMatrix], y: &CMatrix) -> CMatrix;
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// RK4 steps per grid cell.
    pub substeps: usize,
    /// Abort when `max |Y|` exceeds this bound.
    pub blowup: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { substeps: 16, blowup: 1e8 }
    }
}

fn lagrange_weights(nodes: [f64; 4], t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (t - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}

/// Coefficients at fractional position `k + t` of a line of nodes.
fn interp(line: &[Vec<CMatrix>], k: usize, t: f64) -> Vec<CMatrix> {
    let len = line.len();
    if t == 0.0 {
        return line[k].clone();
    }
    if t == 1.0 {
        return line[k + 1].clone();
    }
    if len < 4 {
        return line[k].iter().zip(&line[k + 1]).map(|(a, b)| a * r(1.0 - t) + b * r(t)).collect();
    }
    let start = k.saturating_sub(1).min(len - 4);
    let nodes = [0.0, 1.0, 2.0, 3.0];
    let w = lagrange_weights(nodes, (k - start) as f64 + t);
    (0..line[k].len())
        .map(|c| {
            let mut acc = &line[start][c] * r(w[0]);
            for s in 1..4 {
                acc += &line[start + s][c] * r(w[s]);
            }
            acc
        })
        .collect()
}

/// Integrate from `y0` at the base corner over the whole grid.
pub fn integrate_sweeps<S: SweepSystem>(sys: &S, grid: &GridSpec, y0: &CMatrix, opts: SweepOptions) -> Result<Vec<CMatrix>> {
    let npts = grid.npoints();
    let mut data: Vec<Option<CMatrix>> = vec![None; npts];
    data[0] = Some(y0.clone());
    let subs = opts.substeps.max(1);
    for axis in 0..grid.ndim() {
        let starts: Vec<usize> =
            (0..npts).filter(|&i| grid.multi(i)[axis..].iter().all(|&k| k == 0)).collect();
        let stride = grid.stride(axis);
        let len = grid.extent[axis];
        let h = grid.step(axis);
        let lines: Vec<Result<Vec<CMatrix>>> = starts
            .par_iter()
            .map(|&s| {
                let coeffs: Vec<Vec<CMatrix>> = (0..len).map(|k| sys.coeffs(s + k * stride, axis)).collect();
                let mut y = data[s].clone().expect("sweep start not yet filled");
                let mut out = Vec::with_capacity(len - 1);
                let dt = h / subs as f64;
                for k in 0..len - 1 {
                    for sub in 0..subs {
                        let t0 = sub as f64 / subs as f64;
                        let th = (sub as f64 + 0.5) / subs as f64;
                        let t1 = (sub as f64 + 1.0) / subs as f64;
                        let c0 = interp(&coeffs, k, t0);
                        let ch = interp(&coeffs, k, th);
                        let c1 = interp(&coeffs, k, t1);
                        let k1 = sys.rhs(&c0, &y);
                        let k2 = sys.rhs(&ch, &(&y + &k1 * r(dt / 2.0)));
                        let k3 = sys.rhs(&ch, &(&y + &k2 * r(dt / 2.0)));
                        let k4 = sys.rhs(&c1, &(&y + &k3 * r(dt)));
                        y += (k1 + k2 * r(2.0) + k3 * r(2.0) + k4) * r(dt / 6.0);
                    }
                    let size = max_abs(&y);
                    if !(size <= opts.blowup) {
                        return Err(Error::BlowUp(size));
                    }
                    out.push(y.clone());
                }
                Ok(out)
            })
            .collect();
        for (&s, line) in starts.iter().zip(lines) {
            for (k, y) in line?.into_iter().enumerate() {
                data[s + (k + 1) * stride] = Some(y);
            }
        }
    }
    Ok(data.into_iter().map(|y| y.expect("grid point not reached")).collect())
}

/// Stencil curl `D_b F_a - D_a F_b` of the right-hand sides evaluated on `y`.
/// Returns (pointwise max over pairs, expected size `h^2 S`).
pub fn plaquette<S: SweepSystem>(sys: &S, grid: &GridSpec, y: &[CMatrix], axes: &[usize]) -> (Vec<f64>, f64) {
    let fields: Vec<Field> = axes
        .iter()
        .map(|&a| {
            let data = (0..grid.npoints()).into_par_iter().map(|i| sys.rhs(&sys.coeffs(i, a), &y[i])).collect();
            Field { grid: grid.clone(), data }
        })
        .collect();
    stencil_curl(&fields, axes)
}

/// Curl of the one-form `sum_a F_a du^a` (`fields[s]` belongs to `axes[s]`),
/// with the expected truncation size `h^2 max |D_a D_a F_b|`.
pub fn stencil_curl(fields: &[Field], axes: &[usize]) -> (Vec<f64>, f64) {
    let grid = &fields[0].grid;
    let mut out = vec![0.0; grid.npoints()];
    let mut second = 0.0f64;
    for (ia, &a) in axes.iter().enumerate() {
        for (ib, &b) in axes.iter().enumerate().skip(ia + 1) {
            let dba = fields[ia].partial(b);
            let dab = fields[ib].partial(a);
            for i in 0..grid.npoints() {
                out[i] = f64::max(out[i], max_abs(&(&dba.data[i] - &dab.data[i])));
            }
            second = second.max(dab.partial(a).max_abs());
            second = second.max(dba.partial(b).max_abs());
        }
    }
    let h = axes.iter().map(|&a| grid.step(a)).fold(0.0, f64::max);
    (out, h * h * second)
}

/// Pointwise `max_a |D_a Y - F_a(Y)|` with the order-2 stencil.
pub fn system_residual<S: SweepSystem>(sys: &S, grid: &GridSpec, y: &[CMatrix], axes: &[usize]) -> Vec<f64> {
    let field = Field { grid: grid.clone(), data: y.to_vec() };
    let mut out = vec![0.0; grid.npoints()];
    for &a in axes {
        let d = field.partial(a);
        let res: Vec<f64> =
            (0..grid.npoints()).into_par_iter().map(|i| max_abs(&(&d.data[i] - sys.rhs(&sys.coeffs(i, a), &y[i])))).collect();
        for (o, x) in out.iter_mut().zip(res) {
            *o = f64::max(*o, x);
        }
    }
    out
}

/// The linear system of the moving frame for `Y = [V; Lambda]`.
pub struct FrameSystem<'a> {
    pub frames: &'a FrameField,
    pub model: &'a FrameModel,
    pub m: Field,
    pub nmat: Field,
    /// Drop the inhomogeneous terms.
    pub homogeneous: bool,
}

impl<'a> FrameSystem<'a> {
    pub fn new(frames: &'a FrameField, model: &'a FrameModel, homogeneous: bool) -> Self {
        FrameSystem { frames, model, m: frames.m_or_zero(), nmat: frames.n_or_zero(), homogeneous }
    }

    /// `(G, g)` of axis `axis` at grid point `i`.
    pub fn generator(&self, i: usize, axis: usize) -> (CMatrix, CVector) {
        let n = self.model.n;
        let rr = &self.frames.r.data[i];
        let mut gm = CMatrix::zeros(2 * n, 2 * n);
        let mut gv = CVector::zeros(2 * n);
        if axis < n {
            let e = ek(n, axis);
            gm.view_mut((0, n), (n, n)).copy_from(&(rr * &e));
            gm.view_mut((n, 0), (n, n)).copy_from(&(-(&e * rr.transpose() * &self.model.a_prime)));
            gm.view_mut((n, n), (n, n)).copy_from(&self.frames.omega_at(i, axis));
            if !self.homogeneous {
                gv.rows_mut(n, n).copy_from(&(-(&e * rr.transpose() * &self.model.lb)));
            }
        } else {
            let l = axis - n;
            let e = ek(n, l);
            let om = self.frames.big_omega_at(i, l);
            let m = &self.m.data[i];
            let nm = &self.nmat.data[i];
            let ca = &self.model.cal_a;
            gm.view_mut((0, 0), (n, n)).copy_from(&(&om + ca * &e * nm.transpose()));
            gm.view_mut((0, n), (n, n)).copy_from(&(-(ca * &e * m.transpose())));
            gm.view_mut((n, 0), (n, n)).copy_from(&col_only(m, l));
            if !self.homogeneous {
                gv.rows_mut(0, n).copy_from(&(ca * om * &self.model.lb));
            }
        }
        (gm, gv)
    }
}

impl SweepSystem for FrameSystem<'_> {
    fn coeffs(&self, i: usize, axis: usize) -> Vec<CMatrix> {
        let (g, v) = self.generator(i, axis);
        vec![g, CMatrix::from_column_slice(v.len(), 1, v.as_slice())]
    }

    fn rhs(&self, c: &[CMatrix], y: &CMatrix) -> CMatrix {
        let mut out = &c[0] * y;
        if !self.homogeneous {
            for j in 0..out.ncols() {
                let mut col = out.column_mut(j);
                col += &c[1];
            }
        }
        out
    }
}

/// `(V, Lambda)` integrated from the base point.
#[derive(Debug, Clone)]
pub struct MovingFrame {
    pub v: Field,
    pub lam: Field,
    pub report: ResidualReport,
}

pub fn stack(v: &CVector, lam: &CVector) -> CMatrix {
    let n = v.len();
    let mut y = CMatrix::zeros(2 * n, 1);
    y.view_mut((0, 0), (n, 1)).copy_from(v);
    y.view_mut((n, 0), (n, 1)).copy_from(lam);
    y
}

pub fn integrate_moving_frame(
    frames: &FrameField,
    model: &FrameModel,
    v0: &CVector,
    lam0: &CVector,
    opts: SweepOptions,
) -> Result<MovingFrame> {
    let grid = frames.grid().clone();
    let n = model.n;
    let sys = FrameSystem::new(frames, model, false);
    let ys = integrate_sweeps(&sys, &grid, &stack(v0, lam0), opts)?;
    let axes: Vec<usize> = (0..grid.ndim()).collect();
    let (plaq, expected) = plaquette(&sys, &grid, &ys, &axes);
    let pmax = plaq.iter().cloned().fold(0.0, f64::max);
    let limit = 10.0 * expected.max(1e-10);
    if pmax > limit {
        return Err(Error::NonIntegrable { residual: pmax, threshold: limit });
    }
    let pi0 = model.prime_integral(v0, lam0);
    let v = Field { grid: grid.clone(), data: ys.iter().map(|y| y.rows(0, n).into_owned()).collect() };
    let lam = Field { grid: grid.clone(), data: ys.iter().map(|y| y.rows(n, n).into_owned()).collect() };
    let drift: Vec<f64> = v
        .data
        .iter()
        .zip(&lam.data)
        .map(|(a, b)| (model.prime_integral(&a.column(0).into_owned(), &b.column(0).into_owned()) - pi0).norm())
        .collect();
    let mut report = ResidualReport::new("moving_frame").with_h(grid.max_step());
    report.push("plaquette", &plaq);
    report.push("prime_drift", &drift);
    report.note(format!("plaquette expectation h^2 S = {expected:.3e}"));
    Ok(MovingFrame { v, lam, report })
}
