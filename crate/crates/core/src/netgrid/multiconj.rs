//! Extension of a realized deformation by the secondary coordinates to a
//! multiply conjugate system in `C^{2n-1}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{as_col, max_abs, CVector, C64};
use crate::report::ResidualReport;

use super::frame::{FrameField, FrameModel};
use super::grid::Field;
use super::integrate::stencil_curl;
use super::realize::{quadrature, FundamentalSystem};

/// Options of the extension.
#[derive(Debug, Clone, Default)]
pub struct MultiOptions {
    /// Constant shift `f` in `1/c_l = e_l^T (calA V + f)`; `None` means `f = 0`.
    pub f: Option<CVector>,
    /// Relative size below which `e_l^T calA V` counts as vanishing.
    pub mask_tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MultiConjugate {
    /// `x` on the full grid, integrated from all `2n - 1` tangents.
    pub x: Field,
    /// `x_j`, `j = 1..2n-1`.
    pub tangents: Vec<Field>,
    /// `a_j`, `j = 1..2n-1`, as `1 x 1` fields.
    pub a: Vec<Field>,
    pub mask: Vec<bool>,
    pub report: ResidualReport,
}

fn scalar(z: C64) -> crate::linalg::CMatrix {
    crate::linalg::CMatrix::from_element(1, 1, z)
}

/// Riemann symbols `R_{ijkl}` with at least three distinct indices of the
/// diagonal linear element `sum a_j^2 (du^j)^2`, from finite differences.
/// Returns the pointwise maximum modulus.
pub fn riemann_diagonal(a: &[Field]) -> Vec<f64> {
    let m = a.len();
    let grid = a[0].grid.clone();
    let npts = grid.npoints();
    let da: Vec<Vec<Field>> = (0..m).map(|i| (0..m).map(|k| a[i].partial(k)).collect()).collect();
    let val = |f: &Field, p: usize| f.data[p][(0, 0)];
    // gamma[i][j][k] = Gamma^i_{jk}
    let gamma: Vec<Vec<Vec<Field>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..m)
                        .map(|k| Field {
                            grid: grid.clone(),
                            data: (0..npts)
                                .map(|p| {
                                    let ai = val(&a[i], p);
                                    let g = if i == j && j == k {
                                        val(&da[i][i], p) / ai
                                    } else if i == j {
                                        val(&da[i][k], p) / ai
                                    } else if i == k {
                                        val(&da[i][j], p) / ai
                                    } else if j == k {
                                        -val(&a[j], p) * val(&da[j][i], p) / (ai * ai)
                                    } else {
                                        C64::new(0.0, 0.0)
                                    };
                                    scalar(g)
                                })
                                .collect(),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let dgamma: Vec<Vec<Vec<Vec<Field>>>> = gamma
        .iter()
        .map(|gi| gi.iter().map(|gij| gij.iter().map(|g| (0..m).map(|k| g.partial(k)).collect()).collect()).collect())
        .collect();
    (0..npts)
        .into_par_iter()
        .map(|p| {
            let mut worst = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let mut idx = [i, j, k, l];
                            idx.sort_unstable();
                            let distinct = 1 + idx.windows(2).filter(|w| w[0] != w[1]).count();
                            if distinct < 3 {
                                continue;
                            }
                            let mut r = val(&dgamma[i][l][j][k], p) - val(&dgamma[i][k][j][l], p);
                            for q in 0..m {
                                r += val(&gamma[i][k][q], p) * val(&gamma[q][l][j], p)
                                    - val(&gamma[i][l][q], p) * val(&gamma[q][k][j], p);
                            }
                            let ai = val(&a[i], p);
                            worst = worst.max((ai * ai * r).norm());
                        }
                    }
                }
            }
            worst
        })
        .collect()
}

pub fn extend_multiconjugate(
    fs: &FundamentalSystem,
    frames: &FrameField,
    model: &FrameModel,
    v: &Field,
    lam: &Field,
    g: &(dyn Fn(usize, f64) -> C64 + Sync),
    opts: &MultiOptions,
) -> Result<MultiConjugate> {
    let grid = v.grid.clone();
    let n = model.n;
    if grid.extra + 1 != n {
        return Err(Error::Dimension(format!("need n - 1 = {} secondary axes, grid has {}", n - 1, grid.extra)));
    }
    if !model.is_diagonal() {
        return Err(Error::Precondition("the multiply conjugate extension needs a diagonal QWC".into()));
    }
    let npts = grid.npoints();
    let mdim = 2 * n - 1;
    let mfield = frames.m_or_zero();
    let nfield = frames.n_or_zero();
    let f = opts.f.clone().unwrap_or_else(|| CVector::zeros(n));
    let mut report = ResidualReport::new("multiconjugate").with_h(grid.max_step());
    let degenerate = mfield.data.iter().chain(&nfield.data).all(|x| max_abs(x) == 0.0);
    if degenerate {
        report.note("degenerate extension: M = N = 0, the secondary tangents vanish");
    }
    // denominators e_l^T (calA V + f)
    let den: Vec<Vec<C64>> = (0..npts)
        .map(|i| {
            let w = &model.cal_a * v.data[i].column(0) + &f;
            (0..n - 1).map(|l| w[l]).collect()
        })
        .collect();
    let scale = den.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = opts.mask_tol.unwrap_or(1e-8) * scale.max(1e-300);
    let mask: Vec<bool> = den.iter().map(|d| d.iter().any(|z| z.norm() < tol)).collect();
    let masked = mask.iter().filter(|&&b| b).count();
    if masked * 100 > npts {
        return Err(Error::TooManyMasked { masked, total: npts });
    }

    let mut tangents: Vec<Field> = (0..n)
        .map(|k| Field {
            grid: grid.clone(),
            data: (0..npts)
                .into_par_iter()
                .map(|i| as_col(&(fs.cal_v(i).transpose() * frames.r.data[i].column(k) * lam.data[i][(k, 0)])))
                .collect(),
        })
        .collect();
    for l in 0..n - 1 {
        tangents.push(Field {
            grid: grid.clone(),
            data: (0..npts)
                .into_par_iter()
                .map(|i| {
                    let t = fs.cal_v(i).transpose() * nfield.data[i].column(l)
                        - fs.cal_l(i).transpose() * mfield.data[i].column(l);
                    as_col(&(t * den[i][l]))
                })
                .collect(),
        });
    }
    let mut a: Vec<Field> =
        (0..n).map(|j| Field { grid: grid.clone(), data: lam.data.iter().map(|x| scalar(x[(j, 0)])).collect() }).collect();
    for l in 0..n - 1 {
        a.push(Field {
            grid: grid.clone(),
            data: (0..npts).map(|i| scalar(g(l, grid.coords(i)[n + l]).exp() * den[i][l])).collect(),
        });
    }
    let axes: Vec<usize> = (0..mdim).collect();
    let (closure, _) = stencil_curl(&tangents, &axes);
    let x = quadrature(&tangents, &axes);

    let dt: Vec<Vec<Field>> = tangents.iter().map(|t| axes.iter().map(|&k| t.partial(k)).collect()).collect();
    let da: Vec<Vec<Field>> = a.iter().map(|f| axes.iter().map(|&k| f.partial(k)).collect()).collect();
    let av = |j: usize, i: usize| a[j].data[i][(0, 0)];
    let dav = |j: usize, k: usize, i: usize| da[j][k].data[i][(0, 0)];
    let mut multipl = vec![0.0; npts];
    let mut cond = vec![0.0; npts];
    for j in 0..mdim {
        for k in j + 1..mdim {
            for i in 0..npts {
                let xjk = (&dt[j][k].data[i] + &dt[k][j].data[i]) * C64::new(0.5, 0.0);
                let pred = &tangents[j].data[i] * (dav(j, k, i) / av(j, i)) + &tangents[k].data[i] * (dav(k, j, i) / av(k, i));
                let res = max_abs(&(xjk - pred));
                multipl[i] = f64::max(multipl[i], res);
                if j >= n {
                    cond[i] = f64::max(cond[i], res);
                }
            }
        }
    }
    let mut compm = vec![0.0; npts];
    for j in 0..mdim {
        let dda: Vec<Vec<Field>> = (0..mdim).map(|k| (0..mdim).map(|l| da[j][k].partial(l)).collect()).collect();
        for k in 0..mdim {
            for l in k + 1..mdim {
                if j == k || j == l {
                    continue;
                }
                for i in 0..npts {
                    let ajkl = (dda[k][l].data[i][(0, 0)] + dda[l][k].data[i][(0, 0)]) * 0.5;
                    let pred = dav(k, l, i) / av(k, i) * dav(j, k, i) + dav(l, k, i) / av(l, i) * dav(j, l, i);
                    let res = (ajkl - pred).norm();
                    compm[i] = f64::max(compm[i], res);
                    if j >= n || k >= n || l >= n {
                        cond[i] = f64::max(cond[i], res);
                    }
                }
            }
        }
    }
    let riemann = riemann_diagonal(&a);
    let keep = |v: &[f64]| -> Vec<f64> { v.iter().zip(&mask).filter(|(_, &m)| !m).map(|(x, _)| *x).collect() };
    report.push("closure", &keep(&closure));
    report.push("multipl", &keep(&multipl));
    report.push("compm", &keep(&compm));
    report.push("cond", &keep(&cond));
    report.push("riemann", &keep(&riemann));
    report.masked = masked;
    Ok(MultiConjugate { x, tangents, a, mask, report })
}
