//! The separable solution with `R = I` on a diagonal QWC.
//!
//! Each coordinate is an oscillator `v_j'' + a'_j v_j = -b_j` with
//! `b = I_{1,n} L^{-1} B`:
//! `v_j = alpha_j cos(theta_j) - b_j/a'_j`, `lambda_j = -alpha_j sqrt(a'_j) sin(theta_j)`,
//! `theta_j = sqrt(a'_j) u^j + phi_j - (m_j / sqrt(a'_j)) u^{n+j}` (the last term for `j < n`).
//! With `M = diag(m_1, .., m_{n-1}, 0)` and `N = 0` this also solves the extended system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, r, CMatrix, CVector, C64};
use crate::sjcalc::csqrt;

use super::frame::{FrameField, FrameModel, FrameState};
use super::grid::{Field, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedConstants {
    pub amplitudes: Vec<C64>,
    pub phases: Vec<C64>,
    /// Secondary rates `m_l`, `l = 1..n-1` (empty means zero).
    #[serde(default)]
    pub rates: Vec<C64>,
}

impl SeedConstants {
    /// Pick the last amplitude so that the prime integral vanishes.
    pub fn balanced(model: &FrameModel, leading: &[C64], phases: Vec<C64>, rates: Vec<C64>) -> Result<Self> {
        let n = model.n;
        if leading.len() + 1 != n || phases.len() != n {
            return Err(Error::Dimension("need n-1 leading amplitudes and n phases".into()));
        }
        let ap = diag_of(model)?;
        let mut rest = model.b_sq;
        for j in 0..n {
            rest -= model.lb[j] * model.lb[j] / ap[j];
        }
        for j in 0..n - 1 {
            rest += leading[j] * leading[j] * ap[j];
        }
        let last = csqrt(-rest / ap[n - 1])?;
        let mut amplitudes = leading.to_vec();
        amplitudes.push(last);
        Ok(SeedConstants { amplitudes, phases, rates })
    }

    /// A fixed, well-conditioned choice used by examples and tests.
    pub fn standard(model: &FrameModel) -> Result<Self> {
        let n = model.n;
        let leading: Vec<C64> = (0..n - 1).map(|j| c(0.0, 0.6 / (j as f64 + 1.0))).collect();
        let phases: Vec<C64> = (0..n).map(|j| c(0.3 - 0.5 * j as f64, 0.4 + 0.1 * j as f64)).collect();
        Self::balanced(model, &leading, phases, vec![])
    }

    pub fn with_rates(mut self, rates: Vec<C64>) -> Self {
        self.rates = rates;
        self
    }

    pub fn rate(&self, l: usize) -> C64 {
        self.rates.get(l).copied().unwrap_or(r(0.0))
    }
}

fn diag_of(model: &FrameModel) -> Result<Vec<C64>> {
    if !model.is_diagonal() {
        return Err(Error::Precondition("seed needs a diagonal A'".into()));
    }
    let ap: Vec<C64> = (0..model.n).map(|j| model.a_prime[(j, j)]).collect();
    if ap.iter().any(|a| a.norm() < 1e-14) {
        return Err(Error::Precondition("seed needs nonzero a'_j".into()));
    }
    Ok(ap)
}

/// Closed-form seed fields.
#[derive(Debug, Clone)]
pub struct Seed {
    pub frames: FrameField,
    pub v: Field,
    pub lam: Field,
    /// `H = |(L^T)^{-1} V + B|^2 = -|Lambda|^2`.
    pub h: Field,
    pub constants: SeedConstants,
}

impl Seed {
    pub fn state(&self) -> FrameState {
        FrameState { frames: self.frames.clone(), v: self.v.clone(), lam: self.lam.clone() }
    }

    /// Exact `(V, Lambda)` at parameter point `u`.
    pub fn exact(model: &FrameModel, k: &SeedConstants, u: &[f64]) -> (CVector, CVector) {
        let n = model.n;
        let mut v = CVector::zeros(n);
        let mut lam = CVector::zeros(n);
        for j in 0..n {
            let a = model.a_prime[(j, j)];
            let w = csqrt(a).unwrap();
            let mut th = w * u[j] + k.phases[j];
            if j + 1 < n && u.len() > n {
                th -= k.rate(j) / w * u[n + j];
            }
            v[j] = k.amplitudes[j] * th.cos() - model.lb[j] / a;
            lam[j] = -k.amplitudes[j] * w * th.sin();
        }
        (v, lam)
    }
}

pub fn seed_diagonal(model: &FrameModel, grid: &GridSpec, k: &SeedConstants) -> Result<Seed> {
    grid.validate()?;
    let n = model.n;
    if grid.n != n {
        return Err(Error::Dimension(format!("grid n = {} but quadric n = {n}", grid.n)));
    }
    diag_of(model)?;
    if k.amplitudes.len() != n || k.phases.len() != n {
        return Err(Error::Dimension("seed constants need n amplitudes and n phases".into()));
    }
    let base = vec![0.0; grid.ndim()];
    let (v0, l0) = Seed::exact(model, k, &base);
    let pi0 = model.prime_integral(&v0, &l0).norm();
    if pi0 > 1e-12 {
        return Err(Error::Precondition(format!("seed constants violate the prime integral ({pi0:e})")));
    }
    let vals: Vec<(CVector, CVector)> = (0..grid.npoints()).map(|i| Seed::exact(model, k, &grid.coords(i))).collect();
    if vals.iter().any(|(_, l)| crate::linalg::bsq(l).norm() < 1e-8) {
        return Err(Error::Precondition("|Lambda|^2 vanishes inside the grid".into()));
    }
    let v = Field { grid: grid.clone(), data: vals.iter().map(|(v, _)| CMatrix::from_column_slice(n, 1, v.as_slice())).collect() };
    let lam =
        Field { grid: grid.clone(), data: vals.iter().map(|(_, l)| CMatrix::from_column_slice(n, 1, l.as_slice())).collect() };
    let h = Field {
        grid: grid.clone(),
        data: vals.iter().map(|(v, _)| CMatrix::from_element(1, 1, model.h_value(v))).collect(),
    };
    let id = CMatrix::identity(n, n);
    let zero = CMatrix::zeros(n, n);
    let r_field = Field::constant(grid, &id);
    let dr = (0..grid.ndim()).map(|_| Field::constant(grid, &zero)).collect();
    let mut frames = FrameField::with_derivatives(r_field, dr);
    if grid.extra > 0 {
        let mut m = CMatrix::zeros(n, n);
        for l in 0..grid.extra {
            m[(l, l)] = k.rate(l);
        }
        frames = frames.with_mn(Field::constant(grid, &m), Field::constant(grid, &zero));
    }
    Ok(Seed { frames, v, lam, h, constants: k.clone() })
}
