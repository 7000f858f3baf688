//! Uniform parameter grids and matrix-valued fields over them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, r, CMatrix};

/// Default cap on the number of grid points.
pub const DEFAULT_MAX_POINTS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Steps {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

/// Grid over `u^1..u^n` (primary) followed by `u^{n+1}..u^{n+extra}` (secondary).
/// Points are stored row-major with axis 0 outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default)]
    pub extra: usize,
    pub h: Steps,
    pub extent: Vec<usize>,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    #[serde(default)]
    pub max_points: Option<usize>,
}

impl GridSpec {
    pub fn new(n: usize, extra: usize, h: f64, extent: Vec<usize>) -> Result<Self> {
        let g = GridSpec { n, extra, h: Steps::Uniform(h), extent, origin: None, max_points: None };
        g.validate()?;
        Ok(g)
    }

    /// Same domain with `points` points on every axis.
    pub fn square(n: usize, extra: usize, points: usize, length: f64) -> Result<Self> {
        Self::new(n, extra, length / (points - 1) as f64, vec![points; n + extra])
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Self {
        self.origin = Some(origin);
        self
    }

    /// Halve the spacing on every axis, keeping the domain.
    pub fn refined(&self) -> Self {
        let mut g = self.clone();
        g.h = match &self.h {
            Steps::Uniform(h) => Steps::Uniform(h / 2.0),
            Steps::PerAxis(v) => Steps::PerAxis(v.iter().map(|h| h / 2.0).collect()),
        };
        g.extent = self.extent.iter().map(|&e| 2 * e - 1).collect();
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("grid needs n >= 1".into()));
        }
        if self.extra != 0 && self.extra + 1 != self.n {
            return Err(Error::Invalid(format!("extra must be 0 or n - 1 = {}", self.n - 1)));
        }
        if self.extent.len() != self.ndim() {
            return Err(Error::Invalid(format!("extent has {} axes, expected {}", self.extent.len(), self.ndim())));
        }
        if self.extent.iter().any(|&e| e < 3) {
            return Err(Error::Invalid("each axis needs at least 3 points".into()));
        }
        for a in 0..self.ndim() {
            let h = self.step(a);
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Invalid("grid steps must be positive".into()));
            }
        }
        if let Steps::PerAxis(v) = &self.h {
            if v.len() != self.ndim() {
                return Err(Error::Invalid("per-axis h has the wrong length".into()));
            }
        }
        if let Some(o) = &self.origin {
            if o.len() != self.ndim() {
                return Err(Error::Invalid("origin has the wrong length".into()));
            }
        }
        let cap = self.max_points.unwrap_or(DEFAULT_MAX_POINTS);
        if self.npoints() > cap {
            return Err(Error::Invalid(format!("grid has {} points, budget is {cap}", self.npoints())));
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.n + self.extra
    }

    pub fn npoints(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn step(&self, axis: usize) -> f64 {
        match &self.h {
            Steps::Uniform(h) => *h,
            Steps::PerAxis(v) => v[axis],
        }
    }

    pub fn max_step(&self) -> f64 {
        (0..self.ndim()).map(|a| self.step(a)).fold(0.0, f64::max)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.extent[axis + 1..].iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().enumerate().map(|(a, &i)| i * self.stride(a)).sum()
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            out[a] = idx % self.extent[a];
            idx /= self.extent[a];
        }
        out
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let m = self.multi(idx);
        (0..self.ndim())
            .map(|a| self.origin.as_ref().map_or(0.0, |o| o[a]) + m[a] as f64 * self.step(a))
            .collect()
    }

    pub fn primary_axes(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn secondary_axes(&self) -> Vec<usize> {
        (self.n..self.ndim()).collect()
    }

    /// Start indices of every grid line along `axis`.
    pub fn line_starts(&self, axis: usize) -> Vec<usize> {
        (0..self.npoints()).filter(|&i| self.multi(i)[axis] == 0).collect()
    }
}

/// Matrix-valued field (vectors are `k x 1`, scalars `1 x 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub data: Vec<CMatrix>,
}

impl Field {
    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Field
    where
        F: Fn(&[f64]) -> CMatrix + Sync + Send,
    {
        let data = (0..grid.npoints()).into_par_iter().map(|i| f(&grid.coords(i))).collect();
        Field { grid: grid.clone(), data }
    }

    pub fn constant(grid: &GridSpec, m: &CMatrix) -> Field {
        Field { grid: grid.clone(), data: vec![m.clone(); grid.npoints()] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.data[0].nrows(), self.data[0].ncols())
    }

    pub fn map<F>(&self, f: F) -> Field
    where
        F: Fn(&CMatrix) -> CMatrix + Sync + Send,
    {
        Field { grid: self.grid.clone(), data: self.data.par_iter().map(f).collect() }
    }

    pub fn zip_map<F>(&self, other: &Field, f: F) -> Field
    where
        F: Fn(&CMatrix, &CMatrix) -> CMatrix + Sync + Send,
    {
        let data = self.data.par_iter().zip(other.data.par_iter()).map(|(a, b)| f(a, b)).collect();
        Field { grid: self.grid.clone(), data }
    }

    /// Order-2 finite difference along `axis`: central inside, one-sided at the ends.
    pub fn partial(&self, axis: usize) -> Field {
        let g = &self.grid;
        let h = g.step(axis);
        let s = g.stride(axis);
        let nax = g.extent[axis];
        let data = (0..g.npoints())
            .into_par_iter()
            .map(|i| {
                let k = (i / s) % nax;
                let f = |o: isize| &self.data[(i as isize + o * s as isize) as usize];
                if k == 0 {
                    (f(0) * r(-3.0) + f(1) * r(4.0) - f(2)) / r(2.0 * h)
                } else if k == nax - 1 {
                    (f(0) * r(3.0) - f(-1) * r(4.0) + f(-2)) / r(2.0 * h)
                } else {
                    (f(1) - f(-1)) / r(2.0 * h)
                }
            })
            .collect();
        Field { grid: g.clone(), data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.par_iter().map(max_abs).reduce(|| 0.0, f64::max)
    }

    pub fn pointwise_norms(&self) -> Vec<f64> {
        self.data.iter().map(max_abs).collect()
    }

    /// Column `j` of each matrix as a vector field.
    pub fn column(&self, j: usize) -> Field {
        self.map(|m| m.columns(j, 1).into_owned())
    }

    /// Values along the line through `start` in direction `axis`.
    pub fn line(&self, start: usize, axis: usize) -> Vec<&CMatrix> {
        let s = self.grid.stride(axis);
        (0..self.grid.extent[axis]).map(|k| &self.data[start + k * s]).collect()
    }

    /// Restriction to interior points (at least `margin` from every face).
    pub fn interior_indices(grid: &GridSpec, margin: usize) -> Vec<usize> {
        (0..grid.npoints())
            .filter(|&i| grid.multi(i).iter().zip(&grid.extent).all(|(&k, &e)| k >= margin && k + margin < e))
            .collect()
    }
}
