//! Matrix-valued differential forms on a grid, in coefficient form.
//!
//! A 1-form stores one coefficient field per axis; a 2-form one per axis pair
//! `(a, b)` with `a < b` (the coefficient of `du^a ^ du^b`). Absent
//! coefficients are zero.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

use super::grid::{Field, GridSpec};

#[derive(Debug, Clone)]
pub struct FormField {
    pub grid: GridSpec,
    pub degree: usize,
    /// Degree 1: indexed by axis. Degree 2: indexed by `pair_index(a, b)`.
    pub coeffs: Vec<Option<Field>>,
}

pub fn pair_index(ndim: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < ndim);
    a * ndim + b
}

impl FormField {
    pub fn zero(grid: &GridSpec, degree: usize) -> Self {
        let len = if degree == 1 { grid.ndim() } else { grid.ndim() * grid.ndim() };
        FormField { grid: grid.clone(), degree, coeffs: vec![None; len] }
    }

    pub fn one_form(grid: &GridSpec, comps: Vec<(usize, Field)>) -> Self {
        let mut f = Self::zero(grid, 1);
        for (a, fld) in comps {
            f.coeffs[a] = Some(fld);
        }
        f
    }

    pub fn get1(&self, a: usize) -> Option<&Field> {
        self.coeffs[a].as_ref()
    }

    /// Coefficient of `du^a ^ du^b` with the antisymmetric sign for `a > b`.
    pub fn get2(&self, a: usize, b: usize) -> Option<Field> {
        let nd = self.grid.ndim();
        if a == b {
            return None;
        }
        if a < b {
            self.coeffs[pair_index(nd, a, b)].clone()
        } else {
            self.coeffs[pair_index(nd, b, a)].as_ref().map(|f| f.map(|m| -m))
        }
    }

    pub fn axes(&self) -> Vec<usize> {
        assert_eq!(self.degree, 1);
        (0..self.grid.ndim()).filter(|&a| self.coeffs[a].is_some()).collect()
    }

    /// Exterior derivative restricted to derivatives along `deriv_axes`.
    pub fn d_wedge(&self, deriv_axes: &[usize]) -> FormField {
        assert_eq!(self.degree, 1);
        let nd = self.grid.ndim();
        let mut out = Self::zero(&self.grid, 2);
        for a in 0..nd {
            for b in a + 1..nd {
                // d(alpha_b du^b) contributes d_a alpha_b du^a ^ du^b.
                let mut acc: Option<Field> = None;
                if deriv_axes.contains(&a) {
                    if let Some(fb) = &self.coeffs[b] {
                        acc = Some(fb.partial(a));
                    }
                }
                if deriv_axes.contains(&b) {
                    if let Some(fa) = &self.coeffs[a] {
                        let t = fa.partial(b);
                        acc = Some(match acc {
                            Some(x) => x.zip_map(&t, |p, q| p - q),
                            None => t.map(|m| -m),
                        });
                    }
                }
                out.coeffs[pair_index(nd, a, b)] = acc;
            }
        }
        out
    }

    /// `alpha ^ beta` for 1-forms, with pointwise matrix products.
    pub fn wedge(&self, other: &FormField) -> FormField {
        assert!(self.degree == 1 && other.degree == 1);
        let nd = self.grid.ndim();
        let mut out = Self::zero(&self.grid, 2);
        for a in 0..nd {
            for b in a + 1..nd {
                let mut acc: Option<Field> = None;
                if let (Some(x), Some(y)) = (&self.coeffs[a], &other.coeffs[b]) {
                    acc = Some(x.zip_map(y, |p, q| p * q));
                }
                if let (Some(x), Some(y)) = (&self.coeffs[b], &other.coeffs[a]) {
                    let t = x.zip_map(y, |p, q| p * q);
                    acc = Some(match acc {
                        Some(s) => s.zip_map(&t, |p, q| p - q),
                        None => t.map(|m| -m),
                    });
                }
                out.coeffs[pair_index(nd, a, b)] = acc;
            }
        }
        out
    }

    pub fn sub(&self, other: &FormField) -> FormField {
        assert_eq!(self.degree, other.degree);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| match (x, y) {
                (Some(x), Some(y)) => Some(x.zip_map(y, |p, q| p - q)),
                (Some(x), None) => Some(x.clone()),
                (None, Some(y)) => Some(y.map(|m| -m)),
                (None, None) => None,
            })
            .collect();
        FormField { grid: self.grid.clone(), degree: self.degree, coeffs }
    }

    pub fn add(&self, other: &FormField) -> FormField {
        self.sub(&other.neg())
    }

    pub fn neg(&self) -> FormField {
        let coeffs = self.coeffs.iter().map(|x| x.as_ref().map(|f| f.map(|m| -m))).collect();
        FormField { grid: self.grid.clone(), degree: self.degree, coeffs }
    }

    /// Pointwise maximum modulus over all coefficients.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.npoints()];
        for f in self.coeffs.iter().flatten() {
            for (o, m) in out.iter_mut().zip(&f.data) {
                *o = f64::max(*o, crate::linalg::max_abs(m));
            }
        }
        out
    }
}

/// `d' f`: the primary part of the differential of `f`.
pub fn d_prime(f: &Field) -> FormField {
    let comps = f.grid.primary_axes().into_iter().map(|a| (a, f.partial(a))).collect();
    FormField::one_form(&f.grid, comps)
}

/// `d'' f`: the secondary part of the differential of `f`.
pub fn d_second(f: &Field) -> Result<FormField> {
    if f.grid.extra == 0 {
        return Err(Error::MissingAxes("d'' needs secondary axes u^{n+1}..u^{2n-1}".into()));
    }
    let comps = f.grid.secondary_axes().into_iter().map(|a| (a, f.partial(a))).collect();
    Ok(FormField::one_form(&f.grid, comps))
}

/// One-form with a constant matrix coefficient on each listed axis
/// (for example `delta'` with `E_k` on axis `k`).
pub fn constant_one_form(grid: &GridSpec, comps: Vec<(usize, CMatrix)>) -> FormField {
    FormField::one_form(grid, comps.into_iter().map(|(a, m)| (a, Field::constant(grid, &m))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sc(z: crate::linalg::C64) -> CMatrix {
        CMatrix::from_element(1, 1, z)
    }

    #[test]
    fn constant_field_has_zero_differential() {
        let g = GridSpec::new(2, 1, 0.1, vec![5, 5, 4]).unwrap();
        let f = Field::constant(&g, &sc(c(1.0, 2.0)));
        assert!(d_prime(&f).pointwise_norms().iter().all(|&x| x == 0.0));
        assert!(d_second(&f).unwrap().pointwise_norms().iter().all(|&x| x == 0.0));
        let g0 = GridSpec::new(2, 0, 0.1, vec![5, 5]).unwrap();
        assert!(d_second(&Field::constant(&g0, &sc(c(1.0, 0.0)))).is_err());
    }

    #[test]
    fn bilinear_field_differential_is_exact() {
        let g = GridSpec::new(2, 0, 0.1, vec![6, 6]).unwrap();
        let f = Field::from_fn(&g, |u| sc(c(u[0] * u[1], 0.0)));
        let df = d_prime(&f);
        for i in 0..g.npoints() {
            let u = g.coords(i);
            assert!((df.get1(0).unwrap().data[i][(0, 0)] - c(u[1], 0.0)).norm() < 1e-12);
            assert!((df.get1(1).unwrap().data[i][(0, 0)] - c(u[0], 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn ddf_vanishes() {
        // difference operators on distinct axes commute
        let g = GridSpec::square(2, 0, 17, 1.0).unwrap();
        let f = Field::from_fn(&g, |u| sc(c((u[0] * 1.3).sin() * (u[1] * 0.7).exp(), u[0] * u[1] * u[1])));
        let dd = d_prime(&f).d_wedge(&[0, 1]);
        assert!(dd.pointwise_norms().into_iter().fold(0.0, f64::max) < 1e-11);
    }

    #[test]
    fn wedge_is_antisymmetric() {
        let g = GridSpec::new(2, 0, 0.1, vec![4, 4]).unwrap();
        let a = FormField::one_form(&g, vec![(0, Field::from_fn(&g, |u| sc(c(u[0], 1.0))))]);
        let b = FormField::one_form(&g, vec![(1, Field::from_fn(&g, |u| sc(c(2.0, u[1]))))]);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        let s = ab.add(&ba);
        assert!(s.pointwise_norms().iter().all(|&x| x < 1e-15));
    }
}
