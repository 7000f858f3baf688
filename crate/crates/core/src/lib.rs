//! Numerical engine for deformations of n-dimensional quadrics in C^(2n-1).
//!
//! The crate is organised bottom-up:
//!
//! * [`sjcalc`]: complex symmetric ("symmetric Jordan") matrix calculus.
//! * [`confocal`]: canonical quadrics, confocal families, the Ivory affinity.
//! * [`lmap`]: the affine parametrization `x0 = L Z(V)` of quadrics without center.
//! * [`netgrid`]: grid fields, discrete exterior calculus and the integrable frame systems.
//! * [`backlund`]: the Backlund transformation and the permutability formula.
//!
//! All complex arithmetic uses the complexified Euclidean bilinear form
//! `<x, y> = x^T y` (no conjugation) unless a function says otherwise.

pub mod backlund;
pub mod confocal;
pub mod error;
pub mod linalg;
pub mod lmap;
pub mod netgrid;
pub mod report;
pub mod sjcalc;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use report::{ResidualEntry, ResidualReport};
