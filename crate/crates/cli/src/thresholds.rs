//! Default acceptance thresholds for every report entry.
//!
//! Algebraic identities get absolute bounds. Entries that measure a
//! discretization error get `C h^2`, with `h` the report's grid step.

use std::collections::BTreeMap;

use quadrica_core::ResidualReport;

pub const DEFAULT_ORDER_CONSTANT: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Absolute(f64),
    SecondOrder,
}

/// Suite an entry came from, for entries merged under a prefix.
fn origin(suite: &str, name: &str) -> (String, String) {
    match name.split_once('.') {
        Some(("run1" | "run2", base)) => ("ricatti".into(), base.into()),
        Some((prefix, base)) => (prefix.into(), base.into()),
        None => (suite.into(), name.into()),
    }
}

pub fn default_bound(suite: &str, entry: &str) -> Bound {
    use Bound::*;
    match (suite, entry) {
        ("sj", _) => Absolute(1e-12),
        ("ivory" | "lmap", _) => Absolute(1e-9),
        ("confocal", "on_quadric" | "normal_orthogonality") => Absolute(1e-8),
        ("confocal", _) => Absolute(1e-10),
        ("ricatti" | "closed_form", "orthogonality") => SecondOrder,
        (_, "orthogonality" | "r3_orthogonality" | "prime_integral" | "involution" | "bpt_identity" | "swap_symmetry") => {
            Absolute(1e-10)
        }
        (_, "frame_leakage") => Absolute(1e-10),
        (_, "vla" | "vla0" | "vla_base" | "isometry_exact" | "segment" | "fourth_leaf") => Absolute(1e-8),
        (_, "prime_drift") => Absolute(1e-9),
        (_, "joined_form_deficit") => Absolute(0.0),
        _ => SecondOrder,
    }
}

/// Threshold resolution: `suite.entry` override, then `entry`, then the
/// default bound.
pub struct Thresholds<'a> {
    pub overrides: &'a BTreeMap<String, f64>,
    pub order_constant: f64,
}

impl Thresholds<'_> {
    pub fn resolve(&self, suite: &str, entry: &str, h: Option<f64>) -> f64 {
        let (from, base) = origin(suite, entry);
        let keys = [format!("{suite}.{entry}"), entry.to_string(), format!("{from}.{base}"), base.clone()];
        if let Some(t) = keys.iter().find_map(|k| self.overrides.get(k)) {
            return *t;
        }
        match default_bound(&from, &base) {
            Bound::Absolute(t) => t,
            Bound::SecondOrder => self.order_constant * h.unwrap_or(1.0).powi(2),
        }
    }

    pub fn apply(&self, report: &mut ResidualReport) {
        let h = report.grid_h;
        for e in &mut report.entries {
            e.threshold = Some(self.resolve(&report.suite, &e.name, h));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_order() {
        let mut o = BTreeMap::new();
        let t = Thresholds { overrides: &o, order_constant: 10.0 };
        assert_eq!(t.resolve("ricatti", "orthogonality", Some(0.5)), 2.5);
        assert_eq!(t.resolve("defqwc", "orthogonality", Some(0.5)), 1e-10);
        assert_eq!(t.resolve("bianchi_quad", "run1.orthogonality", Some(0.5)), 2.5);
        assert_eq!(t.resolve("leaf", "extended.ext3", Some(0.5)), 2.5);
        o.insert("plaquette".into(), 1.0);
        o.insert("moving_frame.plaquette".into(), 2.0);
        let t = Thresholds { overrides: &o, order_constant: 10.0 };
        assert_eq!(t.resolve("moving_frame", "plaquette", None), 2.0);
        assert_eq!(t.resolve("ricatti", "plaquette", None), 1.0);
    }
}
