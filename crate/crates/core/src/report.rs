//! Named residual summaries shared by every verification suite.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// coarse/fine ratio of `max` when two grids were compared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl ResidualEntry {
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        // Sequential fold keeps the reduction independent of thread count.
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for &v in values {
            let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
            max = max.max(v);
            sum += v;
        }
        let mean = if values.is_empty() { 0.0 } else { sum / values.len() as f64 };
        ResidualEntry { name: name.to_string(), max, mean, samples: values.len(), threshold: None, ratio: None }
    }

    pub fn passes(&self) -> bool {
        match self.threshold {
            Some(t) => self.max <= t,
            None => self.max.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub suite: String,
    pub entries: Vec<ResidualEntry>,
    #[serde(rename = "grid-h")]
    pub grid_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_ratio: Option<f64>,
    #[serde(default)]
    pub masked: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ResidualReport {
    pub fn new(suite: &str) -> Self {
        ResidualReport { suite: suite.to_string(), ..Default::default() }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.grid_h = Some(h);
        self
    }

    pub fn push(&mut self, name: &str, values: &[f64]) -> &mut ResidualEntry {
        self.entries.push(ResidualEntry::from_values(name, values));
        self.entries.last_mut().unwrap()
    }

    pub fn push_entry(&mut self, e: ResidualEntry) {
        self.entries.push(e);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn get(&self, name: &str) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn max_of(&self, name: &str) -> f64 {
        self.get(name).map(|e| e.max).unwrap_or(f64::NAN)
    }

    /// Largest residual across all entries.
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max).fold(0.0, f64::max)
    }

    pub fn set_threshold(&mut self, name: &str, t: f64) {
        for e in self.entries.iter_mut().filter(|e| e.name == name) {
            e.threshold = Some(t);
        }
    }

    pub fn set_all_thresholds(&mut self, t: f64) {
        for e in &mut self.entries {
            e.threshold = Some(t);
        }
    }

    pub fn passes(&self) -> bool {
        self.entries.iter().all(|e| e.passes())
    }

    pub fn merge(&mut self, other: ResidualReport, prefix: &str) {
        for mut e in other.entries {
            if !prefix.is_empty() {
                e.name = format!("{prefix}.{}", e.name);
            }
            self.entries.push(e);
        }
        self.masked += other.masked;
        self.notes.extend(other.notes);
    }

    /// Combine a coarse and a fine run of the same suite into a report on
    /// the fine grid with per-entry ratios `coarse.max / fine.max`.
    pub fn refine(coarse: &ResidualReport, fine: &ResidualReport) -> ResidualReport {
        let mut out = fine.clone();
        for e in &mut out.entries {
            if let Some(ce) = coarse.get(&e.name) {
                e.ratio = Some(ce.max / e.max);
            }
        }
        if let (Some(hc), Some(hf)) = (coarse.grid_h, fine.grid_h) {
            out.refinement_ratio = Some(hc / hf);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_and_refine() {
        let mut a = ResidualReport::new("s").with_h(0.1);
        a.push("x", &[1.0, -4.0]);
        let mut b = ResidualReport::new("s").with_h(0.05);
        b.push("x", &[0.5, 1.0]);
        assert_eq!(a.get("x").unwrap().max, 4.0);
        assert_eq!(a.get("x").unwrap().mean, 2.5);
        let r = ResidualReport::refine(&a, &b);
        assert_eq!(r.get("x").unwrap().ratio, Some(4.0));
        assert_eq!(r.refinement_ratio, Some(2.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"grid-h\":0.05"));
    }

    #[test]
    fn nan_is_a_failure() {
        let mut a = ResidualReport::new("s");
        a.push("x", &[f64::NAN]);
        assert!(!a.passes());
    }
}
