use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use quadrica_core::backlund::BacklundConfig;
use quadrica_core::confocal::{random_quadric, Quadric, QuadricKind};
use quadrica_core::netgrid::{GridSpec, SeedConstants};
use quadrica_core::sjcalc::{SJBlock, SJSpec};
use quadrica_core::C64;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Sjcheck,
    ConfocalVerify,
    IvoryVerify,
    LmapVerify,
    Deform,
    Backlund,
    Bpt,
}

impl Pipeline {
    pub const ALL: [Pipeline; 7] = [
        Pipeline::Sjcheck,
        Pipeline::ConfocalVerify,
        Pipeline::IvoryVerify,
        Pipeline::LmapVerify,
        Pipeline::Deform,
        Pipeline::Backlund,
        Pipeline::Bpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Sjcheck => "sjcheck",
            Pipeline::ConfocalVerify => "confocal-verify",
            Pipeline::IvoryVerify => "ivory-verify",
            Pipeline::LmapVerify => "lmap-verify",
            Pipeline::Deform => "deform",
            Pipeline::Backlund => "backlund",
            Pipeline::Bpt => "bpt",
        }
    }

    pub fn parse(s: &str) -> Option<Pipeline> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// A quadric given by its SJ blocks, or drawn at random from the run seed
/// when `blocks` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadricSection {
    pub kind: QuadricKind,
    #[serde(default)]
    pub blocks: Option<Vec<SJBlock>>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl QuadricSection {
    pub fn build(&self, seed: u64) -> Result<Quadric, CliError> {
        match &self.blocks {
            Some(b) => {
                let q = quadrica_core::confocal::canonical_quadric(self.kind, &SJSpec::new(b.clone()))?;
                if let Some(n) = self.n {
                    if n != q.n {
                        return Err(CliError::Usage(format!("quadric.n = {n} but the blocks give n = {}", q.n)));
                    }
                }
                Ok(q)
            }
            None => {
                let n = self.n.ok_or_else(|| CliError::Usage("quadric needs either blocks or n".into()))?;
                Ok(random_quadric(&mut ChaCha8Rng::seed_from_u64(seed), self.kind, n)?)
            }
        }
    }
}

/// Two-parameter run of the permutability quadrilateral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BptSection {
    pub first: BacklundConfig,
    pub second: BacklundConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub quadric: Option<QuadricSection>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Random samples per suite.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Number of random admissible `z`, or a fixed list as `[re, im]` pairs.
    #[serde(default)]
    pub z_count: Option<usize>,
    #[serde(default)]
    pub z: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub seed_constants: Option<SeedConstants>,
    /// Secondary rates `m_l` as `[re, im]`.
    #[serde(default)]
    pub rates: Option<Vec<[f64; 2]>>,
    /// Secondary functions `g_l(t) = a t + b` of the multiconjugate extension.
    #[serde(default)]
    pub multiconjugate: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub backlund: Option<BacklundConfig>,
    #[serde(default)]
    pub bpt: Option<BptSection>,
    /// Directory with the field dumps of an earlier `deform` run.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "yes")]
    pub dump_fields: bool,
    /// Geometry exports of the realized net: `"csv"` and/or `"ply"`.
    #[serde(default)]
    pub export: Vec<String>,
    /// Components of the real 3-projection for PLY, e.g. `["re0", "re1", "im2"]`.
    #[serde(default)]
    pub projection: Option<[String; 3]>,
    #[serde(default)]
    pub substeps: Option<usize>,
    /// `C` in the default `C h^2` bound of discretization residuals.
    #[serde(default)]
    pub order_constant: Option<f64>,
    /// Overrides keyed by `suite.entry` or `entry`.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Schema checks that do not need any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        for f in &self.export {
            f.parse::<crate::export::Format>()?;
        }
        crate::export::parse_projection(self.projection.as_ref())?;
        let bcs = self.backlund.iter().chain(self.bpt.iter().flat_map(|b| [&b.first, &b.second]));
        for bc in bcs {
            if bc.branch != 1 && bc.branch != -1 {
                return Err(CliError::Usage(format!("branch must be 1 or -1, got {}", bc.branch)));
            }
        }
        if self.substeps == Some(0) {
            return Err(CliError::Usage("substeps must be positive".into()));
        }
        if self.thresholds.values().any(|t| t.is_nan() || *t < 0.0) {
            return Err(CliError::Usage("thresholds must be non-negative numbers".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn samples(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    pub fn quadric(&self) -> Result<Quadric, CliError> {
        self.quadric.as_ref().ok_or_else(|| CliError::Usage("config needs a quadric section".into()))?.build(self.seed())
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let g = self.grid.clone().ok_or_else(|| CliError::Usage("config needs a grid section".into()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn fixed_z(&self) -> Option<Vec<C64>> {
        self.z.as_ref().map(|v| v.iter().map(|p| C64::new(p[0], p[1])).collect())
    }

    pub fn rates(&self) -> Vec<C64> {
        self.rates.as_ref().map(|v| v.iter().map(|p| C64::new(p[0], p[1])).collect()).unwrap_or_default()
    }
}
