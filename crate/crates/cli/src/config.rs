//! Run configuration: one JSON file, every field optional, flags override.

use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use vertex_sew::module::ModuleSpec;
use vertex_sew::seminorm::Region;
use vertex_sew::vertex::AlgebraSpec;
use vertex_sew::{DualVector, GradedVector, Partition, ScaleFactor, Sector, TruncationPolicy, C64};

type Q = BigRational;

/// A usage or configuration problem; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub module: Option<ModuleSpec>,
    #[serde(default)]
    pub policy: TruncationPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub axioms: AxiomsConfig,
    #[serde(default)]
    pub correlator: CorrelatorConfig,
    #[serde(default)]
    pub sew_check: SewCheckConfig,
    #[serde(default)]
    pub converge_scan: ConvergeScanConfig,
    #[serde(default)]
    pub seminorm: SeminormConfig,
}

/// `{"modes":[2,1],"coeff":"1/2"}` is `(1/2) a(-2) a(-1)` on the lowest state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default)]
    pub modes: Vec<u32>,
    #[serde(default = "one_text")]
    pub coeff: String,
}

fn one_text() -> String {
    "1".into()
}

pub type VectorSpec = Vec<TermSpec>;

fn term(modes: &[u32]) -> VectorSpec {
    vec![TermSpec {
        modes: modes.to_vec(),
        coeff: one_text(),
    }]
}

pub fn parse_q(s: &str) -> Result<Q, ConfigError> {
    let s = s.trim();
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    match (n.trim().parse::<BigInt>(), d.trim().parse::<BigInt>()) {
        (Ok(n), Ok(d)) if d != BigInt::from(0) => Ok(Q::new(n, d)),
        _ => bad(format!("not a rational number: {s:?}")),
    }
}

pub fn vector_q(spec: &VectorSpec, sector: Sector) -> Result<GradedVector<Q>, ConfigError> {
    let mut v = GradedVector::zero(sector);
    for t in spec {
        if t.modes.contains(&0) {
            return bad("mode labels must be positive");
        }
        let p = Partition::new(t.modes.clone()).map_err(|e| ConfigError(e.to_string()))?;
        v.add_term(p, parse_q(&t.coeff)?);
    }
    Ok(v)
}

pub fn vector_c(spec: &VectorSpec, sector: Sector) -> Result<GradedVector<C64>, ConfigError> {
    Ok(vector_q(spec, sector)?.to_complex())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AxiomsConfig {
    /// Falls back to 6.
    #[serde(default)]
    pub max_weight: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CorrelatorConfig {
    pub insertions: Vec<VectorSpec>,
    pub dual: VectorSpec,
    pub vector: VectorSpec,
    /// Writes the truncated expansion here when set.
    #[serde(default)]
    pub series_out: Option<PathBuf>,
    #[serde(default = "default_series_cap")]
    pub series_cap: u32,
}

fn default_series_cap() -> u32 {
    6
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        CorrelatorConfig {
            insertions: vec![term(&[1]), term(&[1])],
            dual: term(&[]),
            vector: term(&[]),
            series_out: None,
            series_cap: default_series_cap(),
        }
    }
}

/// Values `from..=to` in `count` equal steps, or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Linspace { from: f64, to: f64, count: usize },
    Values(Vec<f64>),
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let v = match self {
            Axis::Values(v) => v.clone(),
            Axis::Linspace { from, to, count } => match count {
                0 => Vec::new(),
                1 => vec![*from],
                n => (0..*n).map(|i| from + (to - from) * i as f64 / (*n - 1) as f64).collect(),
            },
        };
        if v.iter().any(|x| !x.is_finite()) {
            return bad("grid values must be finite");
        }
        Ok(v)
    }
}

/// Disks over `|z| x r1 x r2` with `arg z` fixed; row order is `|z|` outer,
/// `r2` inner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DiskGrid {
    pub z_abs: Axis,
    #[serde(default)]
    pub z_arg: f64,
    pub r1: Axis,
    pub r2: Axis,
}

impl DiskGrid {
    pub fn disks(&self) -> Result<Vec<(C64, f64, f64)>, ConfigError> {
        let mut out = Vec::new();
        for a in self.z_abs.values()? {
            for r1 in self.r1.values()? {
                for r2 in self.r2.values()? {
                    out.push((C64::from_polar(a, self.z_arg), r1, r2));
                }
            }
        }
        Ok(out)
    }
}

impl Default for DiskGrid {
    fn default() -> Self {
        DiskGrid {
            z_abs: Axis::Linspace {
                from: 0.45,
                to: 0.65,
                count: 5,
            },
            z_arg: 0.0,
            r1: Axis::Linspace {
                from: 0.05,
                to: 0.25,
                count: 5,
            },
            r2: Axis::Linspace {
                from: 0.02,
                to: 0.18,
                count: 5,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SewCheckConfig {
    #[serde(default)]
    pub grid: DiskGrid,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "one")]
    pub l: usize,
    /// Points `[re, im]` of the inner configurations; drawn from the seed
    /// when absent.
    #[serde(default)]
    pub zeta: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub eta: Option<Vec<[f64; 2]>>,
    /// Dual of `lambda = dual o s^{L(0)}`; the lowest state when absent.
    #[serde(default)]
    pub dual: Option<VectorSpec>,
    #[serde(default = "one_text")]
    pub s: String,
}

fn one() -> usize {
    1
}

impl Default for SewCheckConfig {
    fn default() -> Self {
        SewCheckConfig {
            grid: DiskGrid::default(),
            k: 1,
            l: 1,
            zeta: None,
            eta: None,
            dual: None,
            s: one_text(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConvergeScanConfig {
    #[serde(default)]
    pub grid: DiskGrid,
    /// The vector sewn in at `z`.
    #[serde(default = "alpha_alpha")]
    pub u: VectorSpec,
    #[serde(default = "alpha_list")]
    pub insertions: Vec<VectorSpec>,
    #[serde(default = "alpha")]
    pub vector: VectorSpec,
    #[serde(default = "default_point")]
    pub point: Vec<[f64; 2]>,
    #[serde(default = "lowest")]
    pub dual: VectorSpec,
    #[serde(default = "one_text")]
    pub s: String,
}

fn alpha() -> VectorSpec {
    term(&[1])
}

fn alpha_list() -> Vec<VectorSpec> {
    vec![alpha()]
}

fn alpha_alpha() -> VectorSpec {
    term(&[1, 1])
}

fn lowest() -> VectorSpec {
    term(&[])
}

fn default_point() -> Vec<[f64; 2]> {
    vec![[0.6, 0.2]]
}

impl Default for ConvergeScanConfig {
    fn default() -> Self {
        ConvergeScanConfig {
            grid: DiskGrid::default(),
            u: alpha_alpha(),
            insertions: alpha_list(),
            vector: alpha(),
            point: default_point(),
            dual: lowest(),
            s: one_text(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SeminormConfig {
    /// Canonical correlator JSON, as written by `vsew correlator`.
    #[serde(default)]
    pub correlator: Option<PathBuf>,
    #[serde(default = "one_u32")]
    pub n_min: u32,
    #[serde(default = "eight")]
    pub n_max: u32,
    #[serde(default = "full")]
    pub region: Region,
}

fn one_u32() -> u32 {
    1
}

fn eight() -> u32 {
    8
}

fn full() -> Region {
    Region::Full
}

impl Default for SeminormConfig {
    fn default() -> Self {
        SeminormConfig {
            correlator: None,
            n_min: 1,
            n_max: 8,
            region: Region::Full,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
            }
        };
        if let Some(p) = path {
            // relative paths inside the file are taken from its directory
            if let (Some(dir), Some(c)) = (p.parent(), cfg.seminorm.correlator.as_mut()) {
                if c.is_relative() {
                    *c = dir.join(&*c);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.algebra.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.policy.validate().map_err(|e| ConfigError(e.to_string()))?;
        if let Some(m) = &self.module {
            m.momentum().map_err(|e| ConfigError(e.to_string()))?;
        }
        Ok(())
    }

    /// Sector of the last slot.
    pub fn sector(&self) -> Sector {
        match &self.module {
            Some(m) => m.sector().expect("validated"),
            None => Sector::Vacuum,
        }
    }

    pub fn dual_c(&self, spec: &VectorSpec) -> Result<DualVector<C64>, ConfigError> {
        Ok(DualVector::from_vector(vector_c(spec, self.sector())?))
    }
}

pub fn scale_factor(s: &str) -> Result<ScaleFactor, ConfigError> {
    let q = parse_q(s)?;
    let f = num_traits::ToPrimitive::to_f64(&q).unwrap_or(f64::NAN);
    if !(f > 0.0 && f <= 1.0) {
        return bad(format!("damping s must lie in (0, 1], got {s}"));
    }
    Ok(ScaleFactor::Exact(q))
}
