//! Run configuration and its flat `key = value` text form.
//!
//! Keys (all optional; defaults in brackets):
//!
//! | key | value |
//! |---|---|
//! | `problem` | `cube` \| `bars` \| `variable_bars` \| `mesh` \| `external` [`cube`] |
//! | `n` | elements per axis of generated cubes [8] |
//! | `formulation` | `poisson` \| `elasticity` [`elasticity`] |
//! | `contrast` | stiff/soft modulus ratio of the bars [1e6] |
//! | `mesh` | mesh file (`problem = mesh`) |
//! | `matrix`, `rhs`, `partition`, `coords` | input files (`problem = external`) |
//! | `levels` | number of levels L ≥ 2 [2] |
//! | `subdomains` | subdomain counts of levels 1..L−1, e.g. `64/8` [8] |
//! | `policy` | `corners` \| `corners_edges` \| `corners_edges_faces` \| `saturated` [`corners_edges`] |
//! | `weighting` | `stiffness` \| `multiplicity` [`stiffness`] |
//! | `edge_include_corners` | bool [false] |
//! | `adaptive` | bool [false] |
//! | `tau` | per-level target, `inf` allowed [2] |
//! | `lobpcg_vectors`, `lobpcg_iters`, `lobpcg_tol` | eigensolver budget [10, 15, 1e-5] |
//! | `edge_zeroing`, `recheck` | bool [true, false] |
//! | `rtol`, `max_iters` | PCG stopping [1e-8, 1000] |
//! | `preconditioned_norm` | bool [false] |
//! | `seed` | u64 [0] |
//! | `threads` | worker count, 0 = all cores [0] |
//! | `output` | directory for reports (none by default) |
//!
//! Blank lines and text after `#` are ignored.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::AdaptiveConfig;
use crate::constraints::ConstraintPolicy;
use crate::krylov::PcgOptions;
use crate::mesh::Formulation;
use crate::substructure::Weighting;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value '{value}' for '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSource {
    /// Homogeneous unit cube: Poisson with Dirichlet data on the whole
    /// boundary, or elasticity under self weight fixed at a vertical edge.
    Cube { n: usize },
    /// Elasticity cube with nine stiff bars.
    Bars { n: usize, contrast: f64, variable: bool },
    MeshFile { path: PathBuf },
    External { matrix: PathBuf, rhs: PathBuf, partition: PathBuf, coords: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub formulation: Formulation,
    pub levels: usize,
    /// Subdomain counts of levels `1..L−1`.
    pub subdomains: Vec<usize>,
    pub policy: ConstraintPolicy,
    pub weighting: Weighting,
    pub edge_include_corners: bool,
    /// Adaptive constraint selection; `None` keeps only the policy's
    /// constraints.
    pub adaptive: Option<AdaptiveConfig>,
    pub pcg: PcgOptions,
    pub seed: u64,
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: ProblemSource::Cube { n: 8 },
            formulation: Formulation::Elasticity,
            levels: 2,
            subdomains: vec![8],
            policy: ConstraintPolicy::CornersEdges,
            weighting: Weighting::Stiffness,
            edge_include_corners: false,
            adaptive: None,
            pcg: PcgOptions::default(),
            seed: 0,
            threads: 0,
            output: None,
        }
    }
}

fn parse_val<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.into(), value: value.into(), reason: e.to_string() })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: value.into(), reason: "expected a boolean".into() }),
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "problem",
    "n",
    "formulation",
    "contrast",
    "mesh",
    "matrix",
    "rhs",
    "partition",
    "coords",
    "levels",
    "subdomains",
    "policy",
    "weighting",
    "edge_include_corners",
    "adaptive",
    "tau",
    "lobpcg_vectors",
    "lobpcg_iters",
    "lobpcg_tol",
    "edge_zeroing",
    "recheck",
    "rtol",
    "max_iters",
    "preconditioned_norm",
    "seed",
    "threads",
    "output",
];

impl RunConfig {
    /// Reads a config file; keys not present keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn adaptive_mut(&mut self) -> &mut AdaptiveConfig {
        self.adaptive.get_or_insert_with(AdaptiveConfig::default)
    }

    fn n_mut(&mut self) -> Option<&mut usize> {
        match &mut self.source {
            ProblemSource::Cube { n } | ProblemSource::Bars { n, .. } => Some(n),
            _ => None,
        }
    }

    fn external_mut(&mut self) -> (&mut PathBuf, &mut PathBuf, &mut PathBuf, &mut Option<PathBuf>) {
        if !matches!(self.source, ProblemSource::External { .. }) {
            self.source = ProblemSource::External {
                matrix: PathBuf::new(),
                rhs: PathBuf::new(),
                partition: PathBuf::new(),
                coords: None,
            };
        }
        match &mut self.source {
            ProblemSource::External { matrix, rhs, partition, coords } => (matrix, rhs, partition, coords),
            _ => unreachable!(),
        }
    }

    /// Sets one key. Adaptive keys switch adaptivity on, except
    /// `adaptive = false`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let n_now = self.n_mut().map(|n| *n).unwrap_or(8);
        match key {
            "problem" => {
                self.source = match value {
                    "cube" => ProblemSource::Cube { n: n_now },
                    "bars" | "variable_bars" => {
                        self.formulation = Formulation::Elasticity;
                        ProblemSource::Bars { n: n_now, contrast: 1e6, variable: value == "variable_bars" }
                    }
                    "mesh" => ProblemSource::MeshFile { path: PathBuf::new() },
                    "external" => ProblemSource::External {
                        matrix: PathBuf::new(),
                        rhs: PathBuf::new(),
                        partition: PathBuf::new(),
                        coords: None,
                    },
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected cube, bars, variable_bars, mesh or external".into(),
                        })
                    }
                }
            }
            "n" => {
                let v = parse_val(key, value)?;
                *self.n_mut().ok_or_else(|| ConfigError::Invalid("'n' applies to generated problems only".into()))? = v;
            }
            "formulation" => self.formulation = parse_val(key, value)?,
            "contrast" => match &mut self.source {
                ProblemSource::Bars { contrast, .. } => *contrast = parse_val(key, value)?,
                _ => return Err(ConfigError::Invalid("'contrast' applies to the bars problems only".into())),
            },
            "mesh" => self.source = ProblemSource::MeshFile { path: value.into() },
            "matrix" => *self.external_mut().0 = value.into(),
            "rhs" => *self.external_mut().1 = value.into(),
            "partition" => *self.external_mut().2 = value.into(),
            "coords" => *self.external_mut().3 = Some(value.into()),
            "levels" => self.levels = parse_val(key, value)?,
            "subdomains" => {
                self.subdomains = value
                    .split(['/', ','])
                    .map(|t| parse_val::<usize>(key, t.trim()))
                    .collect::<Result<_, _>>()?
            }
            "policy" => self.policy = parse_val(key, value)?,
            "weighting" => self.weighting = parse_val(key, value)?,
            "edge_include_corners" => self.edge_include_corners = parse_bool(key, value)?,
            "adaptive" => {
                if parse_bool(key, value)? {
                    self.adaptive_mut();
                } else {
                    self.adaptive = None;
                }
            }
            "tau" => self.adaptive_mut().tau = parse_val(key, value)?,
            "lobpcg_vectors" => self.adaptive_mut().max_vectors = parse_val(key, value)?,
            "lobpcg_iters" => self.adaptive_mut().max_iters = parse_val(key, value)?,
            "lobpcg_tol" => self.adaptive_mut().tol = parse_val(key, value)?,
            "edge_zeroing" => self.adaptive_mut().edge_zeroing = parse_bool(key, value)?,
            "recheck" => self.adaptive_mut().recheck = parse_bool(key, value)?,
            "rtol" => self.pcg.rtol = parse_val(key, value)?,
            "max_iters" => self.pcg.max_iters = parse_val(key, value)?,
            "preconditioned_norm" => self.pcg.preconditioned_norm = parse_bool(key, value)?,
            "seed" => self.seed = parse_val(key, value)?,
            "threads" => self.threads = parse_val(key, value)?,
            "output" => self.output = Some(value.into()),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.levels < 2 {
            return bad(format!("levels must be at least 2, got {}", self.levels));
        }
        let external = matches!(self.source, ProblemSource::External { .. });
        // the external partition fixes level 1, so its count may be omitted
        let expected = self.levels - 1;
        let given = self.subdomains.len();
        if !(given == expected || external && given + 1 == expected) {
            return bad(format!("{} levels need {} subdomain counts, got {}", self.levels, expected, given));
        }
        if self.subdomains.iter().any(|&c| c == 0) {
            return bad("subdomain counts must be positive".into());
        }
        if self.subdomains.windows(2).any(|w| w[1] >= w[0]) {
            return bad("subdomain counts must strictly decrease across levels".into());
        }
        if let Some(a) = &self.adaptive {
            if !(a.tau > 1.0) {
                return bad(format!("tau must exceed 1, got {}", a.tau));
            }
            if a.max_vectors == 0 {
                return bad("lobpcg_vectors must be positive".into());
            }
        }
        if !(self.pcg.rtol > 0.0) {
            return bad("rtol must be positive".into());
        }
        match &self.source {
            ProblemSource::Cube { n } | ProblemSource::Bars { n, .. } if *n == 0 => bad("n must be positive".into()),
            ProblemSource::Bars { contrast, .. } if !(*contrast > 0.0) => bad("contrast must be positive".into()),
            ProblemSource::MeshFile { path } if path.as_os_str().is_empty() => bad("missing mesh path".into()),
            ProblemSource::External { matrix, rhs, partition, .. }
                if matrix.as_os_str().is_empty() || rhs.as_os_str().is_empty() || partition.as_os_str().is_empty() =>
            {
                bad("external problems need matrix, rhs and partition".into())
            }
            _ => Ok(()),
        }
    }

    /// Whether adaptive selection runs with a finite target.
    pub fn adaptive_active(&self) -> bool {
        self.adaptive.is_some_and(|a| a.tau.is_finite())
    }

    /// Short problem label for reports.
    pub fn label(&self) -> String {
        match &self.source {
            ProblemSource::Cube { n } => format!("cube-{}-{n}", self.formulation.name()),
            ProblemSource::Bars { n, contrast, variable } => {
                format!("{}-{n}-{contrast:e}", if *variable { "variable_bars" } else { "bars" })
            }
            ProblemSource::MeshFile { path } => format!("mesh:{}", path.display()),
            ProblemSource::External { matrix, .. } => format!("external:{}", matrix.display()),
        }
    }
}
