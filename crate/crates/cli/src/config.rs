//! Flat `key = value` configuration with `[section]` headers and `#`
//! comments. Values are free-form tokens (e.g. `omega = interval 0 1`),
//! so this is a small hand-rolled reader rather than a strict TOML parser.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use fraceig::geometry::DomainSpec;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw section.key -> value map, ordered for reproducible echo.
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((head, _)) => head,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", lineno + 1));
            };
            let full_key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if entries
                .insert(full_key.clone(), value.trim().to_string())
                .is_some()
            {
                return err(format!("duplicate key `{full_key}`"));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse(&text)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("`{key}` is not a number: {v}"))),
        }
    }

    fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.require(key)?
            .parse()
            .map_err(|_| ConfigError(format!("`{key}` is not a number")))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("`{key}` is not an integer: {v}"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => err(format!("`{key}` must be true or false, got {v}")),
        }
    }
}

/// How the Dirichlet set is specified.
#[derive(Clone, Debug)]
pub enum DirichletSpec {
    Empty,
    Full,
    Annulus,
    Ball { radius: f64, offset: f64 },
    Intervals(Vec<(f64, f64)>),
}

/// Constant-potential specification (nodal tables can be added later).
#[derive(Clone, Copy, Debug)]
pub enum PotentialSpec {
    None,
    Constant(f64),
}

/// Fully resolved configuration with defaults applied.
pub struct Config {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub r: f64,
    pub domain: DomainSpec,
    pub h: f64,
    pub dirichlet: DirichletSpec,
    pub potential: PotentialSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub grading_depth: usize,
    pub max_outer: usize,
    pub dof_cap: usize,
    pub radius: f64,
    pub k_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub eps: f64,
    pub points: Vec<[f64; 2]>,
    pub export_weights: bool,
    pub seed: u64,
    pub threads: usize,
}

fn parse_floats(value: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| ConfigError(format!("`{key}` has a non-numeric entry: {t}")))
        })
        .collect()
}

impl Config {
    pub fn resolve(raw: &RawConfig) -> Result<Self, ConfigError> {
        let n = raw.usize_or("problem.n", 1)?;
        let s = raw.require_f64("problem.s")?;
        let p = raw.f64_or("problem.p", 2.0)?;
        let alpha = raw.f64_or("problem.alpha", 0.5)?;
        let r = raw.require_f64("problem.R")?;

        let omega = raw.require("geometry.omega")?;
        let toks: Vec<&str> = omega.split_whitespace().collect();
        let domain = match toks.first().copied() {
            Some("interval") if toks.len() == 3 => DomainSpec::Interval {
                a: toks[1]
                    .parse()
                    .map_err(|_| ConfigError("bad interval endpoint".into()))?,
                b: toks[2]
                    .parse()
                    .map_err(|_| ConfigError("bad interval endpoint".into()))?,
            },
            Some("disk") if toks.len() == 2 => DomainSpec::Disk {
                radius: toks[1]
                    .parse()
                    .map_err(|_| ConfigError("bad disk radius".into()))?,
            },
            Some("polygon") if toks.len() >= 7 && toks.len() % 2 == 1 => {
                let coords = parse_floats(&toks[1..].join(" "), "geometry.omega")?;
                DomainSpec::Polygon {
                    vertices: coords.chunks(2).map(|c| [c[0], c[1]]).collect(),
                }
            }
            _ => return err(format!("cannot parse `geometry.omega = {omega}`")),
        };
        let h = raw.require_f64("geometry.h")?;

        let dirichlet = match raw.get("dirichlet.set") {
            None => DirichletSpec::Annulus,
            Some(v) => {
                let toks: Vec<&str> = v.split_whitespace().collect();
                match toks.first().copied() {
                    Some("empty") => DirichletSpec::Empty,
                    Some("full") => DirichletSpec::Full,
                    Some("annulus") => DirichletSpec::Annulus,
                    Some("ball") if toks.len() == 3 => DirichletSpec::Ball {
                        radius: toks[1]
                            .parse()
                            .map_err(|_| ConfigError("bad ball radius".into()))?,
                        offset: toks[2]
                            .parse()
                            .map_err(|_| ConfigError("bad ball offset".into()))?,
                    },
                    Some("interval") if toks.len() >= 3 && toks.len() % 2 == 1 => {
                        let ends = parse_floats(&toks[1..].join(" "), "dirichlet.set")?;
                        DirichletSpec::Intervals(
                            ends.chunks(2).map(|c| (c[0], c[1])).collect(),
                        )
                    }
                    _ => return err(format!("cannot parse `dirichlet.set = {v}`")),
                }
            }
        };

        let potential = match raw.get("potential.kind") {
            None | Some("none") => PotentialSpec::None,
            Some("constant") => PotentialSpec::Constant(raw.require_f64("potential.value")?),
            Some(v) => return err(format!("unknown potential kind `{v}`")),
        };

        let k_list = match raw.get("experiment.k_list") {
            None => vec![4.0, 8.0, 16.0, 32.0],
            Some(v) => parse_floats(v, "experiment.k_list")?,
        };
        let s_list = match raw.get("experiment.s_list") {
            None => vec![0.6, 0.8, 0.9, 0.95],
            Some(v) => parse_floats(v, "experiment.s_list")?,
        };
        let points = match raw.get("experiment.points") {
            None => vec![],
            Some(v) => {
                let vals = parse_floats(v, "experiment.points")?;
                if vals.len() % 2 != 0 {
                    return err("`experiment.points` needs an even count of coordinates");
                }
                vals.chunks(2).map(|c| [c[0], c[1]]).collect()
            }
        };

        Ok(Config {
            n,
            s,
            p,
            alpha,
            r,
            domain,
            h,
            dirichlet,
            potential,
            tol: raw.f64_or("solver.tol", 1e-12)?,
            max_iter: raw.usize_or("solver.max_iter", 10_000)?,
            restarts: raw.usize_or("solver.restarts", 2)?,
            grading_depth: raw.usize_or("solver.grading_depth", 8)?,
            max_outer: raw.usize_or("solver.max_outer", 100)?,
            dof_cap: raw.usize_or("solver.dof_cap", 2000)?,
            radius: raw.f64_or("experiment.radius", 0.5)?,
            k_list,
            s_list,
            eps: raw.f64_or("experiment.eps", 0.3)?,
            points,
            export_weights: raw.bool_or("output.export_weights", false)?,
            seed: raw.usize_or("output.seed", 42)? as u64,
            threads: raw.usize_or("output.threads", 0)?,
        })
    }

    /// Echo of every resolved setting, for the run manifest.
    pub fn manifest_lines(&self) -> Vec<String> {
        let fmt_list =
            |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let domain = match &self.domain {
            DomainSpec::Interval { a, b } => format!("interval {a} {b}"),
            DomainSpec::Disk { radius } => format!("disk {radius}"),
            DomainSpec::Polygon { vertices } => {
                let coords: Vec<String> = vertices
                    .iter()
                    .flat_map(|v| [v[0].to_string(), v[1].to_string()])
                    .collect();
                format!("polygon {}", coords.join(" "))
            }
        };
        let dirichlet = match &self.dirichlet {
            DirichletSpec::Empty => "empty".to_string(),
            DirichletSpec::Full => "full".to_string(),
            DirichletSpec::Annulus => "annulus".to_string(),
            DirichletSpec::Ball { radius, offset } => format!("ball {radius} {offset}"),
            DirichletSpec::Intervals(list) => {
                let coords: Vec<String> = list
                    .iter()
                    .flat_map(|(a, b)| [a.to_string(), b.to_string()])
                    .collect();
                format!("interval {}", coords.join(" "))
            }
        };
        let potential = match self.potential {
            PotentialSpec::None => "none".to_string(),
            PotentialSpec::Constant(c) => format!("constant {c}"),
        };
        vec![
            format!("problem.n = {}", self.n),
            format!("problem.s = {}", self.s),
            format!("problem.p = {}", self.p),
            format!("problem.alpha = {}", self.alpha),
            format!("problem.R = {}", self.r),
            format!("geometry.omega = {domain}"),
            format!("geometry.h = {}", self.h),
            format!("dirichlet.set = {dirichlet}"),
            format!("potential = {potential}"),
            format!("solver.tol = {}", self.tol),
            format!("solver.max_iter = {}", self.max_iter),
            format!("solver.restarts = {}", self.restarts),
            format!("solver.grading_depth = {}", self.grading_depth),
            format!("solver.max_outer = {}", self.max_outer),
            format!("solver.dof_cap = {}", self.dof_cap),
            format!("experiment.radius = {}", self.radius),
            format!("experiment.k_list = {}", fmt_list(&self.k_list)),
            format!("experiment.s_list = {}", fmt_list(&self.s_list)),
            format!("experiment.eps = {}", self.eps),
            format!(
                "experiment.points = {}",
                fmt_list(
                    &self
                        .points
                        .iter()
                        .flat_map(|p| [p[0], p[1]])
                        .collect::<Vec<_>>()
                )
            ),
            format!("output.export_weights = {}", self.export_weights),
            format!("output.seed = {}", self.seed),
            format!("output.threads = {}", self.threads),
        ]
    }
}
