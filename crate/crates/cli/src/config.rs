//! Experiment configuration: an INI-style file plus command-line flags.
//!
//! Keys outside any section apply to every subcommand; keys under `[name]`
//! apply only to the subcommand `name` and override the global ones. A flag
//! given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use loopzeta::surfaces::ModelSurface;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing required parameter `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IniFile {
    global: BTreeMap<String, String>,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl IniFile {
    pub fn parse(text: &str) -> Result<IniFile, ConfigError> {
        let mut ini = IniFile::default();
        let mut section: Option<String> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line: k + 1, message: "unclosed section header".into() })?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: k + 1, message: format!("expected `key = value`, got `{line}`") })?;
            let (key, value) = (key.trim().replace('_', "-"), value.trim().to_string());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: k + 1, message: "empty key".into() });
            }
            match &section {
                Some(s) => ini.sections.entry(s.clone()).or_default().insert(key, value),
                None => ini.global.insert(key, value),
            };
        }
        Ok(ini)
    }

    pub fn load(path: &Path) -> Result<IniFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        IniFile::parse(&text)
    }

    pub fn get(&self, command: &str, key: &str) -> Option<&str> {
        self.sections
            .get(command)
            .and_then(|s| s.get(key))
            .or_else(|| self.global.get(key))
            .map(String::as_str)
    }
}

/// Resolves parameters in the order flag, config file, default, and records every
/// resolved value for the run log.
pub struct Resolver<'a> {
    file: &'a IniFile,
    command: &'a str,
    resolved: Vec<(String, String)>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a IniFile, command: &'a str) -> Self {
        Resolver { file, command, resolved: Vec::new() }
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(self.command, key) {
                Some(text) => Some(text.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), message: e.to_string() })?),
                None => None,
            },
        };
        let shown = value.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string());
        self.resolved.push((key.to_string(), shown));
        Ok(value)
    }

    pub fn or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = self.optional(key, flag)?;
        match value {
            Some(v) => Ok(v),
            None => {
                self.resolved.last_mut().expect("just pushed").1 = default.to_string();
                Ok(default)
            }
        }
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, ConfigError>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        self.optional(key, flag)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn finish(self) -> Vec<(String, String)> {
        self.resolved
    }
}

/// Comma-separated list, e.g. `0.4,0.2,0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T> FromStr for List<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let values = s
            .split(',')
            .map(|t| t.trim().parse::<T>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(List(values))
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// `disk:1.0`, `rectangle:1.0x2.0`, … as accepted by [`ModelSurface::parse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceArg(pub ModelSurface);

impl FromStr for SurfaceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ModelSurface::parse(s).map(SurfaceArg).map_err(|e| e.to_string())
    }
}

impl fmt::Display for SurfaceArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            ModelSurface::IntervalDirichlet { length } => write!(f, "interval:{length}"),
            ModelSurface::RectangleDirichlet { a, b } => write!(f, "rectangle:{a}x{b}"),
            ModelSurface::FlatTorus { a, b } => write!(f, "torus:{a}x{b}"),
            ModelSurface::RoundSphere { radius } => write!(f, "sphere:{radius}"),
            ModelSurface::DiskDirichlet { radius } => write!(f, "disk:{radius}"),
        }
    }
}

/// Where a graph comes from: an edge-list file or `random:<max vertices>`.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Random(usize),
}

impl FromStr for GraphSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.strip_prefix("random:") {
            Some(n) => {
                let n: usize = n.parse().map_err(|e| format!("random graph size `{n}`: {e}"))?;
                if n < 2 {
                    return Err("random graphs need at least two vertices".into());
                }
                Ok(GraphSource::Random(n))
            }
            None => Ok(GraphSource::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::File(p) => write!(f, "{}", p.display()),
            GraphSource::Random(n) => write!(f, "random:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremCase {
    Boundary,
    Closed,
    Decay,
}

impl FromStr for TheoremCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "boundary" => Ok(TheoremCase::Boundary),
            "closed" => Ok(TheoremCase::Closed),
            "decay" => Ok(TheoremCase::Decay),
            _ => Err(format!("unknown case `{s}` (expected boundary, closed or decay)")),
        }
    }
}

impl fmt::Display for TheoremCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremCase::Boundary => "boundary",
            TheoremCase::Closed => "closed",
            TheoremCase::Decay => "decay",
        })
    }
}

/// Fully resolved parameters of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    GraphLoops { graph: GraphSource, max_len: usize, alpha: Option<f64> },
    SoupSample { graph: GraphSource, intensity: f64, max_len: usize, samples: usize },
    ZetaDet { surface: ModelSurface, deltas: Vec<f64> },
    LoopMass { surface: ModelSurface, qv_low: f64, qv_high: Option<f64>, kappa: f64 },
    VerifyTheorem { case: TheoremCase, surface: ModelSurface, deltas: Vec<f64>, cap_c: f64, kappa: f64 },
    LatticeTorus { sizes: Vec<usize>, aspect: usize },
    GffSample { size: usize, dump: Option<PathBuf> },
    Subdivide { size: usize, charge: f64, eps_ratio: f64, depth_cap: Option<u32>, svg: Option<PathBuf> },
    ReweightTest { size: usize, charge: f64, delta_charge: f64, samples: usize, epsilon: Option<f64>, target_count: f64 },
    Acceptance { only: Vec<u32> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GraphLoops { .. } => "graph-loops",
            Command::SoupSample { .. } => "soup-sample",
            Command::ZetaDet { .. } => "zeta-det",
            Command::LoopMass { .. } => "loop-mass",
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::LatticeTorus { .. } => "lattice-torus",
            Command::GffSample { .. } => "gff-sample",
            Command::Subdivide { .. } => "subdivide",
            Command::ReweightTest { .. } => "reweight-test",
            Command::Acceptance { .. } => "acceptance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    /// Every resolved parameter as (key, value), in resolution order.
    pub resolved: Vec<(String, String)>,
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), message: message.into() }
}

fn check_grid(key: &str, size: usize) -> Result<(), ConfigError> {
    loopzeta::gff::level_of_size(size).map(|_| ()).map_err(|e| invalid(key, e.to_string()))
}

impl ExperimentConfig {
    /// Checks every numeric parameter against the preconditions of the module it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        match &self.command {
            Command::GraphLoops { max_len, alpha, .. } => {
                if *max_len == 0 {
                    return Err(invalid("max-len", "must be positive"));
                }
                if let Some(a) = alpha {
                    if !(*a > 0.0 && *a < 1.0) {
                        return Err(invalid("alpha", "must lie in (0, 1)"));
                    }
                }
            }
            Command::SoupSample { intensity, max_len, samples, .. } => {
                if !(*intensity > 0.0) {
                    return Err(invalid("intensity", "must be positive"));
                }
                if *max_len == 0 || *samples == 0 {
                    return Err(invalid("samples", "max-len and samples must be positive"));
                }
            }
            Command::ZetaDet { surface, deltas } => {
                surface.validate().map_err(|e| invalid("surface", e.to_string()))?;
                check_deltas(deltas, 1e-5, 0.5)?;
            }
            Command::LoopMass { surface, qv_low, qv_high, kappa } => {
                let q = loopzeta::loop_mass::LoopMassQuery::new(*surface, *qv_low, *qv_high, *kappa);
                q.validate().map_err(|e| invalid("qv-low", e.to_string()))?;
            }
            Command::VerifyTheorem { case, surface, deltas, cap_c, kappa } => {
                surface.validate().map_err(|e| invalid("surface", e.to_string()))?;
                check_deltas(deltas, 1e-6, 0.5)?;
                match case {
                    TheoremCase::Boundary if surface.is_closed() => {
                        return Err(invalid("case", "the boundary case needs a surface with boundary"))
                    }
                    TheoremCase::Closed | TheoremCase::Decay if !surface.is_closed() => {
                        return Err(invalid("case", "the closed and decay cases need a closed surface"))
                    }
                    _ => {}
                }
                if !(*cap_c > 0.0) {
                    return Err(invalid("cap-c", "must be positive"));
                }
                if *case == TheoremCase::Decay && !(*kappa > 0.0) {
                    return Err(invalid("kappa", "the decay case needs κ > 0"));
                }
            }
            Command::LatticeTorus { sizes, aspect } => {
                if sizes.len() < 2 || *aspect == 0 {
                    return Err(invalid("sizes", "need at least two sizes and aspect ≥ 1"));
                }
                if sizes[0] < 4 || sizes.windows(2).any(|w| w[1] != 2 * w[0]) {
                    return Err(invalid("sizes", "sizes must start at 4 or more and double each step"));
                }
                if sizes[sizes.len() - 1] * aspect > 1 << 14 {
                    return Err(invalid("sizes", "largest side would exceed 16384"));
                }
            }
            Command::GffSample { size, .. } => check_grid("size", *size)?,
            Command::Subdivide { size, charge, eps_ratio, depth_cap, .. } => {
                check_grid("size", *size)?;
                if !(*charge < 25.0) {
                    return Err(invalid("charge", "need c < 25"));
                }
                if !(*eps_ratio > 0.0) {
                    return Err(invalid("eps-ratio", "must be positive"));
                }
                let level = loopzeta::gff::level_of_size(*size).unwrap_or(0);
                if depth_cap.is_some_and(|d| d > level) {
                    return Err(invalid("depth-cap", format!("cannot exceed the grid level {level}")));
                }
            }
            Command::ReweightTest { size, charge, delta_charge, samples, epsilon, target_count } => {
                check_grid("size", *size)?;
                if *charge > 1.0 || charge + delta_charge > 1.0 {
                    return Err(invalid("delta-charge", "both c and c + c′ must be at most 1"));
                }
                if *samples < 2 {
                    return Err(invalid("samples", "need at least two samples"));
                }
                if epsilon.is_some_and(|e| !(e > 0.0)) || !(*target_count > 1.0) {
                    return Err(invalid("epsilon", "ε and the target count must be positive"));
                }
            }
            Command::Acceptance { only } => {
                if let Some(bad) = only.iter().find(|&&k| !(1..=18).contains(&k)) {
                    return Err(invalid("only", format!("criterion {bad} does not exist")));
                }
            }
        }
        Ok(())
    }

    /// One line per resolved parameter, for the run log.
    pub fn describe(&self) -> String {
        let mut s = format!("command={} seed={} out={}", self.command.name(), self.seed, self.out_dir.display());
        if let Some(w) = self.workers {
            s.push_str(&format!(" workers={w}"));
        }
        for (k, v) in &self.resolved {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

fn check_deltas(deltas: &[f64], lo: f64, hi: f64) -> Result<(), ConfigError> {
    if deltas.is_empty() || deltas.iter().any(|d| !(lo..=hi).contains(d)) {
        return Err(invalid("delta", format!("every δ must lie in [{lo}, {hi}]")));
    }
    Ok(())
}
