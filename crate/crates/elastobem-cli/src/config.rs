//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Combination(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Cuboid,
    Fichera,
    Sheet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Collocation,
    Galerkin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FmmMode {
    Dense,
    Standard,
    Lines,
    Regularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Center,
    Diagonal,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $var:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($var),)+
                    _ => Err(format!("expected one of {}", [$($name),+].join("|"))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $var => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(Geometry { "cuboid" => Geometry::Cuboid, "fichera" => Geometry::Fichera, "sheet" => Geometry::Sheet });
keyword_enum!(Method { "collocation" => Method::Collocation, "galerkin" => Method::Galerkin });
keyword_enum!(FmmMode {
    "dense" => FmmMode::Dense,
    "standard" => FmmMode::Standard,
    "lines" => FmmMode::Lines,
    "regularized" => FmmMode::Regularized,
});
keyword_enum!(Split { "center" => Split::Center, "diagonal" => Split::Diagonal });

/// Inclusive level range; empty when `first > last`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Levels {
    pub first: usize,
    pub last: usize,
}

impl Levels {
    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn is_empty(&self) -> bool {
        self.first > self.last
    }
}

impl FromStr for Levels {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        match s.split_once('-') {
            Some((a, b)) => Ok(Levels { first: num(a)?, last: num(b)? }),
            None => {
                let l = num(s)?;
                Ok(Levels { first: l, last: l })
            }
        }
    }
}

impl fmt::Display for Levels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

/// Optional integer written as `auto` when absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Auto(pub Option<usize>);

impl FromStr for Auto {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Auto(None));
        }
        s.parse().map(|v| Auto(Some(v))).map_err(|e| format!("{e}"))
    }
}

impl fmt::Display for Auto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("auto"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Switch(pub bool);

impl FromStr for Switch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "on" | "true" | "yes" | "1" => Ok(Switch(true)),
            "off" | "false" | "no" | "0" => Ok(Switch(false)),
            _ => Err("expected on|off".into()),
        }
    }
}

impl fmt::Display for Switch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 { "on" } else { "off" })
    }
}

/// FMM parameters per refinement level (p, F) for the two convergence
/// geometries.
const CUBOID_LEVELS: [(usize, usize); 6] = [(2, 1), (3, 2), (4, 2), (5, 3), (6, 4), (7, 5)];
const FICHERA_LEVELS: [(usize, usize); 5] = [(2, 1), (3, 2), (4, 2), (5, 3), (6, 4)];

/// Resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub method: Method,
    pub fmm: FmmMode,
    pub line_integrals: bool,
    pub levels: Levels,
    pub lambda: f64,
    pub mu: f64,
    /// Interpolation order override.
    pub p: Option<usize>,
    /// Tree depth override.
    pub f_lvl: Option<usize>,
    pub eta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub output: PathBuf,
    /// Finite-part rules for singular collocation line integrals.
    pub paget: bool,
    pub sheet_length: f64,
    pub sheet_n: usize,
    pub fichera_cells: usize,
    pub fichera_split: Split,
    /// Allow levels beyond the desk-scale caps.
    pub deep: bool,
}

pub const KEYS: [&str; 19] = [
    "geometry",
    "method",
    "fmm",
    "line_integrals",
    "levels",
    "lambda",
    "mu",
    "p",
    "f_lvl",
    "eta",
    "tol",
    "max_iter",
    "output",
    "paget",
    "sheet_length",
    "sheet_n",
    "fichera_cells",
    "fichera_split",
    "deep",
];

/// Raw `key=value` pairs, later entries overriding earlier ones.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, text: line.into() });
            };
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.into()));
        }
        self.entries.insert(key.into(), value.into());
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(ConfigError::Syntax { line: 0, text: pair.into() });
        };
        self.set(k.trim(), v.trim())
    }

    fn get<T: FromStr<Err = String>>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|reason| ConfigError::Value { key: key.into(), value: v.clone(), reason }),
        }
    }

    fn get_num<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Value {
                key: key.into(),
                value: v.clone(),
                reason: e.to_string(),
            }),
        }
    }

    /// Fills defaults and validates the combination.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let geometry = self.get("geometry", Geometry::Cuboid)?;
        let (method, lambda, mu) = match geometry {
            Geometry::Cuboid => (Method::Collocation, 0.2778, 0.4167),
            Geometry::Fichera => (Method::Galerkin, 0.2778, 0.4167),
            Geometry::Sheet => (Method::Collocation, 1.3627e8, 1.3627e8),
        };
        let default_levels = match geometry {
            Geometry::Sheet => Levels { first: 0, last: 0 },
            _ => Levels { first: 0, last: 2 },
        };
        let cfg = RunConfig {
            geometry,
            method: self.get("method", method)?,
            fmm: self.get("fmm", FmmMode::Dense)?,
            line_integrals: self.get("line_integrals", Switch(false))?.0,
            levels: self.get("levels", default_levels)?,
            lambda: self.get_num("lambda", lambda)?,
            mu: self.get_num("mu", mu)?,
            p: self.get("p", Auto(None))?.0,
            f_lvl: self.get("f_lvl", Auto(None))?.0,
            eta: self.get_num("eta", 0.5)?,
            tol: self.get_num("tol", 1e-8)?,
            max_iter: self.get_num("max_iter", 500)?,
            output: self.get_num("output", PathBuf::from("out.csv"))?,
            paget: self.get("paget", Switch(true))?.0,
            sheet_length: self.get_num("sheet_length", 20.0)?,
            sheet_n: self.get_num("sheet_n", 40)?,
            fichera_cells: self.get_num("fichera_cells", 2)?,
            fichera_split: self.get("fichera_split", Split::Diagonal)?,
            deep: self.get("deep", Switch(false))?.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Combination(m));
        if !(self.lambda > -2.0 / 3.0 * self.mu && self.mu > 0.0) {
            return bad(format!("material (lambda={}, mu={}) is not positive definite", self.lambda, self.mu));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if !(self.eta >= 0.0) {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if self.p.is_some_and(|p| p < 2) {
            return bad("p must be at least 2".into());
        }
        if self.f_lvl == Some(0) {
            return bad("f_lvl must be at least 1".into());
        }
        if !(self.sheet_length > 0.0) || self.sheet_n == 0 || self.fichera_cells == 0 {
            return bad("mesh sizes must be positive".into());
        }
        let cap = match self.geometry {
            Geometry::Cuboid => 3,
            Geometry::Fichera => 2,
            Geometry::Sheet => 2,
        };
        if !self.levels.is_empty() && self.levels.last > cap && !self.deep {
            return bad(format!("level {} exceeds the cap {cap} for {}; set deep=on", self.levels.last, self.geometry));
        }
        if self.levels.last > 8 && !self.levels.is_empty() {
            return bad("levels above 8 are not supported".into());
        }
        if !self.paget && self.method == Method::Galerkin {
            return bad("paget=off only affects collocation".into());
        }
        Ok(())
    }

    /// Interpolation order and tree depth at a refinement level.
    pub fn fmm_params(&self, level: usize) -> (usize, usize) {
        let table: &[(usize, usize)] = match self.geometry {
            Geometry::Cuboid => &CUBOID_LEVELS,
            Geometry::Fichera => &FICHERA_LEVELS,
            Geometry::Sheet => &[],
        };
        let (p, f) = table.get(level).copied().unwrap_or((level + 2, level.max(1)));
        (self.p.unwrap_or(p), self.f_lvl.unwrap_or(f))
    }

    /// Every key with its resolved value, in a form `parse` reads back.
    pub fn echo(&self) -> String {
        let vals: [String; 19] = [
            self.geometry.to_string(),
            self.method.to_string(),
            self.fmm.to_string(),
            Switch(self.line_integrals).to_string(),
            self.levels.to_string(),
            float(self.lambda),
            float(self.mu),
            Auto(self.p).to_string(),
            Auto(self.f_lvl).to_string(),
            float(self.eta),
            float(self.tol),
            self.max_iter.to_string(),
            self.output.display().to_string(),
            Switch(self.paget).to_string(),
            float(self.sheet_length),
            self.sheet_n.to_string(),
            self.fichera_cells.to_string(),
            self.fichera_split.to_string(),
            Switch(self.deep).to_string(),
        ];
        KEYS.iter().zip(vals).map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Path of the configuration echo written next to the output.
    pub fn sidecar_path(&self) -> PathBuf {
        let mut s = self.output.clone().into_os_string();
        s.push(".config");
        PathBuf::from(s)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RawConfig::default().resolve().expect("defaults are valid")
    }
}

/// The shorter of the plain and the scientific rendering.
fn float(v: f64) -> String {
    let (plain, sci) = (v.to_string(), format!("{v:e}"));
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut raw = RawConfig::default();
        raw.set_pair("geometry=fichera").unwrap();
        raw.set_pair("p=5").unwrap();
        let cfg = raw.resolve().unwrap();
        let again = RawConfig::parse(&cfg.echo()).unwrap().resolve().unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn geometry_picks_defaults() {
        let cfg = RawConfig::parse("geometry = sheet\n").unwrap().resolve().unwrap();
        assert_eq!(cfg.method, Method::Collocation);
        assert_eq!(cfg.lambda, 1.3627e8);
        let cfg = RawConfig::parse("geometry=fichera").unwrap().resolve().unwrap();
        assert_eq!(cfg.method, Method::Galerkin);
        assert_eq!(cfg.fmm_params(3), (5, 3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawConfig::parse("nonsense").is_err());
        assert!(RawConfig::parse("colour=red").is_err());
        assert!(RawConfig::parse("levels=0-5").unwrap().resolve().is_err());
        assert!(RawConfig::parse("levels=0-5\ndeep=on").unwrap().resolve().is_ok());
        assert!(RawConfig::parse("method=galerkin\npaget=off").unwrap().resolve().is_err());
        assert!(RawConfig::parse("fmm=fast").unwrap().resolve().is_err());
    }

    #[test]
    fn empty_level_range() {
        let l: Levels = "3-2".parse().unwrap();
        assert!(l.is_empty());
        assert_eq!(l.iter().count(), 0);
    }
}
