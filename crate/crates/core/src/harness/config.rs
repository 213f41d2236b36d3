//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # ogm rate sweep
//! algorithm = ogm
//! n_list = 10
//! d_list = 1
//! profiles = tanh
//! m_grid = 10, 20, 40, 80, 160
//! trials = 20
//! init_angle = pi/3
//! seed = 7
//! out_dir = out/ogm
//! ```
//!
//! Lists are comma separated, `#` starts a comment. Optional keys:
//! `design` (`full` or `reduced`, default `full`) and `record_timing`
//! (`true`/`false`, default `true`; `false` writes 0 to `wall_ms` so runs are
//! byte-comparable).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracle::BuiltinProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Atpe,
    Ogm,
    Retrieval,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Atpe => "atpe",
            Self::Ogm => "ogm",
            Self::Retrieval => "retrieval",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Self::Atpe => 0,
            Self::Ogm => 1,
            Self::Retrieval => 2,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "atpe" => Ok(Self::Atpe),
            "ogm" => Ok(Self::Ogm),
            "retrieval" => Ok(Self::Retrieval),
            other => Err(format!("unknown algorithm '{other}' (atpe, ogm, retrieval)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignChoice {
    #[default]
    Full,
    Reduced,
}

impl DesignChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Reduced => "reduced",
        }
    }
}

impl fmt::Display for DesignChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "reduced" => Ok(Self::Reduced),
            other => Err(format!("unknown design '{other}' (full, reduced)")),
        }
    }
}

/// Parses an angle in radians, or a multiple of pi such as `pi/3`,
/// `2pi/3` or `0.5*pi`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let bad = || format!("invalid angle '{s}'");
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let coeff = s[..pos].trim().trim_end_matches('*').trim();
    let coeff = if coeff.is_empty() {
        1.0
    } else {
        coeff.parse::<f64>().map_err(|_| bad())?
    };
    let rest = s[pos + 2..].trim();
    let denom = if rest.is_empty() {
        1.0
    } else {
        let d = rest.strip_prefix('/').ok_or_else(bad)?;
        d.trim().parse::<f64>().map_err(|_| bad())?
    };
    if denom == 0.0 {
        return Err(bad());
    }
    Ok(coeff * std::f64::consts::PI / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n_list: Vec<usize>,
    /// `dim L` for atpe, `dim P` for ogm and retrieval.
    pub d_list: Vec<usize>,
    pub profiles: Vec<BuiltinProfile>,
    pub h_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub init_angle: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub design: DesignChoice,
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Atpe,
            n_list: Vec::new(),
            d_list: Vec::new(),
            profiles: Vec::new(),
            h_grid: Vec::new(),
            m_grid: Vec::new(),
            trials: 100,
            init_angle: std::f64::consts::FRAC_PI_3,
            seed: 0,
            out_dir: PathBuf::from("out"),
            design: DesignChoice::Full,
            record_timing: true,
        }
    }
}

fn list<T, F>(value: &str, line: usize, key: &str, mut parse: F) -> Result<Vec<T>>
where
    F: FnMut(&str) -> std::result::Result<T, String>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).map_err(|msg| Error::Config {
                line,
                msg: format!("{key}: {msg}"),
            })
        })
        .collect()
}

fn number<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|_| format!("invalid number '{s}'"))
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen_algorithm = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line,
                    msg: format!("expected 'key = value', got '{content}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let scalar_err = |msg: String| Error::Config {
                line,
                msg: format!("{key}: {msg}"),
            };
            match key {
                "algorithm" => {
                    cfg.algorithm = value.parse().map_err(scalar_err)?;
                    seen_algorithm = true;
                }
                "n_list" => cfg.n_list = list(value, line, key, number)?,
                "d_list" => cfg.d_list = list(value, line, key, number)?,
                "profiles" => {
                    cfg.profiles = list(value, line, key, |s| {
                        s.parse::<BuiltinProfile>().map_err(|e| e.to_string())
                    })?
                }
                "h_grid" => cfg.h_grid = list(value, line, key, number)?,
                "m_grid" => cfg.m_grid = list(value, line, key, number)?,
                "trials" => cfg.trials = number(value).map_err(scalar_err)?,
                "init_angle" => cfg.init_angle = parse_angle(value).map_err(scalar_err)?,
                "seed" => cfg.seed = number(value).map_err(scalar_err)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "design" => cfg.design = value.parse().map_err(scalar_err)?,
                "record_timing" => cfg.record_timing = number(value).map_err(scalar_err)?,
                other => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        if !seen_algorithm {
            return Err(Error::ConfigValue("missing key 'algorithm'".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Values of the swept parameter: `h` for atpe, `M` for ogm, and a
    /// single placeholder for retrieval (whose param column is the number of
    /// measurements).
    pub fn param_grid(&self) -> Vec<f64> {
        match self.algorithm {
            Algorithm::Atpe => self.h_grid.clone(),
            Algorithm::Ogm => self.m_grid.iter().map(|&m| m as f64).collect(),
            Algorithm::Retrieval => vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::ConfigValue(msg));
        if self.n_list.is_empty() || self.d_list.is_empty() {
            return err("n_list and d_list must be non-empty".into());
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        for &n in &self.n_list {
            for &d in &self.d_list {
                if d == 0 || d >= n {
                    return err(format!("d = {d} must satisfy 1 <= d < N = {n}"));
                }
            }
        }
        match self.algorithm {
            Algorithm::Atpe => {
                if self.profiles.is_empty() || self.h_grid.is_empty() {
                    return err("atpe needs profiles and h_grid".into());
                }
                if let Some(h) = self.h_grid.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
                    return err(format!("h_grid value {h} outside (0, 1)"));
                }
            }
            Algorithm::Ogm => {
                if self.profiles.is_empty() || self.m_grid.is_empty() {
                    return err("ogm needs profiles and m_grid".into());
                }
                if let Some(m) = self.m_grid.iter().find(|m| **m < 4) {
                    return err(format!("m_grid value {m} below 4"));
                }
                if !(self.init_angle >= 0.0 && self.init_angle <= std::f64::consts::FRAC_PI_2) {
                    return err(format!("init_angle {} outside [0, pi/2]", self.init_angle));
                }
            }
            Algorithm::Retrieval => {}
        }
        Ok(())
    }
}
