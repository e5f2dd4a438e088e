//! Run configuration: a line-oriented `key = value` file overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pointmass::pde::Scheme;
use pointmass::{BoundaryCase, Precision};

/// Every setting a subcommand may read.  `None` means "use the subcommand default".
#[derive(Debug, Clone, Default, PartialEq)]
#[allow(non_snake_case)]
pub struct RunConfig {
    pub case: Option<BoundaryCase>,
    pub T: Option<f64>,
    pub N: Option<usize>,
    pub mesh_n: Option<usize>,
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rest: Option<f64>,
    pub modes: Option<Vec<(usize, f64)>>,
    pub state: Option<PathBuf>,
    pub n_max: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub t_star: Option<f64>,
    pub extrapolate: Option<bool>,
}

/// `"1:1.0, 2:0.5"` → `[(1, 1.0), (2, 0.5)]`; an empty string is an empty list.
pub fn parse_modes(s: &str) -> Result<Vec<(usize, f64)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (n, c) = t.split_once(':').ok_or_else(|| format!("mode '{t}' is not of the form n:coeff"))?;
            let n: usize = n.trim().parse().map_err(|e| format!("mode index '{n}': {e}"))?;
            if n == 0 {
                return Err("mode indices start at 1".to_string());
            }
            let c: f64 = c.trim().parse().map_err(|e| format!("mode coefficient '{c}': {e}"))?;
            Ok((n, c))
        })
        .collect()
}

/// `"0.2, 0.1"` → `[0.2, 0.1]`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

impl RunConfig {
    /// Parse the text of a config file.  Blank lines and `#` comments are
    /// ignored; unknown keys and malformed values are errors naming the key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`, got '{line}'", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).with_context(|| format!("line {}, key '{key}'", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| anyhow!("'{v}': {e}"))
        }
        match key {
            "case" => self.case = Some(value.parse().map_err(|e: String| anyhow!(e))?),
            "T" => self.T = Some(num(value)?),
            "N" => self.N = Some(num(value)?),
            "mesh_n" => self.mesh_n = Some(num(value)?),
            "dt" => self.dt = Some(num(value)?),
            "scheme" => self.scheme = Some(value.parse().map_err(|e: String| anyhow!(e))?),
            "precision" | "precision_mode" => self.precision = Some(value.parse().map_err(|e: String| anyhow!(e))?),
            "seed" => self.seed = Some(num(value)?),
            "out" | "output_dir" => self.out = Some(PathBuf::from(value)),
            "rest" => self.rest = Some(num(value)?),
            "modes" => self.modes = Some(parse_modes(value).map_err(|e| anyhow!(e))?),
            "state" => self.state = Some(PathBuf::from(value)),
            "n_max" => self.n_max = Some(num(value)?),
            "eps" => self.eps = Some(parse_list(value).map_err(|e| anyhow!(e))?),
            "t_star" => self.t_star = Some(num(value)?),
            "extrapolate" => self.extrapolate = Some(parse_bool(value).map_err(|e| anyhow!(e))?),
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Values set in `other` win.
    pub fn overlay(self, other: RunConfig) -> RunConfig {
        RunConfig {
            case: other.case.or(self.case),
            T: other.T.or(self.T),
            N: other.N.or(self.N),
            mesh_n: other.mesh_n.or(self.mesh_n),
            dt: other.dt.or(self.dt),
            scheme: other.scheme.or(self.scheme),
            precision: other.precision.or(self.precision),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            rest: other.rest.or(self.rest),
            modes: other.modes.or(self.modes),
            state: other.state.or(self.state),
            n_max: other.n_max.or(self.n_max),
            eps: other.eps.or(self.eps),
            t_star: other.t_star.or(self.t_star),
            extrapolate: other.extrapolate.or(self.extrapolate),
        }
    }

    pub fn case(&self) -> BoundaryCase {
        self.case.unwrap_or(BoundaryCase::Dirichlet)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Sanity checks shared by the subcommands.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.T {
            if !(t.is_finite() && t > 0.0) {
                bail!("T must be positive, got {t}");
            }
        }
        if self.N == Some(0) {
            bail!("N must be at least 1");
        }
        if let Some(r) = self.rest {
            if !(0.0..1.0).contains(&r) {
                bail!("rest must be a fraction of T in [0, 1), got {r}");
            }
        }
        if self.modes.is_some() && self.state.is_some() {
            bail!("give either modes or a state file, not both");
        }
        Ok(())
    }
}
