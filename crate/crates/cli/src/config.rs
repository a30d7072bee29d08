//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are validated
//! against a fixed schema; unknown or repeated keys are errors. A key ending in
//! `_grid` (for example `snr_grid = 3, 5, 10`) turns the run into a sweep over
//! that axis; at most one grid is allowed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

const KEYS: &[&str] = &[
    "command",
    "lattice",
    "lattice_file",
    "sigma0",
    "sigma",
    "snr",
    "shift",
    "trials",
    "seed",
    "stream",
    "out",
    "eps_dprime",
    "mu",
    "volume",
    "delta",
    "eps",
    "n",
    "p",
    "k",
    "scale",
    "samples",
    "count",
    "grid_points",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Flatness,
    Sample,
    Simulate,
    Sandwich,
    Exponent,
    Rate,
    Ensemble,
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "flatness" => Command::Flatness,
            "sample" => Command::Sample,
            "simulate" => Command::Simulate,
            "sandwich" => Command::Sandwich,
            "exponent" => Command::Exponent,
            "rate" => Command::Rate,
            "ensemble" => Command::Ensemble,
            _ => return Err(CliError::config(format!("unknown command `{s}`"))),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Flatness => "flatness",
            Command::Sample => "sample",
            Command::Simulate => "simulate",
            Command::Sandwich => "sandwich",
            Command::Exponent => "exponent",
            Command::Rate => "rate",
            Command::Ensemble => "ensemble",
        };
        f.write_str(s)
    }
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Sigma0,
    Sigma,
    Snr,
    Mu,
    Volume,
}

impl Axis {
    pub fn key(self) -> &'static str {
        match self {
            Axis::Sigma0 => "sigma0",
            Axis::Sigma => "sigma",
            Axis::Snr => "snr",
            Axis::Mu => "mu",
            Axis::Volume => "volume",
        }
    }

    fn from_key(key: &str) -> Option<Axis> {
        Some(match key {
            "sigma0" => Axis::Sigma0,
            "sigma" => Axis::Sigma,
            "snr" => Axis::Snr,
            "mu" => Axis::Mu,
            "volume" => Axis::Volume,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeSource {
    Name(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub lattice: Option<LatticeSource>,
    pub sigma0: Option<f64>,
    pub sigma: Option<f64>,
    pub snr: Option<f64>,
    pub shift: Option<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
    pub stream: u64,
    pub out: Option<PathBuf>,
    pub eps_dprime: Option<f64>,
    pub mu: Option<f64>,
    pub volume: Option<f64>,
    pub delta: f64,
    pub eps: Option<f64>,
    pub n: Option<usize>,
    pub p: Option<u64>,
    pub k: Option<usize>,
    pub scale: f64,
    pub samples: usize,
    pub count: usize,
    pub grid_points: Option<usize>,
    pub sweep: Option<(Axis, Vec<f64>)>,
    /// Raw key/value pairs as read, for the run manifest.
    pub raw: BTreeMap<String, String>,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::config(format!("`{key}` has invalid value `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(key, t))
        .collect()
}

fn positive(key: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => {
            Err(CliError::config(format!("`{key}` must be positive")))
        }
        _ => Ok(v),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| CliError::config(format!("cannot read config file {}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses configuration text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            let known = KEYS.contains(&k.as_str())
                || k.strip_suffix("_grid")
                    .is_some_and(|a| Axis::from_key(a).is_some());
            if !known {
                return Err(CliError::config(format!("unknown key `{k}`")));
            }
            if raw.insert(k.clone(), v).is_some() {
                return Err(CliError::config(format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| raw.get(k).map(String::as_str);
        let f = |k: &str| get(k).map(|v| parse_num::<f64>(k, v)).transpose();

        let command: Command = get("command")
            .ok_or_else(|| CliError::config("missing key `command`"))?
            .parse()?;
        let lattice = match (get("lattice"), get("lattice_file")) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "give either `lattice` or `lattice_file`, not both",
                ))
            }
            (Some(name), None) => Some(LatticeSource::Name(name.to_string())),
            (None, Some(file)) => {
                let p = base.join(file);
                if !p.is_file() {
                    return Err(CliError::config("lattice file not found"));
                }
                Some(LatticeSource::File(p))
            }
            (None, None) => None,
        };

        let grids: Vec<(&String, &String)> =
            raw.iter().filter(|(k, _)| k.ends_with("_grid")).collect();
        if grids.len() > 1 {
            return Err(CliError::config(
                "multiple sweep axes; give exactly one `*_grid` key",
            ));
        }
        let sweep = match grids.first() {
            Some((k, v)) => {
                let axis = Axis::from_key(k.trim_end_matches("_grid")).expect("checked above");
                let values = parse_list(k, v)?;
                if values.is_empty() {
                    return Err(CliError::config(format!("`{k}` is empty")));
                }
                if raw.contains_key(axis.key()) {
                    return Err(CliError::config(format!(
                        "`{k}` conflicts with `{}`",
                        axis.key()
                    )));
                }
                for x in &values {
                    positive(k, Some(*x))?;
                }
                Some((axis, values))
            }
            None => None,
        };

        let cfg = ExperimentConfig {
            command,
            lattice,
            sigma0: positive("sigma0", f("sigma0")?)?,
            sigma: positive("sigma", f("sigma")?)?,
            snr: positive("snr", f("snr")?)?,
            shift: get("shift").map(|v| parse_list("shift", v)).transpose()?,
            trials: get("trials")
                .map(|v| parse_num("trials", v))
                .transpose()?
                .unwrap_or(100_000),
            seed: get("seed")
                .map(|v| parse_num("seed", v))
                .transpose()?
                .unwrap_or(0),
            stream: get("stream")
                .map(|v| parse_num("stream", v))
                .transpose()?
                .unwrap_or(0),
            out: get("out").map(|v| base.join(v)),
            eps_dprime: f("eps_dprime")?,
            mu: positive("mu", f("mu")?)?,
            volume: positive("volume", f("volume")?)?,
            delta: f("delta")?.unwrap_or(lgc_core::construction_a::DEFAULT_DELTA),
            eps: f("eps")?,
            n: get("n").map(|v| parse_num("n", v)).transpose()?,
            p: get("p").map(|v| parse_num("p", v)).transpose()?,
            k: get("k").map(|v| parse_num("k", v)).transpose()?,
            scale: positive("scale", f("scale")?)?.unwrap_or(1.0),
            samples: get("samples")
                .map(|v| parse_num("samples", v))
                .transpose()?
                .unwrap_or(200),
            count: get("count")
                .map(|v| parse_num("count", v))
                .transpose()?
                .unwrap_or(1000),
            grid_points: get("grid_points")
                .map(|v| parse_num("grid_points", v))
                .transpose()?,
            sweep,
            raw,
        };
        if cfg.snr.is_some() && (cfg.sigma0.is_some() || cfg.sigma.is_some()) {
            return Err(CliError::config(
                "`snr` fixes sigma = 1 and sigma0 = sqrt(snr); do not also give them",
            ));
        }
        if cfg.eps_dprime.is_some_and(|e| !(e >= 0.0)) || !(cfg.delta >= 0.0) {
            return Err(CliError::config(
                "`eps_dprime` and `delta` must be nonnegative",
            ));
        }
        if [
            cfg.eps_dprime.is_some(),
            cfg.mu.is_some(),
            cfg.volume.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count()
            > 1
        {
            return Err(CliError::config(
                "give at most one of `eps_dprime`, `mu`, `volume`",
            ));
        }
        Ok(cfg)
    }

    /// `(σ₀, σ)` after applying the SNR convention.
    pub fn sigmas(&self) -> Result<(f64, f64), CliError> {
        if let Some(snr) = self.snr {
            return Ok((snr.sqrt(), 1.0));
        }
        match (self.sigma0, self.sigma) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(CliError::config("need `sigma0` and `sigma`, or `snr`")),
        }
    }

    /// Copy with the sweep axis set to `value`.
    pub fn at(&self, axis: Axis, value: f64) -> Self {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            Axis::Sigma0 => c.sigma0 = Some(value),
            Axis::Sigma => c.sigma = Some(value),
            Axis::Snr => c.snr = Some(value),
            Axis::Mu => c.mu = Some(value),
            Axis::Volume => c.volume = Some(value),
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(s, Path::new("."))
    }

    #[test]
    fn reads_keys_and_comments() {
        let c = parse("# run\ncommand = simulate\nlattice = E8\nsnr = 10\ntrials = 500\n").unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.lattice, Some(LatticeSource::Name("E8".into())));
        assert_eq!(c.trials, 500);
        let (s0, s) = c.sigmas().unwrap();
        assert!((s0 * s0 - 10.0).abs() < 1e-12 && s == 1.0);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(parse("command = rate\ncolour = red\n")
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!(parse("command = rate\nn = 1\nn = 2\n")
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        assert!(parse("command = rate\nfoo_grid = 1\n").is_err());
    }

    #[test]
    fn one_sweep_axis_only() {
        let c = parse("command = exponent\nmu_grid = 1, 1.5, 2\n").unwrap();
        assert_eq!(c.sweep, Some((Axis::Mu, vec![1.0, 1.5, 2.0])));
        let e = parse("command = rate\nsnr_grid = 1\nsigma_grid = 1\n").unwrap_err();
        assert!(e.to_string().contains("multiple sweep axes"));
    }

    #[test]
    fn missing_lattice_file() {
        let e = parse("command = flatness\nlattice_file = /nonexistent/basis.txt\n").unwrap_err();
        assert_eq!(e.to_string(), "config: lattice file not found");
    }

    #[test]
    fn snr_excludes_sigmas() {
        assert!(parse("command = rate\nsnr = 10\nsigma = 1\n").is_err());
        assert!(parse("command = rate\nsigma0 = -1\n").is_err());
    }
}
