//! Shared configuration for the `polyinsert` binary.
//!
//! Values are layered: command-line flags win over a `key=value` config file,
//! which wins over the built-in defaults.

use std::fmt;

use polyinsert_core::adaptivecrop::{DEFAULT_BETA, DEFAULT_T};
use polyinsert_core::backend::{DEFAULT_RESOLUTION, DEFAULT_STEPS};
use polyinsert_core::datasetforge::DEFAULT_MAX_ANGLE;
use polyinsert_core::maskgen::DEFAULT_DILATION_RADIUS;
use thiserror::Error;

pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8080";

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub beta: f64,
    pub t: f64,
    pub target_resolution: u32,
    pub steps: u32,
    /// Dilation radius at the 768 px reference resolution.
    pub dilation_radius: usize,
    pub max_angle: f64,
    pub endpoint: String,
    pub seed: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            t: DEFAULT_T,
            target_resolution: DEFAULT_RESOLUTION,
            steps: DEFAULT_STEPS,
            dilation_radius: DEFAULT_DILATION_RADIUS,
            max_angle: DEFAULT_MAX_ANGLE,
            endpoint: DEFAULT_ENDPOINT.to_owned(),
            seed: None,
        }
    }
}

/// Flag values as parsed by clap; `None` means "not given".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub t: Option<f64>,
    pub target_resolution: Option<u32>,
    pub steps: Option<u32>,
    pub dilation_radius: Option<usize>,
    pub max_angle: Option<f64>,
    pub endpoint: Option<String>,
    pub seed: Option<u64>,
}

/// Where a rejected value came from, for the error message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Flag,
    File(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag => f.write_str("flag"),
            Origin::File(line) => write!(f, "config line {line}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("{}{key} ({origin}): cannot parse `{value}`", if *.origin == Origin::Flag { "--" } else { "" })]
    BadValue { key: String, value: String, origin: Origin },
    #[error("{}{key} {value} ({origin}): {reason}", if *.origin == Origin::Flag { "--" } else { "" })]
    OutOfRange { key: String, value: String, origin: Origin, reason: &'static str },
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
        origin: Origin::File(line),
    })
}

/// Parses a flat `key=value` file. Blank lines and `#` comments are ignored.
pub fn parse_config_file(text: &str) -> Result<(Overrides, Vec<(String, usize)>), ConfigError> {
    let mut o = Overrides::default();
    let mut lines_of = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "beta" => o.beta = Some(parse_value(key, value, line)?),
            "t" => o.t = Some(parse_value(key, value, line)?),
            "target_resolution" => o.target_resolution = Some(parse_value(key, value, line)?),
            "steps" => o.steps = Some(parse_value(key, value, line)?),
            "dilation_radius" => o.dilation_radius = Some(parse_value(key, value, line)?),
            "max_angle" => o.max_angle = Some(parse_value(key, value, line)?),
            "endpoint" => o.endpoint = Some(value.to_owned()),
            "seed" => o.seed = Some(parse_value(key, value, line)?),
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_owned() }),
        }
        lines_of.push((key.to_owned(), line));
    }
    Ok((o, lines_of))
}

/// Resolves the final configuration: `flags` > `file` > defaults.
pub fn parse_config(flags: &Overrides, file: Option<&str>) -> Result<Config, ConfigError> {
    let (from_file, file_lines) = match file {
        Some(text) => parse_config_file(text)?,
        None => (Overrides::default(), Vec::new()),
    };
    let origin = |key: &str, flag_set: bool| {
        if flag_set {
            Origin::Flag
        } else {
            file_lines.iter().find(|(k, _)| k == key).map(|(_, l)| Origin::File(*l)).unwrap_or(Origin::Flag)
        }
    };
    let d = Config::default();
    let cfg = Config {
        beta: flags.beta.or(from_file.beta).unwrap_or(d.beta),
        t: flags.t.or(from_file.t).unwrap_or(d.t),
        target_resolution: flags.target_resolution.or(from_file.target_resolution).unwrap_or(d.target_resolution),
        steps: flags.steps.or(from_file.steps).unwrap_or(d.steps),
        dilation_radius: flags.dilation_radius.or(from_file.dilation_radius).unwrap_or(d.dilation_radius),
        max_angle: flags.max_angle.or(from_file.max_angle).unwrap_or(d.max_angle),
        endpoint: flags.endpoint.clone().or(from_file.endpoint).unwrap_or(d.endpoint),
        seed: flags.seed.or(from_file.seed),
    };

    let range = |key: &str, value: String, flag_set: bool, reason: &'static str| ConfigError::OutOfRange {
        key: if origin(key, flag_set) == Origin::Flag { flag_name(key) } else { key.to_owned() },
        value,
        origin: origin(key, flag_set),
        reason,
    };
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(range("beta", cfg.beta.to_string(), flags.beta.is_some(), "must lie in (0, 1)"));
    }
    if !(cfg.t > 0.0 && cfg.t < 1.0) {
        return Err(range("t", cfg.t.to_string(), flags.t.is_some(), "must lie in (0, 1)"));
    }
    if cfg.target_resolution == 0 {
        return Err(range("target_resolution", "0".into(), flags.target_resolution.is_some(), "must be positive"));
    }
    if cfg.steps == 0 {
        return Err(range("steps", "0".into(), flags.steps.is_some(), "must be positive"));
    }
    if !(cfg.max_angle >= 0.0 && cfg.max_angle.is_finite()) {
        return Err(range("max_angle", cfg.max_angle.to_string(), flags.max_angle.is_some(), "must be a finite angle >= 0"));
    }
    Ok(cfg)
}
