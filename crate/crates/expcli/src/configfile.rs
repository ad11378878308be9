//! Flat key-value scenario configuration files.
//!
//! Grammar, line by line:
//! - blank lines and lines starting with `#` are ignored,
//! - everything after an unquoted `#` is a comment,
//! - each remaining line is `section.key = value`,
//! - values are an integer, a float, one of the listed words, or (for node
//!   positions) three whitespace-separated floats.
//!
//! Every key has a default equal to the reference deployment, so an empty
//! file is a complete configuration. Unknown keys are rejected.

use std::path::Path;

use fluidbeam::config::{ConfigError, PathLossModel, ScenarioConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MissingEquals { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(#[from] ConfigError),
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ConfigFileError> {
    v.parse().map_err(|_| ConfigFileError::BadValue {
        line,
        key: key.into(),
        message: format!("expected a non-negative integer, got `{v}`"),
    })
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigFileError> {
    v.parse().map_err(|_| ConfigFileError::BadValue {
        line,
        key: key.into(),
        message: format!("expected a number, got `{v}`"),
    })
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64, ConfigFileError> {
    v.parse().map_err(|_| ConfigFileError::BadValue {
        line,
        key: key.into(),
        message: format!("expected a non-negative integer, got `{v}`"),
    })
}

fn parse_point3(line: usize, key: &str, v: &str) -> Result<[f64; 3], ConfigFileError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(ConfigFileError::BadValue {
            line,
            key: key.into(),
            message: format!("expected three numbers `x y z`, got `{v}`"),
        });
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = parse_f64(line, key, part)?;
    }
    Ok(out)
}

/// Parse configuration text into a validated [`ScenarioConfig`].
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigFileError> {
    let mut cfg = ScenarioConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigFileError::MissingEquals {
                line: line_no,
                text: line.into(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "system.tbs_antennas" => cfg.n_tbs = parse_usize(line_no, key, value)?,
            "system.lbs_antennas" => cfg.n_lbs = parse_usize(line_no, key, value)?,
            "system.aerial_antennas" => cfg.n_aerial = parse_usize(line_no, key, value)?,
            "system.jammer_antennas" => cfg.n_jammer = parse_usize(line_no, key, value)?,
            "system.users" => cfg.users = parse_usize(line_no, key, value)?,
            "geometry.wavelength_m" => cfg.wavelength = parse_f64(line_no, key, value)?,
            "geometry.tx_region_wl" => cfg.side_tx_wl = parse_f64(line_no, key, value)?,
            "geometry.rx_region_wl" => cfg.side_rx_wl = parse_f64(line_no, key, value)?,
            "geometry.spacing_wl" => cfg.spacing_wl = parse_f64(line_no, key, value)?,
            "nodes.tbs" => cfg.tbs_pos = parse_point3(line_no, key, value)?,
            "nodes.lbs" => cfg.lbs_pos = parse_point3(line_no, key, value)?,
            "nodes.aerial" => cfg.aerial_pos = parse_point3(line_no, key, value)?,
            "nodes.jammer" => cfg.jammer_pos = parse_point3(line_no, key, value)?,
            "nodes.user_center" => cfg.user_center = parse_point3(line_no, key, value)?,
            "nodes.user_radius" => cfg.user_radius = parse_f64(line_no, key, value)?,
            "power.lbs_max_dbm" => cfg.lbs_power_dbm = parse_f64(line_no, key, value)?,
            "power.jammer_dbm" => cfg.jammer_power_dbm = parse_f64(line_no, key, value)?,
            "power.noise_dbm" => cfg.noise_dbm = parse_f64(line_no, key, value)?,
            "channel.paths" => cfg.paths = parse_usize(line_no, key, value)?,
            "channel.path_loss" => {
                cfg.path_loss = match value {
                    "shallow" | "literal" => PathLossModel::Shallow,
                    "steep" => PathLossModel::Steep,
                    other => {
                        return Err(ConfigFileError::BadValue {
                            line: line_no,
                            key: key.into(),
                            message: format!(
                                "expected `shallow` or `steep`, got `{other}`"
                            ),
                        })
                    }
                }
            }
            "qos.rate_min" => cfg.rate_min = parse_f64(line_no, key, value)?,
            "uncertainty.delta_deg" => cfg.delta_deg = parse_f64(line_no, key, value)?,
            "uncertainty.grid_theta" => cfg.grid_theta = parse_usize(line_no, key, value)?,
            "uncertainty.grid_phi" => cfg.grid_phi = parse_usize(line_no, key, value)?,
            "trials.count" => cfg.trials = parse_usize(line_no, key, value)?,
            "trials.seed" => cfg.base_seed = parse_u64(line_no, key, value)?,
            other => {
                return Err(ConfigFileError::UnknownKey {
                    line: line_no,
                    key: other.into(),
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
