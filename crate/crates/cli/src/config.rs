//! Run configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use paqs::protocols::{Method, ObservableKind, ProtocolConfig, Representation, Target};
use serde::{Deserialize, Serialize};

/// Raw JSON form, echoed verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub protocol: String,
    pub target: String,
    pub n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<usize>,
    #[serde(default = "default_observable")]
    pub observable: String,
    pub k_mhz: f64,
    #[serde(default = "default_dt")]
    pub dt_us: f64,
    pub t_final_us: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default = "default_representation")]
    pub representation: String,
    pub output_dir: PathBuf,
}

fn default_observable() -> String {
    "symmetric".into()
}

fn default_dt() -> f64 {
    0.001
}

fn default_representation() -> String {
    "auto".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Offending key, when one can be named.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config key `{k}`: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: Some(key.into()), message: message.into() }
}

/// Pull the key name out of serde's "unknown field `x`" / "missing field `x`".
fn key_from_serde(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub protocol: ProtocolConfig,
    pub output_dir: PathBuf,
}

pub fn parse_method(s: &str) -> Result<Method, ConfigError> {
    match s {
        "tea" => Ok(Method::Tea),
        "aslo" | "replay" | "schedule" => Ok(Method::Aslo),
        "baseline" | "baseline-no-feedback" => Ok(Method::Baseline),
        "tangle" => Ok(Method::Tangle),
        other => Err(err("protocol", format!("unknown protocol {other:?} (tea, aslo, baseline, tangle, replay, schedule)"))),
    }
}

fn convert(raw: &RawConfig) -> Result<ProtocolConfig, ConfigError> {
    let method = parse_method(&raw.protocol)?;
    let target = match raw.target.as_str() {
        "w" => {
            if let Some(e) = raw.excitation {
                if e != 1 {
                    return Err(err("excitation", format!("the w target has excitation 1, got {e}")));
                }
            }
            Target::W
        }
        "dicke" => {
            let excitation = raw.excitation.ok_or_else(|| err("excitation", "required for the dicke target"))?;
            if excitation > raw.n_qubits {
                return Err(err("excitation", format!("must lie in [0, {}], got {excitation}", raw.n_qubits)));
            }
            Target::Dicke { excitation }
        }
        "ghz" => {
            if raw.excitation.is_some() {
                return Err(err("excitation", "not used by the ghz target"));
            }
            Target::Ghz
        }
        other => return Err(err("target", format!("unknown target {other:?} (w, dicke, ghz)"))),
    };
    let observable = match raw.observable.as_str() {
        "symmetric" => ObservableKind::Symmetric,
        "onebody-nonsym" => ObservableKind::OneBodyNonSym,
        other => return Err(err("observable", format!("unknown observable {other:?} (symmetric, onebody-nonsym)"))),
    };
    let representation = match raw.representation.as_str() {
        "auto" => Representation::Auto,
        "full" => Representation::Full,
        "symmetric" => Representation::Symmetric,
        other => return Err(err("representation", format!("unknown representation {other:?} (auto, full, symmetric)"))),
    };
    if !(raw.dt_us > 0.0 && raw.dt_us.is_finite()) {
        return Err(err("dt_us", "must be positive"));
    }
    if !(raw.k_mhz > 0.0 && raw.k_mhz.is_finite()) {
        return Err(err("k_mhz", "must be positive"));
    }
    let config = ProtocolConfig {
        target,
        observable,
        method,
        n_qubits: raw.n_qubits,
        k: raw.k_mhz,
        dt: raw.dt_us,
        t_final: raw.t_final_us,
        n_traj: raw.n_traj,
        master_seed: raw.seed,
        representation,
    };
    config.validate().map_err(|e| match e {
        paqs::Error::InvalidParam { key, msg } => err(config_key(key), msg),
        other => ConfigError { key: None, message: other.to_string() },
    })?;
    config.resolved_basis().map_err(|e| err("representation", e.to_string()))?;
    Ok(config)
}

/// Name of the file key behind a library parameter name.
fn config_key(key: &str) -> &str {
    match key {
        "dt" => "dt_us",
        "k" => "k_mhz",
        "t_final" => "t_final_us",
        other => other,
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        ConfigError { key: key_from_serde(&message), message }
    })?;
    let protocol = convert(&raw)?;
    Ok(RunConfig { output_dir: raw.output_dir.clone(), raw, protocol })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { key: None, message: format!("cannot read {}: {e}", path.display()) })?;
    parse_config_str(&text)
}
