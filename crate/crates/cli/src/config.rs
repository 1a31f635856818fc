//! Flat `key = value` experiment configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Experiment kinds understood by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    CwVdw,
    ChainProfile,
    ChainVdw,
    ChainKinks,
    RfcwProfile,
    RfcwVdw,
    KsatThreshold,
    KsatInstance,
    LargekCurve,
    LargekThreshold,
    QcolThreshold,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::CwVdw,
        Kind::ChainProfile,
        Kind::ChainVdw,
        Kind::ChainKinks,
        Kind::RfcwProfile,
        Kind::RfcwVdw,
        Kind::KsatThreshold,
        Kind::KsatInstance,
        Kind::LargekCurve,
        Kind::LargekThreshold,
        Kind::QcolThreshold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::CwVdw => "cw-vdw",
            Kind::ChainProfile => "chain-profile",
            Kind::ChainVdw => "chain-vdw",
            Kind::ChainKinks => "chain-kinks",
            Kind::RfcwProfile => "rfcw-profile",
            Kind::RfcwVdw => "rfcw-vdw",
            Kind::KsatThreshold => "ksat-threshold",
            Kind::KsatInstance => "ksat-instance",
            Kind::LargekCurve => "largek-curve",
            Kind::LargekThreshold => "largek-threshold",
            Kind::QcolThreshold => "qcol-threshold",
        }
    }

    /// Keys accepted by this kind with their defaults; `None` marks a
    /// required key.
    pub fn keys(self) -> &'static [(&'static str, Option<&'static str>)] {
        const CHAIN: &[(&str, Option<&str>)] = &[
            ("half_length", None),
            ("width", None),
            ("coupling", None),
        ];
        match self {
            Kind::CwVdw => &[("coupling", None), ("m_min", Some("-0.99")), ("m_max", Some("0.99")), ("points", Some("199"))],
            Kind::ChainProfile => &[
                ("half_length", None),
                ("width", None),
                ("coupling", None),
                ("field", Some("0")),
                ("init", Some("kink")),
                ("center", Some("0")),
                ("damping", Some("0.5")),
                ("tol", Some("1e-10")),
                ("max_iter", Some("1000000")),
            ],
            Kind::ChainVdw => &[
                ("half_length", None),
                ("width", None),
                ("coupling", None),
                ("m_min", Some("-0.5")),
                ("m_max", Some("0.5")),
                ("points", Some("201")),
            ],
            Kind::ChainKinks => CHAIN,
            Kind::RfcwProfile => &[
                ("half_length", None),
                ("width", None),
                ("coupling", None),
                ("field", Some("0")),
                ("distribution", Some("gaussian")),
                ("sigma", Some("0")),
                ("h0", Some("0")),
                ("init", Some("kink")),
                ("center", Some("0")),
                ("damping", Some("0.5")),
                ("tol", Some("1e-10")),
                ("max_iter", Some("1000000")),
            ],
            Kind::RfcwVdw => &[
                ("half_length", None),
                ("width", None),
                ("coupling", None),
                ("distribution", Some("gaussian")),
                ("sigma", Some("0")),
                ("h0", Some("0")),
                ("m_min", Some("-0.5")),
                ("m_max", Some("0.5")),
                ("points", Some("201")),
            ],
            Kind::KsatThreshold => &[
                ("k", None),
                ("half_length", Some("0")),
                ("width", Some("1")),
                ("population", Some("10000")),
                ("alpha_min", None),
                ("alpha_max", None),
                ("resolution", Some("0.02")),
                ("sweeps", Some("2000")),
                ("phi_min", Some("0.001")),
                ("init_eta", Some("0.9")),
                ("seeding", Some("one-sided")),
                ("rule", Some("bulk-mean")),
                ("replicates", Some("1")),
            ],
            Kind::KsatInstance => &[
                ("k", None),
                ("alpha", None),
                ("half_length", Some("0")),
                ("width", Some("1")),
                ("n", None),
                ("init", Some("random")),
                ("damping", Some("0")),
                ("tol", Some("1e-8")),
                ("max_iters", Some("1000")),
            ],
            Kind::LargekCurve => &[
                ("k", None),
                ("half_length", None),
                ("width", None),
                ("phi_min", Some("0.01")),
                ("phi_max", Some("auto")),
                ("points", Some("3000")),
            ],
            Kind::LargekThreshold => &[
                ("k", None),
                ("half_length", None),
                ("width", None),
                ("alpha_min", None),
                ("alpha_max", None),
                ("resolution", Some("0.0001")),
            ],
            Kind::QcolThreshold => &[
                ("q", Some("3")),
                ("half_length", Some("0")),
                ("width", Some("0")),
                ("n", None),
                ("c_min", None),
                ("c_max", None),
                ("resolution", Some("0.05")),
                ("seed_count", Some("3")),
                ("mode", Some("symmetric")),
                ("seeding", Some("one-sided")),
                ("window", Some("w")),
                ("warning_min", Some("0.001")),
                ("damping", Some("0")),
                ("tol", Some("1e-8")),
                ("max_iters", Some("1000")),
            ],
        }
    }

    /// Whether the kind consumes random numbers.
    pub fn is_randomized(self) -> bool {
        matches!(self, Kind::KsatThreshold | Kind::KsatInstance | Kind::QcolThreshold)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConfigError::invalid("kind", format!("unknown experiment kind `{s}`")))
    }
}

/// Keys valid for every kind.
pub const COMMON_KEYS: [&str; 3] = ["kind", "seed", "out"];

/// Prefixes of manifest-only keys, skipped when a manifest is read back as
/// a configuration.
pub const MANIFEST_PREFIXES: [&str; 2] = ["result.", "run."];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, message: String },
    Missing(String),
    Unknown(String),
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read configuration: {m}"),
            ConfigError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Missing(k) => write!(f, "missing required field `{k}`"),
            ConfigError::Unknown(k) => write!(f, "unknown field `{k}`"),
            ConfigError::Invalid { field, reason } => write!(f, "invalid field `{field}`: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; duplicate keys are rejected.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(map)
}

/// A resolved configuration: every key of its kind present, defaults filled
/// in, no unknown keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub out: Option<String>,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = parse_pairs(text)?;
        map.retain(|k, _| !MANIFEST_PREFIXES.iter().any(|p| k.starts_with(p)));
        Self::from_map(map)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let kind: Kind = map.remove("kind").ok_or_else(|| ConfigError::Missing("kind".into()))?.parse()?;
        let seed = match map.remove("seed") {
            Some(s) => s.parse().map_err(|e| ConfigError::invalid("seed", format!("`{s}`: {e}")))?,
            None => 0,
        };
        let out = map.remove("out");
        let keys = kind.keys();
        if let Some(unknown) = map.keys().find(|k| !keys.iter().any(|(name, _)| name == k)) {
            return Err(ConfigError::Unknown(unknown.clone()));
        }
        let mut values = BTreeMap::new();
        for &(name, default) in keys {
            let v = match (map.remove(name), default) {
                (Some(v), _) => v,
                (None, Some(d)) => d.to_string(),
                (None, None) => return Err(ConfigError::Missing(name.into())),
            };
            values.insert(name.to_string(), v);
        }
        Ok(ExperimentConfig { kind, seed, out, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("`{key}` is not a key of {}", self.kind))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| ConfigError::invalid(key, format!("`{raw}`: {e}")))
    }

    /// Resolved key/value pairs, `kind` and `seed` first, in manifest order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("kind".to_string(), self.kind.to_string()), ("seed".to_string(), self.seed.to_string())];
        if let Some(o) = &self.out {
            out.push(("out".into(), o.clone()));
        }
        out.extend(self.values.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    /// Serializes to the configuration format.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
