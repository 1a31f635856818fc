//! Run manifests: the resolved configuration plus results and run metadata.

use std::path::Path;

use crate::config::{parse_pairs, ConfigError, ExperimentConfig};
use crate::run::RunOutput;

/// Manifest of one run. Result keys carry a `result.` prefix and run metadata
/// a `run.` prefix, so the file doubles as a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub results: Vec<(String, String)>,
    pub run: Vec<(String, String)>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.txt";

    pub fn new(config: &ExperimentConfig, output: &RunOutput, workers: usize, wall_time: f64) -> Self {
        let artifacts: Vec<&str> = output.artifacts.iter().map(|(n, _)| n.as_str()).collect();
        let mut results = output.results.clone();
        results.sort();
        Manifest {
            config: config.clone(),
            results,
            run: vec![
                ("artifacts".into(), artifacts.join(",")),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
                ("wall_time_s".into(), format!("{wall_time:.3}")),
                ("workers".into(), workers.to_string()),
            ],
        }
    }

    pub fn result(&self, key: &str) -> Option<&str> {
        self.results.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = self.config.to_text();
        for (k, v) in &self.results {
            s.push_str(&format!("result.{k} = {v}\n"));
        }
        for (k, v) in &self.run {
            s.push_str(&format!("run.{k} = {v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config = ExperimentConfig::parse(text)?;
        let pairs = parse_pairs(text)?;
        let section = |prefix: &str| {
            pairs
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|k| (k.to_string(), v.clone())))
                .collect::<Vec<_>>()
        };
        Ok(Manifest {
            config,
            results: section("result."),
            run: section("run."),
        })
    }

    /// Reads a manifest file, or `manifest.txt` inside a directory.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let file = if path.is_dir() { path.join(Self::FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| ConfigError::Io(format!("{}: {e}", file.display())))?;
        Self::parse(&text)
    }
}
