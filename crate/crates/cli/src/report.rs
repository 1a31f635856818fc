//! Tabulation of threshold runs against the static thresholds.

use scouple_core::largek;
use scouple_core::Table;

use crate::config::{ConfigError, Kind};
use crate::manifest::Manifest;

/// Static K-SAT thresholds used as comparison constants.
pub fn ksat_static_threshold(k: usize) -> Option<f64> {
    match k {
        3 => Some(4.266),
        4 => Some(9.931),
        _ => None,
    }
}

fn static_threshold(m: &Manifest) -> Option<f64> {
    let k: usize = m.config.raw("k").parse().ok()?;
    match m.config.kind {
        Kind::KsatThreshold => ksat_static_threshold(k),
        Kind::LargekThreshold => largek::largek_static_threshold(k).ok(),
        _ => None,
    }
}

/// One row per run: model size, geometry, bracket and the distance of the
/// estimate from the static threshold. Every run must be of the same
/// threshold kind.
pub fn compare_report(runs: &[Manifest]) -> Result<Table, ConfigError> {
    let first = runs.first().ok_or_else(|| ConfigError::invalid("runs", "no manifests given"))?;
    let kind = first.config.kind;
    if !matches!(kind, Kind::KsatThreshold | Kind::LargekThreshold | Kind::QcolThreshold) {
        return Err(ConfigError::invalid("kind", format!("{kind} runs do not produce thresholds")));
    }
    if let Some(other) = runs.iter().find(|m| m.config.kind != kind) {
        return Err(ConfigError::invalid(
            "kind",
            format!("cannot compare {kind} with {}", other.config.kind),
        ));
    }
    let model_key = if kind == Kind::QcolThreshold { "q" } else { "k" };
    let mut rows: Vec<(usize, usize, usize, Vec<String>)> = Vec::new();
    for m in runs {
        let estimate = m
            .result("estimate")
            .ok_or_else(|| ConfigError::Missing("result.estimate".into()))?;
        let est: f64 = estimate
            .parse()
            .map_err(|e| ConfigError::invalid("result.estimate", format!("{e}")))?;
        let model: usize = m.config.get(model_key)?;
        let l: usize = m.config.get("half_length")?;
        let w: usize = m.config.get("width")?;
        let stat = static_threshold(m);
        rows.push((
            model,
            w,
            l,
            vec![
                kind.to_string(),
                model.to_string(),
                l.to_string(),
                w.to_string(),
                m.config.seed.to_string(),
                estimate.to_string(),
                m.result("lower").unwrap_or("").to_string(),
                m.result("upper").unwrap_or("").to_string(),
                stat.map_or(String::new(), |s| s.to_string()),
                stat.map_or(String::new(), |s| (s - est).to_string()),
            ],
        ));
    }
    rows.sort_by_key(|a| (a.0, a.1, a.2));
    let mut t = Table::new([
        "kind",
        model_key,
        "half_length",
        "width",
        "seed",
        "estimate",
        "lower",
        "upper",
        "static_threshold",
        "gap",
    ]);
    for (.., row) in rows {
        t.push_row(row);
    }
    Ok(t)
}
