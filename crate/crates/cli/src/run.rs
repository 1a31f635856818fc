//! Validated experiment plans and their execution.

use std::path::{Path, PathBuf};
use std::time::Instant;

use scouple_core::chain::{self, ChainParams, Profile, SolveOptions};
use scouple_core::ksat::{
    self, ClassificationRule, InstanceParams, PopulationParams, Seeding, SpMessages, SpRunOptions, ThresholdCriterion,
};
use scouple_core::largek::{self, LargeKParams};
use scouple_core::qcol::{self, QcolEnsembleParams, QcolScanOptions, QcolSpOptions, SpMode, Window};
use scouple_core::rfcw::{self, FieldDistribution};
use scouple_core::{cw, CwParams, Table, VdwCurve};

use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::manifest::Manifest;

/// Turning points smaller than this are ignored when counting wiggles.
pub const WIGGLE_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileInit {
    Kink(f64),
    Plus,
    Minus,
}

/// A configuration checked against the preconditions of its module.
#[derive(Clone, Debug, PartialEq)]
pub enum Job {
    CwVdw { coupling: f64, grid: Vec<f64> },
    ChainProfile { params: ChainParams, init: ProfileInit, opts: SolveOptions },
    ChainVdw { params: ChainParams, grid: Vec<f64> },
    ChainKinks { params: ChainParams },
    RfcwProfile { params: ChainParams, dist: FieldDistribution, init: ProfileInit, opts: SolveOptions },
    RfcwVdw { params: ChainParams, dist: FieldDistribution, grid: Vec<f64> },
    KsatThreshold { base: PopulationParams, bracket: (f64, f64), resolution: f64, criterion: ThresholdCriterion },
    KsatInstance { params: InstanceParams, random_init: bool, opts: SpRunOptions },
    LargekCurve { params: LargeKParams, grid: Vec<f64> },
    LargekThreshold { params: LargeKParams, bracket: (f64, f64), resolution: f64 },
    QcolThreshold { base: QcolEnsembleParams, bracket: (f64, f64), resolution: f64, seed_count: usize, opts: QcolScanOptions },
}

/// Artifacts and headline numbers of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// File name and contents.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub results: Vec<(String, String)>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(scouple_core::Error),
    Io(std::io::Error),
}

impl RunError {
    /// Process exit status: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<scouple_core::Error> for RunError {
    fn from(e: scouple_core::Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Maps a precondition failure reported by the core crate to the field it
/// names.
fn precondition(field: &str) -> impl Fn(scouple_core::Error) -> ConfigError + '_ {
    move |e| match e {
        scouple_core::Error::InvalidParameter { name, reason } => ConfigError::invalid(config_key(name), reason),
        other => ConfigError::invalid(field, other.to_string()),
    }
}

/// Configuration key for a parameter name used by the core crate.
fn config_key(name: &str) -> &str {
    match name {
        "J" => "coupling",
        "K" => "k",
        "L" => "half_length",
        "w" => "width",
        "h" => "field",
        "size" => "population",
        other => other,
    }
}

fn linspace(lo_key: &str, hi_key: &str, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, ConfigError> {
    if !(lo < hi) {
        return Err(ConfigError::invalid(hi_key, format!("{hi_key} must exceed {lo_key}")));
    }
    if points < 2 {
        return Err(ConfigError::invalid("points", "need at least two grid points"));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

fn bracket(cfg: &ExperimentConfig, lo_key: &str, hi_key: &str) -> Result<(f64, f64), ConfigError> {
    let lo: f64 = cfg.get(lo_key)?;
    let hi: f64 = cfg.get(hi_key)?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ConfigError::invalid(hi_key, format!("{hi_key} must exceed {lo_key}")));
    }
    Ok((lo, hi))
}

fn positive(cfg: &ExperimentConfig, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = cfg.get(key)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, "must be positive"))
    }
}

fn chain_params(cfg: &ExperimentConfig, field: f64) -> Result<ChainParams, ConfigError> {
    ChainParams::new(cfg.get("half_length")?, cfg.get("width")?, cfg.get("coupling")?, field).map_err(precondition("coupling"))
}

fn order_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>, ConfigError> {
    let (lo, hi): (f64, f64) = (cfg.get("m_min")?, cfg.get("m_max")?);
    if !(lo > -1.0 && hi < 1.0) {
        return Err(ConfigError::invalid("m_max", "magnetization grid must lie inside (-1, 1)"));
    }
    linspace("m_min", "m_max", lo, hi, cfg.get("points")?)
}

fn profile_init(cfg: &ExperimentConfig) -> Result<ProfileInit, ConfigError> {
    match cfg.raw("init") {
        "kink" => Ok(ProfileInit::Kink(cfg.get("center")?)),
        "plus" => Ok(ProfileInit::Plus),
        "minus" => Ok(ProfileInit::Minus),
        other => Err(ConfigError::invalid("init", format!("`{other}`: expected kink, plus or minus"))),
    }
}

fn solve_options(cfg: &ExperimentConfig) -> Result<SolveOptions, ConfigError> {
    let damping: f64 = cfg.get("damping")?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(ConfigError::invalid("damping", "must lie in (0, 1]"));
    }
    Ok(SolveOptions {
        damping,
        tol: positive(cfg, "tol")?,
        max_iter: cfg.get("max_iter")?,
    })
}

fn distribution(cfg: &ExperimentConfig) -> Result<FieldDistribution, ConfigError> {
    match cfg.raw("distribution") {
        "gaussian" => FieldDistribution::gaussian(cfg.get("sigma")?).map_err(precondition("sigma")),
        "binary" => FieldDistribution::binary(cfg.get("h0")?).map_err(precondition("h0")),
        other => Err(ConfigError::invalid("distribution", format!("`{other}`: expected gaussian or binary"))),
    }
}

fn seeding(cfg: &ExperimentConfig) -> Result<Seeding, ConfigError> {
    let raw = cfg.raw("seeding");
    Seeding::parse(raw).ok_or_else(|| ConfigError::invalid("seeding", format!("`{raw}`: expected one-sided or two-sided")))
}

/// Validates `cfg` without running anything.
pub fn plan(cfg: &ExperimentConfig) -> Result<Job, ConfigError> {
    Ok(match cfg.kind {
        Kind::CwVdw => {
            let coupling: f64 = cfg.get("coupling")?;
            CwParams::new(coupling, 0.0).map_err(precondition("coupling"))?;
            Job::CwVdw {
                coupling,
                grid: order_grid(cfg)?,
            }
        }
        Kind::ChainProfile => Job::ChainProfile {
            params: chain_params(cfg, cfg.get("field")?)?,
            init: profile_init(cfg)?,
            opts: solve_options(cfg)?,
        },
        Kind::ChainVdw => Job::ChainVdw {
            params: chain_params(cfg, 0.0)?,
            grid: order_grid(cfg)?,
        },
        Kind::ChainKinks => Job::ChainKinks {
            params: chain_params(cfg, 0.0)?,
        },
        Kind::RfcwProfile => {
            let params = chain_params(cfg, cfg.get("field")?)?;
            let dist = distribution(cfg)?;
            rfcw::rfcw_fixed_points(params.coupling, params.field, &dist).map_err(precondition("distribution"))?;
            Job::RfcwProfile {
                params,
                dist,
                init: profile_init(cfg)?,
                opts: solve_options(cfg)?,
            }
        }
        Kind::RfcwVdw => {
            let params = chain_params(cfg, 0.0)?;
            let dist = distribution(cfg)?;
            rfcw::rfcw_fixed_points(params.coupling, 0.0, &dist).map_err(precondition("distribution"))?;
            Job::RfcwVdw {
                params,
                dist,
                grid: order_grid(cfg)?,
            }
        }
        Kind::KsatThreshold => {
            let bracket = bracket(cfg, "alpha_min", "alpha_max")?;
            let base = PopulationParams {
                k: cfg.get("k")?,
                alpha: bracket.1,
                half_length: cfg.get("half_length")?,
                width: cfg.get("width")?,
                size: cfg.get("population")?,
                seed: cfg.seed,
            };
            base.validate().map_err(precondition("k"))?;
            let rule_raw = cfg.raw("rule");
            let criterion = ThresholdCriterion {
                phi_min: cfg.get("phi_min")?,
                sweeps: cfg.get("sweeps")?,
                init_eta: cfg.get("init_eta")?,
                seeding: seeding(cfg)?,
                rule: ClassificationRule::parse(rule_raw)
                    .ok_or_else(|| ConfigError::invalid("rule", format!("`{rule_raw}`: expected bulk-mean or front-drift")))?,
                replicates: cfg.get("replicates")?,
            };
            criterion.validate().map_err(precondition("sweeps"))?;
            Job::KsatThreshold {
                base,
                bracket,
                resolution: positive(cfg, "resolution")?,
                criterion,
            }
        }
        Kind::KsatInstance => {
            let params = InstanceParams {
                k: cfg.get("k")?,
                alpha: cfg.get("alpha")?,
                half_length: cfg.get("half_length")?,
                width: cfg.get("width")?,
                n: cfg.get("n")?,
                seed: cfg.seed,
            };
            params.validate().map_err(precondition("k"))?;
            let random_init = match cfg.raw("init") {
                "random" => true,
                "zero" => false,
                other => return Err(ConfigError::invalid("init", format!("`{other}`: expected random or zero"))),
            };
            let damping: f64 = cfg.get("damping")?;
            if !(0.0..1.0).contains(&damping) {
                return Err(ConfigError::invalid("damping", "must lie in [0, 1)"));
            }
            Job::KsatInstance {
                params,
                random_init,
                opts: SpRunOptions {
                    damping,
                    tol: positive(cfg, "tol")?,
                    max_iters: cfg.get("max_iters")?,
                },
            }
        }
        Kind::LargekCurve => {
            let k: usize = cfg.get("k")?;
            let alpha_s = largek::largek_static_threshold(k).map_err(precondition("k"))?;
            let params = LargeKParams::new(k, alpha_s, cfg.get("half_length")?, cfg.get("width")?).map_err(precondition("k"))?;
            let phi_min: f64 = cfg.get("phi_min")?;
            let phi_max = match cfg.raw("phi_max") {
                "auto" => {
                    let top = largek::nontrivial_phi(k, alpha_s)
                        .map_err(precondition("k"))?
                        .ok_or_else(|| ConfigError::invalid("k", "no nontrivial solution at the static threshold"))?;
                    top - 0.01
                }
                _ => cfg.get("phi_max")?,
            };
            if !(phi_min > 0.0) {
                return Err(ConfigError::invalid("phi_min", "must be positive"));
            }
            Job::LargekCurve {
                params,
                grid: linspace("phi_min", "phi_max", phi_min, phi_max, cfg.get("points")?)?,
            }
        }
        Kind::LargekThreshold => {
            let bracket = bracket(cfg, "alpha_min", "alpha_max")?;
            let params = LargeKParams::new(cfg.get("k")?, bracket.1, cfg.get("half_length")?, cfg.get("width")?)
                .map_err(precondition("k"))?;
            largek::largek_static_threshold(params.k).map_err(precondition("k"))?;
            Job::LargekThreshold {
                params,
                bracket,
                resolution: positive(cfg, "resolution")?,
            }
        }
        Kind::QcolThreshold => {
            let bracket = bracket(cfg, "c_min", "c_max")?;
            let window_raw = cfg.raw("window");
            let base = QcolEnsembleParams {
                q: cfg.get("q")?,
                c: bracket.1,
                half_length: cfg.get("half_length")?,
                width: cfg.get("width")?,
                n: cfg.get("n")?,
                seed: cfg.seed,
                window: Window::parse(window_raw)
                    .ok_or_else(|| ConfigError::invalid("window", format!("`{window_raw}`: expected w or 2w")))?,
            };
            base.validate().map_err(precondition("c_max"))?;
            let mode_raw = cfg.raw("mode");
            let damping: f64 = cfg.get("damping")?;
            if !(0.0..1.0).contains(&damping) {
                return Err(ConfigError::invalid("damping", "must lie in [0, 1)"));
            }
            let seed_count: usize = cfg.get("seed_count")?;
            if seed_count == 0 {
                return Err(ConfigError::invalid("seed_count", "must be at least 1"));
            }
            Job::QcolThreshold {
                base,
                bracket,
                resolution: positive(cfg, "resolution")?,
                seed_count,
                opts: QcolScanOptions {
                    mode: SpMode::parse(mode_raw)
                        .ok_or_else(|| ConfigError::invalid("mode", format!("`{mode_raw}`: expected symmetric or vector")))?,
                    seeding: seeding(cfg)?,
                    sp: QcolSpOptions {
                        damping,
                        tol: positive(cfg, "tol")?,
                        max_iters: cfg.get("max_iters")?,
                    },
                    warning_min: positive(cfg, "warning_min")?,
                },
            }
        }
    })
}

fn csv(name: &str, table: &Table) -> (String, Vec<u8>) {
    (name.to_string(), table.to_csv_string().into_bytes())
}

fn scan_results(r: &scouple_core::ThresholdScanResult) -> Vec<(String, String)> {
    vec![
        ("estimate".into(), r.estimate.to_string()),
        ("lower".into(), r.lower.to_string()),
        ("upper".into(), r.upper.to_string()),
        ("resolved".into(), r.resolved.to_string()),
        ("evaluations".into(), r.evaluations.len().to_string()),
    ]
}

fn curve_results(curve: &VdwCurve, lo: f64, hi: f64) -> Vec<(String, String)> {
    let stats = curve.wiggles(lo, hi, WIGGLE_FLOOR);
    let window = curve.window(lo, hi);
    let max_abs = window.iter().fold(0.0f64, |m, p| m.max(p.control.abs()));
    let mut out = vec![
        ("points".into(), curve.points.len().to_string()),
        ("max_abs_control".into(), max_abs.to_string()),
        ("wiggle_maxima".into(), stats.maxima.to_string()),
        ("wiggle_minima".into(), stats.minima.to_string()),
        ("wiggle_amplitude".into(), stats.amplitude.to_string()),
    ];
    if let Some(f) = &curve.failure {
        out.push(("failed_at".into(), f.control.to_string()));
        out.push(("last_good".into(), f.last_good.to_string()));
    }
    out
}

fn initial_profile(params: &ChainParams, init: ProfileInit, ends: (f64, f64)) -> scouple_core::Result<Profile> {
    match init {
        ProfileInit::Kink(center) => Profile::kink(params, center),
        ProfileInit::Plus => Profile::uniform(params, ends.1),
        ProfileInit::Minus => Profile::uniform(params, ends.0),
    }
}

fn profile_results(profile: &Profile, stable: bool) -> Vec<(String, String)> {
    vec![
        ("average_magnetization".into(), chain::average_magnetization(profile).to_string()),
        ("stable".into(), stable.to_string()),
    ]
}

/// Runs a validated job on the current thread pool.
pub fn execute(job: &Job) -> scouple_core::Result<RunOutput> {
    let mut artifacts = Vec::new();
    let results = match job {
        Job::CwVdw { coupling, grid } => {
            let h_it = cw::iterative_threshold(*coupling);
            let mut t = Table::new(["m", "h"]).param("coupling", coupling);
            if let Some(h) = h_it {
                t = t.param("iterative_threshold", h);
            }
            for &m in grid {
                t.push_row([m, cw::vdw_field(m, *coupling)?]);
            }
            artifacts.push(csv("curve.csv", &t));
            vec![
                ("iterative_threshold".into(), h_it.map_or("none".into(), |h| h.to_string())),
                (
                    "spinodal_magnetization".into(),
                    cw::spinodal_magnetization(*coupling).map_or("none".into(), |m| m.to_string()),
                ),
            ]
        }
        Job::ChainProfile { params, init, opts } => {
            let ends = chain::boundary_values(params)?;
            let profile = chain::solve_profile_with(params, &initial_profile(params, *init, ends)?, *opts)?;
            let stable = chain::is_stable(&profile, params)?;
            artifacts.push(csv("profile.csv", &profile.to_table(params)));
            profile_results(&profile, stable)
        }
        Job::ChainVdw { params, grid } => {
            let curve = chain::trace_vdw_curve(params, grid)?;
            artifacts.push(csv("curve.csv", &curve.to_table()));
            curve_results(&curve, grid[0], grid[grid.len() - 1])
        }
        Job::ChainKinks { params } => {
            let kinks = chain::enumerate_kinks(params)?;
            let mut t = Table::new(["kink", "z", "m"])
                .param("half_length", params.half_length)
                .param("width", params.width)
                .param("coupling", params.coupling);
            for (i, p) in kinks.profiles.iter().enumerate() {
                let l = p.half_length() as i64;
                for z in -l..=l {
                    t.push_row([i.to_string(), z.to_string(), p.get(z).to_string()]);
                }
            }
            artifacts.push(csv("kinks.csv", &t));
            vec![
                ("count".into(), kinks.count().to_string()),
                ("candidates".into(), kinks.candidates.to_string()),
            ]
        }
        Job::RfcwProfile { params, dist, init, opts } => {
            let ends = rfcw::rfcw_boundary_values(params, dist)?;
            let profile = rfcw::solve_rfcw_profile_with(params, dist, &initial_profile(params, *init, ends)?, *opts)?;
            let mut t = profile.to_table(params);
            t.params.extend(dist.describe());
            artifacts.push(csv("profile.csv", &t));
            vec![("average_magnetization".into(), chain::average_magnetization(&profile).to_string())]
        }
        Job::RfcwVdw { params, dist, grid } => {
            let curve = rfcw::rfcw_vdw_curve(params, dist, grid)?;
            artifacts.push(csv("curve.csv", &curve.to_table()));
            curve_results(&curve, grid[0], grid[grid.len() - 1])
        }
        Job::KsatThreshold {
            base,
            bracket,
            resolution,
            criterion,
        } => {
            let r = ksat::detect_threshold(*base, *bracket, *resolution, criterion)?;
            let t = r
                .to_table()
                .param("k", base.k)
                .param("half_length", base.half_length)
                .param("width", base.width)
                .param("population", base.size)
                .param("rule", criterion.rule.as_str())
                .param("seeding", criterion.seeding.as_str());
            artifacts.push(csv("scan.csv", &t));
            scan_results(&r)
        }
        Job::KsatInstance { params, random_init, opts } => {
            let graph = ksat::generate_coupled_instance(*params)?;
            let init = if *random_init {
                SpMessages::random(&graph, params.seed)
            } else {
                SpMessages::constant(&graph, 0.0)?
            };
            let run = ksat::run_sp_on_instance(&graph, init, *opts)?;
            let mut buf = Vec::new();
            graph.write(&mut buf)?;
            artifacts.push(("instance.cnf".into(), buf));
            let mut t = Table::new(["z", "mean_phi"]).param("k", params.k).param("alpha", params.alpha);
            for (z, phi) in run.messages.phi_by_position(&graph) {
                t.push_row([z.to_string(), phi.to_string()]);
            }
            artifacts.push(csv("phi_profile.csv", &t));
            vec![
                ("converged".into(), run.converged.to_string()),
                ("iterations".into(), run.iterations.to_string()),
                ("max_change".into(), run.max_change.to_string()),
                ("mean_phi".into(), run.messages.mean_phi().to_string()),
                ("degenerate".into(), run.degenerate.to_string()),
            ]
        }
        Job::LargekCurve { params, grid } => {
            let curve = largek::largek_vdw_curve(params.k, params.half_length, params.width, grid)?;
            artifacts.push(csv("curve.csv", &curve.to_table()));
            // The wiggle band starts where the front enters the chain, at the
            // first maximum of the curve.
            let controls = curve.controls();
            let first_max = controls.windows(2).position(|p| p[1] < p[0]).unwrap_or(0);
            let (start, end) = (curve.points[first_max].order, curve.points[curve.points.len() - 1].order);
            let mut res = curve_results(&curve, start, end);
            let band = curve.window(start, end);
            let lo = band.iter().fold(f64::INFINITY, |m, p| m.min(p.control));
            let hi = band.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.control));
            res.push(("band_start".into(), start.to_string()));
            res.push(("band_min".into(), lo.to_string()));
            res.push(("band_max".into(), hi.to_string()));
            res.push(("static_threshold".into(), params.alpha_hat.to_string()));
            res
        }
        Job::LargekThreshold {
            params,
            bracket,
            resolution,
        } => {
            let r = largek::largek_threshold(params.k, params.half_length, params.width, *bracket, *resolution)?;
            let t = r
                .to_table()
                .param("k", params.k)
                .param("half_length", params.half_length)
                .param("width", params.width);
            artifacts.push(csv("scan.csv", &t));
            scan_results(&r)
        }
        Job::QcolThreshold {
            base,
            bracket,
            resolution,
            seed_count,
            opts,
        } => {
            let r = qcol::qcol_threshold_scan(*base, *bracket, *resolution, *seed_count, opts)?;
            let t = r
                .to_table()
                .param("q", base.q)
                .param("half_length", base.half_length)
                .param("width", base.width)
                .param("n", base.n)
                .param("window", base.window.as_str());
            artifacts.push(csv("scan.csv", &t));
            scan_results(&r)
        }
    };
    Ok(RunOutput { artifacts, results })
}

/// Summary of a completed run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Validates, runs on `workers` threads and writes artifacts plus
/// `manifest.txt` into `out_dir`. Nothing is written unless the run succeeds.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunSummary, RunError> {
    let job = plan(cfg)?;
    if workers == 0 {
        return Err(ConfigError::invalid("workers", "must be at least 1").into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::invalid("workers", e.to_string()))?;
    let start = Instant::now();
    let output = pool.install(|| execute(&job))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir)?;
    for (name, bytes) in &output.artifacts {
        std::fs::write(out_dir.join(name), bytes)?;
    }
    let manifest = Manifest::new(cfg, &output, workers, wall);
    std::fs::write(out_dir.join(Manifest::FILE), manifest.to_text())?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}
