//! Large-K limit of survey propagation for K-SAT.
//!
//! With `alpha = 2^K alpha_hat` the warning entropies concentrate and obey a
//! deterministic recursion `phi = alpha_hat K g(phi)^(K-1)` with
//! `g(s) = (e^s - 1)/(e^s - 1/2)`. The coupled chain replaces `g(phi)` by
//! window averages and pins `phi` to zero on the left and to the stable
//! nontrivial solution on the right.

use nalgebra::{DMatrix, DVector};

use crate::curve::{VdwCurve, VdwPoint};
use crate::cw::bisect_root;
use crate::error::{invalid, Error, Result};
use crate::newton::{self, NewtonOptions};
use crate::scan::{bisect_threshold, continuation, Classification, ThresholdScanResult, Verdict};
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LargeKParams {
    pub k: usize,
    /// `alpha_hat = alpha / 2^K`.
    pub alpha_hat: f64,
    /// `L`: positions run over `-L..=L`.
    pub half_length: usize,
    /// `w`: window width.
    pub width: usize,
}

impl LargeKParams {
    pub fn new(k: usize, alpha_hat: f64, half_length: usize, width: usize) -> Result<Self> {
        check_k(k)?;
        if !(alpha_hat > 0.0 && alpha_hat.is_finite()) {
            return Err(invalid("alpha_hat", "must be positive and finite"));
        }
        if width == 0 {
            return Err(invalid("w", "must be at least 1"));
        }
        Ok(LargeKParams {
            k,
            alpha_hat,
            half_length,
            width,
        })
    }

    pub fn len(&self) -> usize {
        2 * self.half_length + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn with_alpha_hat(self, alpha_hat: f64) -> Self {
        LargeKParams { alpha_hat, ..self }
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("K".into(), self.k.to_string()),
            ("L".into(), self.half_length.to_string()),
            ("w".into(), self.width.to_string()),
        ]
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(invalid("K", "must be at least 3"));
    }
    Ok(())
}

/// `g(s) = (e^s - 1)/(e^s - 1/2)`.
pub fn warning_map(s: f64) -> f64 {
    let e = s.exp_m1();
    e / (e + 0.5)
}

/// `g'(s) = (e^s / 2)/(e^s - 1/2)^2`.
fn warning_map_slope(s: f64) -> f64 {
    let e = s.exp();
    0.5 * e / ((e - 0.5) * (e - 0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarningKind {
    Trivial,
    Unstable,
    Stable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarningFixedPoint {
    pub phi: f64,
    pub kind: WarningKind,
}

/// `alpha_hat` at which `phi > 0` solves the scalar equation,
/// `phi / (K g(phi)^(K-1))`.
fn level(k: usize, phi: f64) -> f64 {
    phi / (k as f64 * warning_map(phi).powi(k as i32 - 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleNode {
    /// `alpha_hat_SP`: the nontrivial solutions appear above it.
    pub alpha_hat: f64,
    /// Warning entropy where they are born.
    pub phi: f64,
}

/// Saddle-node of the scalar recursion: the minimum of
/// `phi / (K g(phi)^(K-1))` over `phi > 0`.
pub fn saddle_node(k: usize) -> Result<SaddleNode> {
    check_k(k)?;
    let km1 = (k - 1) as f64;
    // d/dphi ln(level) = 1/phi - (K-1) g'/g, negative near 0, positive at large phi.
    let dlog = |phi: f64| {
        let e = phi.exp_m1();
        1.0 / phi - km1 * 0.5 * (e + 1.0) / (e * (e + 0.5))
    };
    let phi = bisect_root(&dlog, 1e-9, 200.0);
    Ok(SaddleNode {
        alpha_hat: level(k, phi),
        phi,
    })
}

/// All non-negative solutions of `phi = alpha_hat K g(phi)^(K-1)`, ascending.
pub fn scalar_fixed_points(k: usize, alpha_hat: f64) -> Result<Vec<WarningFixedPoint>> {
    LargeKParams::new(k, alpha_hat, 0, 1)?;
    let mut out = vec![WarningFixedPoint {
        phi: 0.0,
        kind: WarningKind::Trivial,
    }];
    let sn = saddle_node(k)?;
    if alpha_hat < sn.alpha_hat {
        return Ok(out);
    }
    let f = |phi: f64| level(k, phi) - alpha_hat;
    let mut hi = 2.0 * sn.phi.max(1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = sn.phi * 0.5;
    while f(lo) < 0.0 && lo > 1e-300 {
        lo *= 0.5;
    }
    if alpha_hat == sn.alpha_hat {
        out.push(WarningFixedPoint {
            phi: sn.phi,
            kind: WarningKind::Unstable,
        });
        return Ok(out);
    }
    out.push(WarningFixedPoint {
        phi: bisect_root(&f, lo, sn.phi),
        kind: WarningKind::Unstable,
    });
    out.push(WarningFixedPoint {
        phi: bisect_root(&f, sn.phi, hi),
        kind: WarningKind::Stable,
    });
    Ok(out)
}

/// Stable nontrivial scalar solution `phi_+(alpha_hat)`, if it exists.
pub fn nontrivial_phi(k: usize, alpha_hat: f64) -> Result<Option<f64>> {
    Ok(scalar_fixed_points(k, alpha_hat)?
        .iter()
        .find(|p| p.kind == WarningKind::Stable)
        .map(|p| p.phi))
}

/// `d phi_+ / d alpha_hat` on the stable branch.
fn nontrivial_slope(k: usize, alpha_hat: f64, phi: f64) -> f64 {
    let kf = k as f64;
    let g = warning_map(phi);
    let num = kf * g.powi(k as i32 - 1);
    let den = 1.0 - alpha_hat * kf * (kf - 1.0) * g.powi(k as i32 - 2) * warning_map_slope(phi);
    num / den
}

/// Static threshold in scaled units, `ln 2 - (1 + ln 2)/2^(K+1)`.
pub fn largek_static_threshold(k: usize) -> Result<f64> {
    check_k(k)?;
    let ln2 = std::f64::consts::LN_2;
    Ok(ln2 - (1.0 + ln2) / 2f64.powi(k as i32 + 1))
}

/// Scaled warning entropies over `-L..=L` with values pinned outside.
#[derive(Clone, Debug, PartialEq)]
pub struct WarningProfile {
    phi: Vec<f64>,
    boundary_left: f64,
    boundary_right: f64,
}

impl WarningProfile {
    pub fn new(phi: Vec<f64>, boundary_left: f64, boundary_right: f64) -> Result<Self> {
        if phi.len().is_multiple_of(2) {
            return Err(invalid("phi", "length must be 2L+1"));
        }
        if let Some(&v) = phi
            .iter()
            .chain([&boundary_left, &boundary_right])
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Domain {
                what: "warning entropy",
                value: v,
            });
        }
        Ok(WarningProfile {
            phi,
            boundary_left,
            boundary_right,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn half_length(&self) -> usize {
        self.phi.len() / 2
    }

    pub fn boundary_left(&self) -> f64 {
        self.boundary_left
    }

    pub fn boundary_right(&self) -> f64 {
        self.boundary_right
    }

    /// `phi(z)`, reading the pinned values outside the chain.
    pub fn get(&self, z: i64) -> f64 {
        let l = self.half_length() as i64;
        if z < -l {
            self.boundary_left
        } else if z > l {
            self.boundary_right
        } else {
            self.phi[(z + l) as usize]
        }
    }

    /// `phi_bar = (1/(2L+1)) sum_z phi(z)`.
    pub fn average(&self) -> f64 {
        self.phi.iter().sum::<f64>() / self.phi.len() as f64
    }

    /// Largest position with `phi(z)` below half the right boundary value,
    /// or `-L-1` when there is none.
    pub fn front_position(&self) -> i64 {
        let l = self.half_length() as i64;
        let half = 0.5 * self.boundary_right;
        (-l..=l).rev().find(|&z| self.get(z) < half).unwrap_or(-l - 1)
    }

    pub fn to_table(&self, params: &LargeKParams) -> Table {
        let mut t = Table::new(["z", "phi"]);
        t.params = params.metadata();
        t.params.push(("alpha_hat".into(), params.alpha_hat.to_string()));
        t.params.push(("front".into(), self.front_position().to_string()));
        let l = self.half_length() as i64;
        for (i, v) in self.phi.iter().enumerate() {
            t.push_row([(i as i64 - l).to_string(), v.to_string()]);
        }
        t
    }
}

/// Window averages `a(y) = (1/w) sum_{j<w} phi(y-j)` for `y = -L..=L+w-1`.
fn window_means(phi: &[f64], left: f64, right: f64, w: usize) -> Vec<f64> {
    let n = phi.len();
    let l = (n / 2) as i64;
    let at = |x: i64| {
        if x < -l {
            left
        } else if x > l {
            right
        } else {
            phi[(x + l) as usize]
        }
    };
    let count = n + w - 1;
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let y = idx as i64 - l;
        let s: f64 = (0..w as i64).map(|j| at(y - j)).sum();
        out.push(s / w as f64);
    }
    out
}

/// Right-hand side of the coupled recursion at every position.
fn coupled_map(phi: &[f64], left: f64, right: f64, k: usize, alpha_hat: f64, w: usize) -> Vec<f64> {
    let g: Vec<f64> = window_means(phi, left, right, w).into_iter().map(warning_map).collect();
    let kf = k as f64;
    (0..phi.len())
        .map(|z| {
            let m = g[z..z + w].iter().sum::<f64>() / w as f64;
            alpha_hat * kf * m.powi(k as i32 - 1)
        })
        .collect()
}

/// One synchronous sweep of the coupled recursion.
pub fn coupled_update(profile: &WarningProfile, params: &LargeKParams) -> Result<WarningProfile> {
    if profile.phi.len() != params.len() {
        return Err(Error::Contract("profile length does not match 2L+1".into()));
    }
    let next = coupled_map(
        &profile.phi,
        profile.boundary_left,
        profile.boundary_right,
        params.k,
        params.alpha_hat,
        params.width,
    );
    WarningProfile::new(next, profile.boundary_left, profile.boundary_right)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Weight of the new iterate; 1 means no damping.
    pub damping: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            damping: 1.0,
            tol: 1e-12,
            max_sweeps: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WarningSolve {
    pub profile: WarningProfile,
    pub sweeps: usize,
    /// Max change in the final sweep.
    pub residual: f64,
}

/// Iterates the coupled recursion from the nontrivial value everywhere,
/// with `phi = 0` on the left and `phi_+(alpha_hat)` on the right.
pub fn solve_warning_profile(params: &LargeKParams) -> Result<WarningSolve> {
    solve_warning_profile_with(params, SweepOptions::default())
}

pub fn solve_warning_profile_with(params: &LargeKParams, opts: SweepOptions) -> Result<WarningSolve> {
    let right = nontrivial_phi(params.k, params.alpha_hat)?.ok_or_else(|| {
        invalid(
            "alpha_hat",
            format!("{} is below the saddle-node; no nontrivial boundary value", params.alpha_hat),
        )
    })?;
    let init = WarningProfile::new(vec![right; params.len()], 0.0, right)?;
    iterate_profile(params, init, opts)
}

/// Iterates from a given profile until the max change drops below `tol`.
pub fn iterate_profile(params: &LargeKParams, init: WarningProfile, opts: SweepOptions) -> Result<WarningSolve> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", "must lie in (0, 1]"));
    }
    if init.phi.len() != params.len() {
        return Err(Error::Contract("profile length does not match 2L+1".into()));
    }
    let mut phi = init.phi;
    let (left, right) = (init.boundary_left, init.boundary_right);
    let mut change = f64::INFINITY;
    for sweep in 0..opts.max_sweeps {
        let next = coupled_map(&phi, left, right, params.k, params.alpha_hat, params.width);
        change = 0.0;
        for (p, n) in phi.iter_mut().zip(next) {
            let v = (1.0 - opts.damping) * *p + opts.damping * n;
            change = change.max((v - *p).abs());
            *p = v;
        }
        if change < opts.tol {
            return Ok(WarningSolve {
                profile: WarningProfile::new(phi, left, right)?,
                sweeps: sweep + 1,
                residual: change,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_sweeps,
        residual: change,
    })
}

#[derive(Clone, Debug)]
struct CurveState {
    phi: Vec<f64>,
    alpha_hat: f64,
}

fn boundary_at(k: usize, alpha: f64) -> Result<(f64, f64)> {
    let right = nontrivial_phi(k, alpha)?.ok_or(Error::Domain {
        what: "alpha_hat below the saddle-node",
        value: alpha,
    })?;
    Ok((right, nontrivial_slope(k, alpha, right)))
}

/// Residual of the constrained system for unknowns `(phi, alpha_hat)`.
fn curve_residual(k: usize, w: usize, target: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x.len() - 1;
    let alpha = x[n];
    let (right, _) = boundary_at(k, alpha)?;
    let phi = &x.as_slice()[..n];
    let rhs = coupled_map(phi, 0.0, right, k, alpha, w);
    let mut r = DVector::zeros(n + 1);
    for z in 0..n {
        r[z] = phi[z] - rhs[z];
    }
    r[n] = phi.iter().sum::<f64>() / n as f64 - target;
    Ok(r)
}

fn curve_jacobian(k: usize, w: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = x.len() - 1;
    let l = (n / 2) as i64;
    let kf = k as f64;
    let alpha = x[n];
    let (right, d_right) = boundary_at(k, alpha)?;
    let phi = &x.as_slice()[..n];
    let a = window_means(phi, 0.0, right, w);
    let g: Vec<f64> = a.iter().map(|&s| warning_map(s)).collect();
    let gp: Vec<f64> = a.iter().map(|&s| warning_map_slope(s)).collect();
    let mut jac = DMatrix::zeros(n + 1, n + 1);
    let ww = (w * w) as f64;
    for z in 0..n {
        let m = g[z..z + w].iter().sum::<f64>() / w as f64;
        let outer = alpha * kf * (kf - 1.0) * m.powi(k as i32 - 2);
        jac[(z, z)] += 1.0;
        let mut d_alpha = -kf * m.powi(k as i32 - 1);
        for kk in 0..w {
            let y = z + kk;
            let c = outer * gp[y] / ww;
            for j in 0..w {
                let x_pos = y as i64 - l - j as i64;
                if x_pos > l {
                    d_alpha -= c * d_right;
                } else if x_pos >= -l {
                    jac[(z, (x_pos + l) as usize)] -= c;
                }
            }
        }
        jac[(z, n)] = d_alpha;
    }
    for c in 0..n {
        jac[(n, c)] = 1.0 / n as f64;
    }
    Ok(jac)
}

/// Newton solve for `(phi, alpha_hat)` with the mean of `phi` fixed.
fn constrained_newton(k: usize, w: usize, target: f64, state: &mut CurveState, opts: NewtonOptions) -> Result<usize> {
    let n = state.phi.len();
    let valid = |x: &DVector<f64>| x.iter().all(|v| v.is_finite()) && x[n] > 0.0 && x.iter().take(n).all(|&v| v > -0.5);
    let mut x = DVector::from_iterator(n + 1, state.phi.iter().copied().chain([state.alpha_hat]));
    let it = newton::solve(
        &mut x,
        |x| curve_residual(k, w, target, x),
        |x| curve_jacobian(k, w, x),
        valid,
        opts,
    )?;
    state.phi = x.as_slice()[..n].to_vec();
    state.alpha_hat = x[n];
    Ok(it)
}

/// Step placed so the mean matches `target`, relaxed by a few hundred
/// sweeps at the static threshold so the front takes its natural shape.
fn cold_start(k: usize, w: usize, n: usize, target: f64) -> Result<CurveState> {
    let alpha_hat = largek_static_threshold(k)?;
    let right = nontrivial_phi(k, alpha_hat)?.expect("static threshold lies above the saddle-node");
    let filled = (target / right * n as f64).clamp(0.0, n as f64);
    let mut phi: Vec<f64> = (0..n)
        .map(|i| right * ((i + 1) as f64 - (n as f64 - filled)).clamp(0.0, 1.0))
        .collect();
    for _ in 0..COLD_SWEEPS {
        phi = coupled_map(&phi, 0.0, right, k, alpha_hat, w);
    }
    Ok(CurveState { phi, alpha_hat })
}

const COLD_SWEEPS: usize = 300;

/// Van der Waals curve `alpha_hat(phi_bar)` of the coupled chain by
/// continuation in the mean warning entropy.
pub fn largek_vdw_curve(k: usize, half_length: usize, width: usize, phi_bar_grid: &[f64]) -> Result<VdwCurve> {
    let params = LargeKParams::new(k, 1.0, half_length, width)?;
    if phi_bar_grid.is_empty() {
        return Err(invalid("phi_bar_grid", "must not be empty"));
    }
    if let Some(&v) = phi_bar_grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain {
            what: "average warning entropy",
            value: v,
        });
    }
    let n = params.len();
    let opts = NewtonOptions {
        tol: 1e-11,
        max_iter: 60,
    };
    let solve_cold = |target: f64| -> Result<CurveState> {
        let mut s = cold_start(k, width, n, target)?;
        constrained_newton(k, width, target, &mut s, opts)?;
        Ok(s)
    };
    let first = solve_cold(phi_bar_grid[0])?;
    let cont = continuation(
        |target, warm: &CurveState| {
            let mut s = warm.clone();
            match constrained_newton(k, width, target, &mut s, opts) {
                Ok(_) => Ok(s),
                Err(_) => solve_cold(target),
            }
        },
        phi_bar_grid,
        (phi_bar_grid[0], first),
        12,
    )?;
    let mut points = Vec::with_capacity(cont.solutions.len());
    let mut profiles = Vec::with_capacity(cont.solutions.len());
    for (target, s) in cont.solutions {
        points.push(VdwPoint {
            order: target,
            control: s.alpha_hat,
        });
        profiles.push(s.phi);
    }
    Ok(VdwCurve {
        order_name: "phi_bar",
        control_name: "alpha_hat",
        points,
        profiles,
        metadata: params.metadata(),
        failure: cont.failure,
    })
}

/// Classifies `alpha_hat` by whether the nontrivial phase survives the
/// coupled iteration started from `phi_+` everywhere: `Above` when the
/// converged mean exceeds half of `phi_+`. The diagnostic is the front
/// position.
pub fn classify_front(params: &LargeKParams, opts: SweepOptions) -> Result<Verdict> {
    let solve = solve_warning_profile_with(params, opts)?;
    let above = solve.profile.average() > 0.5 * solve.profile.boundary_right();
    Ok(Verdict::new(
        Classification::from_above(above),
        solve.profile.front_position() as f64,
    ))
}

/// Coupled threshold: smallest `alpha_hat` at which the front survives,
/// located by bisection.
pub fn largek_threshold(
    k: usize,
    half_length: usize,
    width: usize,
    bracket: (f64, f64),
    resolution: f64,
) -> Result<ThresholdScanResult> {
    let base = LargeKParams::new(k, bracket.1, half_length, width)?;
    bisect_threshold(
        |alpha| classify_front(&base.with_alpha_hat(alpha), SweepOptions::default()),
        bracket,
        resolution,
        200,
    )
}
