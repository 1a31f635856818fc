//! Coupled Curie-Weiss chain.
//!
//! `2L+1` Curie-Weiss systems sit at positions `z = -L..=L` and interact with
//! their neighbours within a window of width `w`. The outer `w` positions on
//! each side are pinned to the stable single-system magnetizations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curve::{VdwCurve, VdwPoint};
use crate::cw::{fixed_points_of, free_energy, CwFixedPoints, LocalResponse, Tanh, DEFAULT_TOL};
use crate::error::{invalid, Error, Result};
use crate::newton::{self, NewtonOptions};
use crate::scan::continuation;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    /// `L`: positions run over `-L..=L`.
    pub half_length: usize,
    /// `w`: coupling window and boundary-region width.
    pub width: usize,
    /// `J`.
    pub coupling: f64,
    /// `h`.
    pub field: f64,
}

impl ChainParams {
    pub fn new(half_length: usize, width: usize, coupling: f64, field: f64) -> Result<Self> {
        if half_length == 0 {
            return Err(invalid("L", "must be positive"));
        }
        if width == 0 {
            return Err(invalid("w", "must be at least 1"));
        }
        if 2 * half_length < 2 * width {
            return Err(invalid("w", format!("boundary regions overlap for L={half_length}")));
        }
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(invalid("J", "must be positive and finite"));
        }
        if !field.is_finite() {
            return Err(invalid("h", "must be finite"));
        }
        Ok(ChainParams {
            half_length,
            width,
            coupling,
            field,
        })
    }

    /// Number of positions, `2L+1`.
    pub fn len(&self) -> usize {
        2 * self.half_length + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn with_field(self, field: f64) -> Self {
        ChainParams { field, ..self }
    }

    /// Position `z` of a storage index.
    pub fn position(&self, index: usize) -> i64 {
        index as i64 - self.half_length as i64
    }

    /// Positions whose magnetization is free, `-L+w..=L-w`.
    pub fn interior(&self) -> std::ops::RangeInclusive<i64> {
        let edge = self.half_length as i64 - self.width as i64;
        -edge..=edge
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("L".into(), self.half_length.to_string()),
            ("w".into(), self.width.to_string()),
            ("J".into(), self.coupling.to_string()),
        ]
    }
}

/// Magnetization profile over `-L..=L` with pinned boundary regions.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
    width: usize,
}

impl Profile {
    /// Wraps raw values indexed from `z = -L`. The first and last `width`
    /// entries must each be constant.
    pub fn new(values: Vec<f64>, width: usize) -> Result<Self> {
        let n = values.len();
        if n.is_multiple_of(2) || width == 0 || n <= 2 * width {
            return Err(invalid(
                "profile",
                format!("length {n} is not 2L+1 with 2L+1 > 2w for w={width}"),
            ));
        }
        if let Some(&v) = values.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::Domain {
                what: "magnetization",
                value: v,
            });
        }
        let left = values[0];
        let right = values[n - 1];
        if values[..width].iter().any(|&v| v != left) || values[n - width..].iter().any(|&v| v != right)
        {
            return Err(invalid("profile", "boundary regions must be constant"));
        }
        Ok(Profile { values, width })
    }

    /// Boundary regions set to `left` and `right`, interior from `init(z)`.
    pub fn pinned(params: &ChainParams, left: f64, right: f64, init: impl Fn(i64) -> f64) -> Result<Self> {
        let n = params.len();
        let w = params.width;
        let values = (0..n)
            .map(|i| {
                if i < w {
                    left
                } else if i >= n - w {
                    right
                } else {
                    init(params.position(i))
                }
            })
            .collect();
        Profile::new(values, w)
    }

    pub fn uniform(params: &ChainParams, value: f64) -> Result<Self> {
        Profile::pinned(params, value, value, |_| value)
    }

    /// Antisymmetric-friendly start: `m0 tanh(kappa (z - center))` between
    /// the stable boundary values at the current field.
    pub fn kink(params: &ChainParams, center: f64) -> Result<Self> {
        let (left, right) = boundary_values(params)?;
        let amp = 0.5 * (right - left);
        let mid = 0.5 * (right + left);
        let kappa = kink_slope(&Tanh, params.coupling, params.width);
        Profile::pinned(params, left, right, |z| mid + amp * (kappa * (z as f64 - center)).tanh())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn half_length(&self) -> usize {
        self.values.len() / 2
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boundary_left(&self) -> f64 {
        self.values[0]
    }

    pub fn boundary_right(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Magnetization at `z`; positions beyond the chain read the nearest
    /// boundary value.
    pub fn get(&self, z: i64) -> f64 {
        let idx = (z + self.half_length() as i64).clamp(0, self.values.len() as i64 - 1);
        self.values[idx as usize]
    }

    pub fn max_distance(&self, other: &Profile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn to_table(&self, params: &ChainParams) -> Table {
        let mut t = Table::new(["z", "m"]);
        t.params = params.metadata();
        t.params.push(("h".into(), params.field.to_string()));
        for (i, m) in self.values.iter().enumerate() {
            t.push_row([params.position(i).to_string(), m.to_string()]);
        }
        t
    }

    pub fn from_table(table: &Table, width: usize) -> Result<Self> {
        Profile::new(table.f64_column("m")?, width)
    }
}

/// Stable magnetizations `(m_-(h), m_+(h))` of the single system; equal
/// when the field leaves only one solution.
pub fn boundary_values(params: &ChainParams) -> Result<(f64, f64)> {
    let fp = cw_boundaries(&Tanh, params.coupling, params.field)?;
    Ok((fp.minus(), fp.plus()))
}

fn cw_boundaries<R: LocalResponse + ?Sized>(resp: &R, coupling: f64, field: f64) -> Result<CwFixedPoints> {
    fixed_points_of(resp, coupling, field, DEFAULT_TOL)
}

/// Inverse width of the continuum kink, `sqrt(2 (J F'(0) - 1) / J) / w`.
fn kink_slope<R: LocalResponse + ?Sized>(resp: &R, coupling: f64, width: usize) -> f64 {
    let excess = (coupling * resp.slope(0.0) - 1.0).max(1e-2);
    (2.0 * excess / coupling).sqrt() / width as f64
}

fn check_shape(profile: &Profile, params: &ChainParams) -> Result<()> {
    if profile.len() != params.len() || profile.width != params.width {
        return Err(Error::Contract(format!(
            "profile of length {} and width {} does not match L={} w={}",
            profile.len(),
            profile.width,
            params.half_length,
            params.width
        )));
    }
    Ok(())
}

/// Windowed second difference at storage index `i`. Reads past either end
/// of the chain take the end value.
fn second_difference(m: &[f64], i: usize, w: usize) -> f64 {
    let last = m.len() - 1;
    let sum: f64 = (1..=w)
        .map(|k| m[i.saturating_sub(k)] + m[(i + k).min(last)])
        .sum();
    (sum - 2.0 * w as f64 * m[i]) / w as f64
}

fn effective_field(m: &[f64], i: usize, w: usize, coupling: f64, field: f64) -> f64 {
    coupling * m[i] + 0.25 * coupling * second_difference(m, i, w) + field
}

/// Windowed second difference `(1/w) sum_k (m(z-k) - 2m(z) + m(z+k))` at an
/// interior position.
pub fn finite_diff(profile: &Profile, z: i64) -> Result<f64> {
    let edge = profile.half_length() as i64 - profile.width as i64;
    if z.abs() > edge {
        return Err(Error::Contract(format!(
            "position {z} lies in a boundary region (interior is -{edge}..={edge})"
        )));
    }
    let i = (z + profile.half_length() as i64) as usize;
    Ok(second_difference(&profile.values, i, profile.width))
}

/// Residual of the profile equation written for the field,
/// `-(J/4) D2 m - J m + atanh(m) - h`, at every position. Boundary entries
/// are zero.
pub fn profile_residual(profile: &Profile, params: &ChainParams) -> Result<Vec<f64>> {
    check_shape(profile, params)?;
    let m = &profile.values;
    let (n, w) = (m.len(), params.width);
    Ok((0..n)
        .map(|i| {
            if i < w || i >= n - w {
                0.0
            } else {
                m[i].atanh() - effective_field(m, i, w, params.coupling, params.field)
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Weight of the new iterate in `m <- (1-g) m + g F(u)`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

/// Solves the profile equation by damped fixed-point iteration
/// `m(z) <- tanh(J m(z) + (J/4) D2 m(z) + h)` with [`SolveOptions::default`].
pub fn solve_profile(params: &ChainParams, init: &Profile) -> Result<Profile> {
    solve_profile_with(params, init, SolveOptions::default())
}

pub fn solve_profile_with(params: &ChainParams, init: &Profile, opts: SolveOptions) -> Result<Profile> {
    solve_profile_of(&Tanh, params, init, opts)
}

pub(crate) fn solve_profile_of<R: LocalResponse + ?Sized>(
    resp: &R,
    params: &ChainParams,
    init: &Profile,
    opts: SolveOptions,
) -> Result<Profile> {
    check_shape(init, params)?;
    check_boundaries(resp, params, init)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", "must lie in (0, 1]"));
    }
    let mut m = init.values.clone();
    relax(resp, params, &mut m, opts)?;
    Profile::new(m, params.width)
}

fn check_boundaries<R: LocalResponse + ?Sized>(resp: &R, params: &ChainParams, profile: &Profile) -> Result<()> {
    let (j, h) = (params.coupling, params.field);
    for b in [profile.boundary_left(), profile.boundary_right()] {
        let u = j * b + h;
        if (b - resp.value(u)).abs() > 1e-9 || j * resp.slope(u) >= 1.0 {
            return Err(Error::Contract(format!(
                "boundary value {b} is not a stable single-system solution at J={j}, h={h}"
            )));
        }
    }
    Ok(())
}

/// Damped synchronous iteration in place. Returns the number of sweeps.
fn relax<R: LocalResponse + ?Sized>(
    resp: &R,
    params: &ChainParams,
    m: &mut [f64],
    opts: SolveOptions,
) -> Result<usize> {
    let (n, w) = (m.len(), params.width);
    let mut next = m.to_vec();
    let mut res = f64::INFINITY;
    for it in 0..opts.max_iter {
        res = 0.0;
        for i in w..n - w {
            let target = resp.value(effective_field(m, i, w, params.coupling, params.field));
            res = res.max((target - m[i]).abs());
            next[i] = (1.0 - opts.damping) * m[i] + opts.damping * target;
        }
        if res < opts.tol {
            return Ok(it);
        }
        m.copy_from_slice(&next);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Mean magnetization over all `2L+1` positions, boundary regions included.
pub fn average_magnetization(profile: &Profile) -> f64 {
    profile.values.iter().sum::<f64>() / profile.len() as f64
}

/// Continuum kink
/// `A tanh((L/w) sqrt(2(J-1)/J) (z/L + m_bar/A))` with `A = sqrt(3(J-1))`.
pub fn kink_approximation(z: f64, params: &ChainParams, m_bar: f64) -> Result<f64> {
    let j = params.coupling;
    if j <= 1.0 {
        return Err(Error::Domain {
            what: "coupling (kink needs J > 1)",
            value: j,
        });
    }
    let amp = (3.0 * (j - 1.0)).sqrt();
    let l = params.half_length as f64;
    let slope = (2.0 * (j - 1.0) / j).sqrt();
    Ok(amp * (l / params.width as f64 * slope * (z / l + m_bar / amp)).tanh())
}

/// Mechanical energy `(J/8) v(z)^2 + Phi_h(m(z))` with `Phi_h(m) = -Phi(m) + h m`
/// and centred velocity `v(z) = (m(z+1) - m(z-1)) / 2`, one-sided at the ends.
pub fn mechanical_energy(profile: &Profile, params: &ChainParams) -> Result<Vec<f64>> {
    check_shape(profile, params)?;
    let m = &profile.values;
    let n = m.len();
    let j = params.coupling;
    (0..n)
        .map(|i| {
            let v = if i == 0 {
                m[1] - m[0]
            } else if i == n - 1 {
                m[n - 1] - m[n - 2]
            } else {
                0.5 * (m[i + 1] - m[i - 1])
            };
            Ok(0.125 * j * v * v + mechanical_potential(m[i], params)?)
        })
        .collect()
}

/// Inverted potential `Phi_h(m) = -Phi(m) + h m` of the mechanical analogy.
pub fn mechanical_potential(m: f64, params: &ChainParams) -> Result<f64> {
    Ok(-free_energy(m, params.coupling)? + params.field * m)
}

/// Positive definiteness of the Hessian of the chain free energy restricted
/// to the interior, `diag(1/F'(u)) - A` with `A_ii = J/2` and
/// `A_ij = J/(4w)` for `1 <= |i-j| <= w`.
pub fn is_stable(profile: &Profile, params: &ChainParams) -> Result<bool> {
    check_shape(profile, params)?;
    Ok(is_stable_of(&Tanh, params, &profile.values))
}

pub(crate) fn is_stable_of<R: LocalResponse + ?Sized>(resp: &R, params: &ChainParams, m: &[f64]) -> bool {
    let (n, w) = (m.len(), params.width);
    let ni = n - 2 * w;
    let j = params.coupling;
    let off = j / (4.0 * w as f64);
    let hess = DMatrix::from_fn(ni, ni, |a, b| {
        if a == b {
            let u = effective_field(m, a + w, w, j, params.field);
            1.0 / resp.slope(u) - 0.5 * j
        } else if a.abs_diff(b) <= w {
            -off
        } else {
            0.0
        }
    });
    hess.cholesky().is_some()
}

/// Chain state carried through continuation: full profile and field.
#[derive(Clone, Debug)]
pub(crate) struct ChainState {
    pub values: Vec<f64>,
    pub field: f64,
}

struct Boundaries {
    left: f64,
    right: f64,
    d_left: f64,
    d_right: f64,
}

fn boundaries_at<R: LocalResponse + ?Sized>(resp: &R, coupling: f64, field: f64) -> Result<Boundaries> {
    let fp = cw_boundaries(resp, coupling, field)?;
    let deriv = |m: f64| {
        let s = resp.slope(coupling * m + field);
        s / (1.0 - coupling * s)
    };
    let (left, right) = (fp.minus(), fp.plus());
    Ok(Boundaries {
        left,
        right,
        d_left: deriv(left),
        d_right: deriv(right),
    })
}

/// Newton solve of `m = F(J m + (J/4) D2 m + h)` on the interior.
///
/// With `target = None` the field and boundaries stay fixed. With
/// `target = Some(m_bar)` the field is an extra unknown, the boundaries follow
/// `m_-(h), m_+(h)`, and the mean magnetization is constrained to `m_bar`.
pub(crate) fn newton_chain<R: LocalResponse + ?Sized>(
    resp: &R,
    params: &ChainParams,
    state: &mut ChainState,
    target: Option<f64>,
    opts: NewtonOptions,
) -> Result<usize> {
    let n = params.len();
    let w = params.width;
    let ni = n - 2 * w;
    let j = params.coupling;
    let off = j / (4.0 * w as f64);
    let unknowns = ni + target.is_some() as usize;

    // Profile and boundary data for a vector of unknowns.
    let assemble = |x: &DVector<f64>| -> Result<(Vec<f64>, f64, Option<Boundaries>)> {
        let mut m = state.values.clone();
        m[w..n - w].copy_from_slice(&x.as_slice()[..ni]);
        match target {
            None => Ok((m, state.field, None)),
            Some(_) => {
                let h = x[ni];
                let b = boundaries_at(resp, j, h)?;
                m[..w].fill(b.left);
                m[n - w..].fill(b.right);
                Ok((m, h, Some(b)))
            }
        }
    };
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let (m, h, _) = assemble(x)?;
        let mut r = DVector::zeros(unknowns);
        for a in 0..ni {
            let i = a + w;
            r[a] = m[i] - resp.value(effective_field(&m, i, w, j, h));
        }
        if let Some(m_bar) = target {
            r[ni] = m.iter().sum::<f64>() / n as f64 - m_bar;
        }
        Ok(r)
    };
    let jacobian = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let (m, h, b) = assemble(x)?;
        let mut jac = DMatrix::zeros(unknowns, unknowns);
        for a in 0..ni {
            let i = a + w;
            let s = resp.slope(effective_field(&m, i, w, j, h));
            let lo = a.saturating_sub(w);
            let hi = (a + w).min(ni - 1);
            for c in lo..=hi {
                let coeff = if c == a { 0.5 * j } else { off };
                jac[(a, c)] = -s * coeff;
            }
            jac[(a, a)] += 1.0;
            if let Some(b) = &b {
                // Window reads that land in a boundary region.
                let reads_left = w.saturating_sub(a);
                let reads_right = (a + w + 1).saturating_sub(ni);
                let dh = 1.0 + off * (reads_left as f64 * b.d_left + reads_right as f64 * b.d_right);
                jac[(a, ni)] = -s * dh;
            }
        }
        if let Some(b) = &b {
            for c in 0..ni {
                jac[(ni, c)] = 1.0 / n as f64;
            }
            jac[(ni, ni)] = w as f64 * (b.d_left + b.d_right) / n as f64;
        }
        Ok(jac)
    };
    let valid = |x: &DVector<f64>| x.iter().take(ni).all(|v| v.abs() < 1.0) && x.iter().all(|v| v.is_finite());

    let mut x = DVector::from_iterator(
        unknowns,
        state.values[w..n - w]
            .iter()
            .copied()
            .chain(target.map(|_| state.field)),
    );
    let iterations = newton::solve(&mut x, residual, jacobian, valid, opts)?;
    let (m, h, _) = assemble(&x)?;
    state.values = m;
    state.field = h;
    Ok(iterations)
}

/// Solves the profile equation at fixed field by Newton's method. Converges
/// to saddles as well as minima; combine with [`is_stable`] to tell them
/// apart.
pub fn newton_profile(params: &ChainParams, init: &Profile, opts: NewtonOptions) -> Result<Profile> {
    check_shape(init, params)?;
    check_boundaries(&Tanh, params, init)?;
    let mut state = ChainState {
        values: init.values.clone(),
        field: params.field,
    };
    newton_chain(&Tanh, params, &mut state, None, opts)?;
    Profile::new(state.values, params.width)
}

/// Initial guesses for a constrained solve at mean `m_bar`: a shifted kink
/// when the single system is bistable at zero field, then a uniform profile
/// on the single-solution branch.
fn cold_starts<R: LocalResponse + ?Sized>(resp: &R, params: &ChainParams, m_bar: f64) -> Result<Vec<ChainState>> {
    let n = params.len();
    let j = params.coupling;
    let mut starts = Vec::new();
    let fp = cw_boundaries(resp, j, 0.0)?;
    let m0 = fp.plus();
    if fp.len() == 3 && m_bar.abs() < m0 {
        let kappa = kink_slope(resp, j, params.width);
        let center = -m_bar * n as f64 / (2.0 * m0);
        let p = ChainParams { field: 0.0, ..*params };
        let values = Profile::pinned(&p, -m0, m0, |z| m0 * (kappa * (z as f64 - center)).tanh())?.values;
        starts.push(ChainState { values, field: 0.0 });
    }
    // Uniform m_bar needs F(J m_bar + h) = m_bar.
    let u = crate::cw::bisect_root(&|u| resp.value(u) - m_bar, -50.0, 50.0);
    let field = u - j * m_bar;
    let b = boundaries_at(resp, j, field)?;
    let p = ChainParams { field, ..*params };
    let values = Profile::pinned(&p, b.left, b.right, |_| m_bar)?.values;
    starts.push(ChainState { values, field });
    Ok(starts)
}

fn constrained_solve<R: LocalResponse + ?Sized>(
    resp: &R,
    params: &ChainParams,
    m_bar: f64,
    warm: Option<&ChainState>,
    opts: NewtonOptions,
) -> Result<ChainState> {
    let mut last_err = None;
    if let Some(w) = warm {
        let mut s = w.clone();
        match newton_chain(resp, params, &mut s, Some(m_bar), opts) {
            Ok(_) => return Ok(s),
            Err(e) => last_err = Some(e),
        }
        // A warm start is only abandoned for a cold one at the first point.
        return Err(last_err.expect("set above"));
    }
    for mut s in cold_starts(resp, params, m_bar)? {
        match newton_chain(resp, params, &mut s, Some(m_bar), opts) {
            Ok(_) => return Ok(s),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Contract("no starting profile".into())))
}

/// Traces the Van der Waals curve of a chain with a general response by
/// continuation in the mean magnetization.
pub(crate) fn trace_curve_of<R: LocalResponse + ?Sized>(
    resp: &R,
    params: &ChainParams,
    grid: &[f64],
    opts: NewtonOptions,
) -> Result<VdwCurve> {
    if grid.is_empty() {
        return Err(invalid("m_bar_grid", "must not be empty"));
    }
    if let Some(&v) = grid.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(Error::Domain {
            what: "average magnetization",
            value: v,
        });
    }
    let first = constrained_solve(resp, params, grid[0], None, opts)?;
    let cont = continuation(
        |m_bar, state: &ChainState| {
            constrained_solve(resp, params, m_bar, Some(state), opts)
                .or_else(|_| constrained_solve(resp, params, m_bar, None, opts))
        },
        grid,
        (grid[0], first),
        12,
    )?;
    let mut points = Vec::with_capacity(cont.solutions.len());
    let mut profiles = Vec::with_capacity(cont.solutions.len());
    for (m_bar, s) in cont.solutions {
        points.push(VdwPoint {
            order: m_bar,
            control: s.field,
        });
        profiles.push(s.values);
    }
    Ok(VdwCurve {
        order_name: "m_bar",
        control_name: "h",
        points,
        profiles,
        metadata: params.metadata(),
        failure: cont.failure,
    })
}

/// Van der Waals curve `h(m_bar)` of the coupled chain. The field in
/// `params` is ignored; each point solves for it.
pub fn trace_vdw_curve(params: &ChainParams, m_bar_grid: &[f64]) -> Result<VdwCurve> {
    trace_curve_of(&Tanh, params, m_bar_grid, NewtonOptions::default())
}

#[derive(Clone, Debug)]
pub struct KinkEnumeration {
    /// Distinct stable profiles, ordered by mean magnetization.
    pub profiles: Vec<Profile>,
    /// Zero-field stationary profiles examined, stable or not.
    pub candidates: usize,
}

impl KinkEnumeration {
    pub fn count(&self) -> usize {
        self.profiles.len()
    }
}

/// Two converged profiles closer than this in max-norm are the same kink.
pub const KINK_DEDUP_TOL: f64 = 1e-6;

/// Grid points per one-site shift of the kink along the mean magnetization.
const KINK_GRID_DENSITY: usize = 8;

/// Finds the distinct stable zero-field profiles.
///
/// Every zero-field stationary profile is a zero of the constrained field
/// `h(m_bar)`. The curve is traced outward from `m_bar = 0` with one kink
/// centre per site and bond resolved, each sign change is bisected, polished
/// by Newton at `h = 0`, and kept when the Hessian is positive definite.
pub fn enumerate_kinks(params: &ChainParams) -> Result<KinkEnumeration> {
    if params.field != 0.0 {
        return Err(invalid("h", "kink enumeration runs at zero field"));
    }
    let fp = boundary_values(params)?;
    if fp.0 == fp.1 {
        let p = newton_profile(params, &Profile::uniform(params, fp.1)?, NewtonOptions::default())?;
        return Ok(KinkEnumeration {
            profiles: vec![p],
            candidates: 1,
        });
    }
    let m0 = fp.1;
    let n = params.len();
    let shift = 2.0 * m0 / n as f64;
    let steps = (m0 / shift * KINK_GRID_DENSITY as f64).ceil() as usize;
    let opts = NewtonOptions::default();

    let mut brackets = Vec::new();
    for sign in [1.0, -1.0] {
        let grid: Vec<f64> = (0..steps).map(|k| sign * m0 * k as f64 / steps as f64).collect();
        let curve = trace_curve_of(&Tanh, params, &grid, opts)?;
        let states: Vec<ChainState> = curve
            .points
            .iter()
            .zip(curve.profiles)
            .map(|(pt, values)| ChainState {
                values,
                field: pt.control,
            })
            .collect();
        for k in 0..curve.points.len().saturating_sub(1) {
            let (a, b) = (curve.points[k], curve.points[k + 1]);
            if a.control == 0.0 {
                brackets.push(((a.order, states[k].clone()), (a.order, states[k].clone())));
            } else if a.control * b.control < 0.0 {
                brackets.push(((a.order, states[k].clone()), (b.order, states[k + 1].clone())));
            }
        }
    }
    let candidates = brackets.len();
    let (left, right) = (fp.0, fp.1);
    let found: Vec<Profile> = brackets
        .into_par_iter()
        .filter_map(|(a, b)| {
            let mut s = refine_zero_field(params, a, b, opts)?;
            s.values[..params.width].fill(left);
            s.values[n - params.width..].fill(right);
            s.field = 0.0;
            newton_chain(&Tanh, params, &mut s, None, opts).ok()?;
            let p = Profile::new(s.values, params.width).ok()?;
            is_stable(&p, params).ok()?.then_some(p)
        })
        .collect();

    let mut distinct: Vec<Profile> = Vec::new();
    for p in found {
        if distinct.iter().all(|q| q.max_distance(&p) >= KINK_DEDUP_TOL) {
            distinct.push(p);
        }
    }
    distinct.sort_by(|a, b| average_magnetization(a).total_cmp(&average_magnetization(b)));
    Ok(KinkEnumeration {
        profiles: distinct,
        candidates,
    })
}

/// Bisects the constrained field between two means where it changes sign.
fn refine_zero_field(
    params: &ChainParams,
    (mut a, mut sa): (f64, ChainState),
    (mut b, sb): (f64, ChainState),
    opts: NewtonOptions,
) -> Option<ChainState> {
    let mut best = if sb.field.abs() < sa.field.abs() { sb } else { sa.clone() };
    for _ in 0..60 {
        if best.field == 0.0 || (b - a).abs() < 1e-15 {
            break;
        }
        let mid = 0.5 * (a + b);
        let mut s = sa.clone();
        newton_chain(&Tanh, params, &mut s, Some(mid), opts).ok()?;
        if s.field.abs() < best.field.abs() {
            best = s.clone();
        }
        if (s.field < 0.0) == (sa.field < 0.0) {
            a = mid;
            sa = s;
        } else {
            b = mid;
        }
    }
    Some(best)
}
