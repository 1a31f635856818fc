//! The single Curie-Weiss model: free energy, Van der Waals curve, fixed
//! points of `m = tanh(J m + h)` and the iterative / static thresholds.
//!
//! The fixed-point finder is written against [`LocalResponse`] so that the
//! random-field model can reuse it with a quenched-averaged response.

use crate::error::{invalid, Error, Result};

/// Default tolerance for scalar fixed points.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Coupling and external field of a Curie-Weiss system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CwParams {
    pub coupling: f64,
    pub field: f64,
}

impl CwParams {
    pub fn new(coupling: f64, field: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(invalid("coupling", format!("must be positive and finite, got {coupling}")));
        }
        if !field.is_finite() {
            return Err(invalid("field", "must be finite"));
        }
        Ok(CwParams { coupling, field })
    }
}

/// A single-site response `m = F(u)` to an effective field `u`.
///
/// Implementations must be odd, strictly increasing, bounded by one in
/// absolute value, with an even derivative that decreases on `u > 0`.
pub trait LocalResponse: Sync {
    fn value(&self, u: f64) -> f64;
    fn slope(&self, u: f64) -> f64;
}

/// The deterministic response `tanh(u)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Tanh;

impl LocalResponse for Tanh {
    fn value(&self, u: f64) -> f64 {
        u.tanh()
    }

    fn slope(&self, u: f64) -> f64 {
        let t = u.tanh();
        1.0 - t * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointKind {
    StableMinus,
    Unstable,
    StablePlus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub m: f64,
    pub kind: FixedPointKind,
}

/// All solutions of `m = F(J m + h)`, ordered by `m`.
///
/// A unique solution is labeled by its sign (`StablePlus` for `m >= 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct CwFixedPoints {
    pub solutions: Vec<FixedPoint>,
}

impl CwFixedPoints {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Smallest stable solution (`m_-(h)`).
    pub fn minus(&self) -> f64 {
        self.solutions[0].m
    }

    /// Largest stable solution (`m_+(h)`).
    pub fn plus(&self) -> f64 {
        self.solutions[self.solutions.len() - 1].m
    }

    pub fn unstable(&self) -> Option<f64> {
        self.solutions
            .iter()
            .find(|s| s.kind == FixedPointKind::Unstable)
            .map(|s| s.m)
    }
}

/// Binary entropy in nats, `H(m)` for a magnetization `m`.
pub fn binary_entropy(m: f64) -> Result<f64> {
    check_magnetization(m)?;
    let p = 0.5 * (1.0 + m);
    let q = 0.5 * (1.0 - m);
    Ok(-p * p.ln() - q * q.ln())
}

/// Canonical free energy `Phi(m) = -(J/2) m^2 - H(m)`.
pub fn free_energy(m: f64, coupling: f64) -> Result<f64> {
    Ok(-0.5 * coupling * m * m - binary_entropy(m)?)
}

/// Van der Waals field `h = -J m + atanh(m)`.
pub fn vdw_field(m: f64, coupling: f64) -> Result<f64> {
    check_magnetization(m)?;
    Ok(-coupling * m + m.atanh())
}

fn check_magnetization(m: f64) -> Result<()> {
    if m.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "magnetization",
            value: m,
        })
    }
}

/// All fixed points of `m = tanh(J m + h)`.
pub fn cw_fixed_points(params: CwParams, tol: f64) -> Result<CwFixedPoints> {
    fixed_points_of(&Tanh, params.coupling, params.field, tol)
}

/// All fixed points of `m = F(J m + h)` for a general response.
///
/// The residual `f(m) = m - F(J m + h)` has at most two critical points,
/// at `J m + h = ±u*` with `J F'(u*) = 1`. Each monotone piece between them is
/// checked for a sign change and bisected to machine precision.
pub fn fixed_points_of<R: LocalResponse + ?Sized>(
    response: &R,
    coupling: f64,
    field: f64,
    tol: f64,
) -> Result<CwFixedPoints> {
    CwParams::new(coupling, field)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let residual = |m: f64| m - response.value(coupling * m + field);
    let stable = |m: f64| coupling * response.slope(coupling * m + field) < 1.0;
    // f(-1) <= 0 <= f(1) since |F| <= 1.
    let (lo, hi) = (-1.0, 1.0);

    let Some(u_star) = critical_field(response, coupling) else {
        let m = bisect_root(&residual, lo, hi);
        return Ok(single(m));
    };
    let m_a = (-u_star - field) / coupling;
    let m_b = (u_star - field) / coupling;
    // f rises on (-1, m_a), falls on (m_a, m_b), rises on (m_b, 1), with
    // f(-1) < 0 < f(1).
    let f_a = if m_a > lo && m_a < hi { residual(m_a) } else { f64::NAN };
    let f_b = if m_b > lo && m_b < hi { residual(m_b) } else { f64::NAN };
    let left = m_a > lo && (m_a >= hi || f_a > 0.0);
    let right = m_b < hi && (m_b <= lo || f_b < 0.0);

    if left && right && f_a > tol && f_b < -tol {
        let minus = bisect_root(&residual, lo, m_a);
        let middle = bisect_root(&residual, m_a, m_b);
        let plus = bisect_root(&residual, m_b, hi);
        debug_assert!(stable(minus) && stable(plus) && !stable(middle));
        return Ok(CwFixedPoints {
            solutions: vec![
                FixedPoint { m: minus, kind: FixedPointKind::StableMinus },
                FixedPoint { m: middle, kind: FixedPointKind::Unstable },
                FixedPoint { m: plus, kind: FixedPointKind::StablePlus },
            ],
        });
    }
    // One root, or a pair merging within tolerance: keep the outer root
    // whose critical value is farther from tangency.
    let use_left = match (left, right) {
        (true, true) => f_a > -f_b,
        (l, _) => l,
    };
    let m = if use_left {
        bisect_root(&residual, lo, m_a.min(hi))
    } else {
        bisect_root(&residual, m_b.max(lo), hi)
    };
    Ok(single(m))
}

fn single(m: f64) -> CwFixedPoints {
    let kind = if m < 0.0 {
        FixedPointKind::StableMinus
    } else {
        FixedPointKind::StablePlus
    };
    CwFixedPoints {
        solutions: vec![FixedPoint { m, kind }],
    }
}

/// Positive `u*` with `J F'(u*) = 1`, if the response is steep enough.
pub(crate) fn critical_field<R: LocalResponse + ?Sized>(response: &R, coupling: f64) -> Option<f64> {
    if coupling * response.slope(0.0) <= 1.0 {
        return None;
    }
    let mut hi = 1.0;
    while coupling * response.slope(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    Some(bisect_root(&|u| coupling * response.slope(u) - 1.0, 0.0, hi))
}

/// Bisection for a root of a function that changes sign on `[a, b]`,
/// run until the interval cannot be split further.
pub(crate) fn bisect_root(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Spinodal magnetization `sqrt(1 - 1/J)` where the Van der Waals curve turns.
pub fn spinodal_magnetization(coupling: f64) -> Option<f64> {
    (coupling > 1.0).then(|| (1.0 - 1.0 / coupling).sqrt())
}

/// Iterative threshold `h_it`: height of the local extrema of the Van der
/// Waals curve. `None` means there is no metastability (`J <= 1`, or the two
/// spinodal fields coincide to within [`DEFAULT_TOL`]).
pub fn iterative_threshold(coupling: f64) -> Option<f64> {
    let m = spinodal_magnetization(coupling)?;
    let h = (-coupling * m + m.atanh()).abs();
    (2.0 * h >= DEFAULT_TOL).then_some(h)
}

/// Like [`iterative_threshold`] but reports the missing spinodal as an error.
pub fn try_iterative_threshold(coupling: f64) -> Result<f64> {
    iterative_threshold(coupling).ok_or(Error::NoMetastability { coupling })
}

/// Static threshold from the Maxwell construction; the model is symmetric
/// under `(m, h) -> (-m, -h)` so this is exactly zero.
pub fn static_threshold() -> f64 {
    0.0
}

/// Signed equal-area mismatch at field `h`:
/// `int_{m_-}^{m_+} (vdw_field(m) - h) dm = [Phi(m) - h m]_{m_-}^{m_+}`.
pub fn maxwell_mismatch(coupling: f64, field: f64) -> Result<f64> {
    let fp = cw_fixed_points(CwParams::new(coupling, field)?, DEFAULT_TOL)?;
    let (a, b) = (fp.minus(), fp.plus());
    Ok((free_energy(b, coupling)? - field * b) - (free_energy(a, coupling)? - field * a))
}

/// Solves the equal-area condition for the field by bisection inside the
/// metastable window `(-h_it, h_it)`.
pub fn maxwell_field(coupling: f64) -> Result<f64> {
    let h_it = try_iterative_threshold(coupling)?;
    let edge = 0.999 * h_it;
    let area = |h: f64| maxwell_mismatch(coupling, h).unwrap_or(f64::NAN);
    if area(-edge) * area(edge) > 0.0 {
        return Err(Error::Contract("equal-area mismatch does not change sign".into()));
    }
    Ok(bisect_root(&area, -edge, edge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn free_energy_values() {
        assert_abs_diff_eq!(free_energy(0.0, 1.1).unwrap(), -std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(free_energy(0.5, 1.1).unwrap(), free_energy(-0.5, 1.1).unwrap());
        // H(0.5) = -(0.75 ln 0.75 + 0.25 ln 0.25)
        let h = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert_abs_diff_eq!(h, 0.562335, epsilon = 1e-6);
        assert_abs_diff_eq!(free_energy(0.5, 1.1).unwrap(), -0.1375 - h, epsilon = 1e-15);
        assert_abs_diff_eq!(free_energy(0.5, 1.1).unwrap(), -0.699835, epsilon = 1e-6);
        assert!(matches!(free_energy(1.0, 1.1), Err(Error::Domain { .. })));
        assert!(free_energy(-1.2, 1.1).is_err());
    }

    #[test]
    fn vdw_field_values() {
        assert_eq!(vdw_field(0.0, 1.1).unwrap(), 0.0);
        let m = (1.0f64 - 1.0 / 1.1).sqrt();
        assert_abs_diff_eq!(m, 0.301511, epsilon = 1e-6);
        // -1.1 * 0.3015113 + atanh(0.3015113) = -0.3316625 + 0.3111812
        assert_abs_diff_eq!(vdw_field(m, 1.1).unwrap(), -0.0204812, epsilon = 1e-7);
        assert!(vdw_field(1.0, 1.1).is_err());
    }

    #[test]
    fn fixed_points_small_coupling_is_unique() {
        let fp = cw_fixed_points(CwParams::new(0.5, 0.0).unwrap(), 1e-12).unwrap();
        assert_eq!(fp.len(), 1);
        assert_eq!(fp.minus(), 0.0);
    }

    #[test]
    fn fixed_points_three_at_zero_field() {
        let fp = cw_fixed_points(CwParams::new(1.1, 0.0).unwrap(), 1e-12).unwrap();
        assert_eq!(fp.len(), 3);
        // Oracle: plain bisection on m - tanh(1.1 m) over [0.1, 0.99].
        let oracle = bisect_root(&|m: f64| m - (1.1 * m).tanh(), 0.1, 0.99);
        assert_abs_diff_eq!(fp.plus(), oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(fp.plus(), 0.502941, epsilon = 1e-6);
        assert_abs_diff_eq!(fp.minus(), -fp.plus(), epsilon = 1e-14);
        assert_eq!(fp.unstable(), Some(0.0));
        let kinds: Vec<_> = fp.solutions.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [FixedPointKind::StableMinus, FixedPointKind::Unstable, FixedPointKind::StablePlus]
        );
    }

    #[test]
    fn fixed_points_large_field_is_unique() {
        let fp = cw_fixed_points(CwParams::new(1.1, 0.1).unwrap(), 1e-12).unwrap();
        assert_eq!(fp.len(), 1);
        assert!(fp.plus() > 0.0);
        let fp = cw_fixed_points(CwParams::new(1.1, -0.1).unwrap(), 1e-12).unwrap();
        assert_eq!(fp.len(), 1);
        assert!(fp.minus() < 0.0);
    }

    #[test]
    fn iterative_threshold_values() {
        // closed form: m* = sqrt(1 - 1/J), h = |atanh(m*) - J m*|
        assert_abs_diff_eq!(iterative_threshold(1.1).unwrap(), 0.0204812, epsilon = 1e-7);
        let m: f64 = 0.5f64.sqrt();
        assert_abs_diff_eq!(iterative_threshold(2.0).unwrap(), (m.atanh() - 2.0 * m).abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(iterative_threshold(2.0).unwrap(), 0.532840, epsilon = 1e-6);
        assert!(iterative_threshold(1.0).is_none());
        assert!(iterative_threshold(0.7).is_none());
        assert!(iterative_threshold(1.0 + 1e-10).is_none());
        assert!(iterative_threshold(1.0 + 1e-4).unwrap() < 1e-6);
        assert!(matches!(try_iterative_threshold(0.9), Err(Error::NoMetastability { .. })));
    }

    #[test]
    fn static_threshold_is_zero() {
        assert_eq!(static_threshold(), 0.0);
        assert_eq!(maxwell_mismatch(1.1, 0.0).unwrap(), 0.0);
        assert!(maxwell_field(1.1).unwrap().abs() < 1e-10);
        assert!(maxwell_field(1.7).unwrap().abs() < 1e-10);
    }

    #[test]
    fn equal_area_by_quadrature() {
        // Composite Simpson on vdw_field(m) between the stable branches at h = 0.
        let fp = cw_fixed_points(CwParams::new(1.1, 0.0).unwrap(), 1e-12).unwrap();
        let (a, b) = (fp.minus(), fp.plus());
        let n = 20_000;
        let step = (b - a) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let m = a + i as f64 * step;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * vdw_field(m, 1.1).unwrap();
        }
        assert!((sum * step / 3.0).abs() < 1e-10);
    }

    #[test]
    fn count_transition_matches_closed_form() {
        let h_it = iterative_threshold(1.1).unwrap();
        let count = |h: f64| cw_fixed_points(CwParams::new(1.1, h).unwrap(), 1e-12).unwrap().len();
        let (mut lo, mut hi) = (0.0, 0.1);
        while hi - lo > 1e-11 {
            let mid = 0.5 * (lo + hi);
            if count(mid) == 3 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - h_it).abs() < 1e-8, "{lo} vs {h_it}");
    }

    /// Dense scan of vdw_field(m) - h on (-1, 1) followed by bisection.
    fn grid_roots(coupling: f64, field: f64) -> Vec<f64> {
        let g = |m: f64| vdw_field(m, coupling).unwrap() - field;
        let n = 20_000;
        let xs: Vec<f64> = (1..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
        let mut roots = Vec::new();
        for p in xs.windows(2) {
            let (ga, gb) = (g(p[0]), g(p[1]));
            if ga == 0.0 {
                roots.push(p[0]);
            } else if ga * gb < 0.0 {
                roots.push(bisect_root(&g, p[0], p[1]));
            }
        }
        roots
    }

    proptest! {
        #[test]
        fn fixed_points_solve_the_equation(j in 0.2f64..3.0, h in -1.0f64..1.0) {
            let fp = cw_fixed_points(CwParams::new(j, h).unwrap(), 1e-12).unwrap();
            for s in &fp.solutions {
                prop_assert!((s.m - (j * s.m + h).tanh()).abs() < 1e-12);
            }
            prop_assert!(fp.solutions.windows(2).all(|p| p[0].m < p[1].m));
            prop_assert!(fp.len() == 1 || fp.len() == 3);
            if fp.len() == 3 {
                prop_assert_eq!(fp.solutions[1].kind, FixedPointKind::Unstable);
            }
        }

        #[test]
        fn fixed_points_match_grid_scan(j in 0.3f64..2.5, h in -0.6f64..0.6) {
            let fp = cw_fixed_points(CwParams::new(j, h).unwrap(), 1e-12).unwrap();
            let roots = grid_roots(j, h);
            // Skip near-tangent configurations the grid cannot resolve.
            if let Some(h_it) = iterative_threshold(j) {
                prop_assume!((h.abs() - h_it).abs() > 1e-3);
            }
            prop_assert_eq!(roots.len(), fp.len());
            for (r, s) in roots.iter().zip(&fp.solutions) {
                prop_assert!((r - s.m).abs() < 1e-9);
            }
        }

        #[test]
        fn symmetries(m in -0.99f64..0.99, j in 0.1f64..4.0) {
            prop_assert!((free_energy(m, j).unwrap() - free_energy(-m, j).unwrap()).abs() < 1e-14);
            prop_assert!((vdw_field(m, j).unwrap() + vdw_field(-m, j).unwrap()).abs() < 1e-14);
        }

        #[test]
        fn vdw_field_monotone_without_spinodal(j in 0.1f64..1.0, a in -0.99f64..0.99, d in 1e-3f64..0.5) {
            let b = (a + d).min(0.995);
            prop_assume!(b > a);
            prop_assert!(vdw_field(b, j).unwrap() > vdw_field(a, j).unwrap());
        }
    }

    #[test]
    fn vdw_field_critical_points_at_spinodal() {
        for &j in &[1.05, 1.1, 1.5, 3.0] {
            let m = spinodal_magnetization(j).unwrap();
            let d = |x: f64| (vdw_field(x + 1e-6, j).unwrap() - vdw_field(x - 1e-6, j).unwrap()) / 2e-6;
            assert!(d(m).abs() < 1e-6);
            assert!(d(-m).abs() < 1e-6);
            assert!(d(0.5 * m) < 0.0);
            assert!(d(0.5 * (m + 1.0)) > 0.0);
        }
    }
}
