//! Random-field Curie-Weiss chain.
//!
//! Each site sees an extra quenched field `H` drawn from a symmetric density.
//! The chain equations keep their deterministic form with `tanh` replaced by
//! its average over `H`, so profiles track the expected magnetization.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chain::{self, ChainParams, Profile, SolveOptions};
use crate::curve::VdwCurve;
use crate::cw::{bisect_root, fixed_points_of, CwFixedPoints, LocalResponse, DEFAULT_TOL};
use crate::error::{invalid, Error, Result};
use crate::newton::NewtonOptions;

/// Default Gauss-Hermite order for Gaussian fields.
pub const GAUSS_HERMITE_NODES: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum FieldDistribution {
    /// Centred normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// `+h0` or `-h0` with probability one half each.
    Binary { h0: f64 },
    /// Symmetric density sampled on a symmetric grid, integrated by the
    /// trapezoid rule and normalised.
    Tabulated { grid: Vec<f64>, density: Vec<f64> },
}

impl FieldDistribution {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        Ok(FieldDistribution::Gaussian { sigma })
    }

    pub fn binary(h0: f64) -> Result<Self> {
        if !(h0 >= 0.0 && h0.is_finite()) {
            return Err(invalid("h0", "must be finite and non-negative"));
        }
        Ok(FieldDistribution::Binary { h0 })
    }

    pub fn tabulated(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if n < 2 || density.len() != n {
            return Err(invalid("density", "needs at least two grid points and one value per point"));
        }
        if grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid("grid", "must be strictly increasing"));
        }
        if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(invalid("density", "must be finite and non-negative"));
        }
        let scale = grid[n - 1].abs().max(1.0);
        let peak = density.iter().fold(0.0f64, |a, d| a.max(*d));
        for i in 0..n {
            let j = n - 1 - i;
            if (grid[i] + grid[j]).abs() > 1e-12 * scale || (density[i] - density[j]).abs() > 1e-12 * peak {
                return Err(invalid("density", "grid and density must be symmetric about zero"));
            }
        }
        if peak == 0.0 {
            return Err(invalid("density", "must not vanish everywhere"));
        }
        Ok(FieldDistribution::Tabulated { grid, density })
    }

    pub fn variance(&self) -> f64 {
        match self {
            FieldDistribution::Gaussian { sigma } => sigma * sigma,
            FieldDistribution::Binary { h0 } => h0 * h0,
            FieldDistribution::Tabulated { .. } => {
                let q = FieldQuadrature::new(self).expect("validated on construction");
                q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x * x).sum()
            }
        }
    }

    /// Parameters for CSV header comments.
    pub fn describe(&self) -> Vec<(String, String)> {
        match self {
            FieldDistribution::Gaussian { sigma } => vec![
                ("field_dist".into(), "gaussian".into()),
                ("sigma".into(), sigma.to_string()),
            ],
            FieldDistribution::Binary { h0 } => vec![
                ("field_dist".into(), "binary".into()),
                ("h0".into(), h0.to_string()),
            ],
            FieldDistribution::Tabulated { grid, .. } => vec![
                ("field_dist".into(), "tabulated".into()),
                ("grid_points".into(), grid.len().to_string()),
            ],
        }
    }
}

/// Discrete measure `sum_i w_i delta(H - x_i)` standing in for the field
/// density. Acts as the averaged local response `E[tanh(u + H)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FieldQuadrature {
    /// Default rule: 64-node Gauss-Hermite for Gaussians, exact atoms for
    /// the binary law, trapezoid for tabulated densities.
    pub fn new(dist: &FieldDistribution) -> Result<Self> {
        Self::with_order(dist, GAUSS_HERMITE_NODES)
    }

    /// Like [`FieldQuadrature::new`] with `order` Gauss-Hermite nodes.
    pub fn with_order(dist: &FieldDistribution, order: usize) -> Result<Self> {
        match dist {
            FieldDistribution::Gaussian { sigma } if *sigma == 0.0 => Ok(Self::point()),
            FieldDistribution::Gaussian { sigma } => {
                let (x, w) = if order == GAUSS_HERMITE_NODES {
                    static DEFAULT: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
                    DEFAULT.get_or_init(|| gauss_hermite(GAUSS_HERMITE_NODES)).clone()
                } else {
                    if order == 0 {
                        return Err(invalid("order", "must be positive"));
                    }
                    gauss_hermite(order)
                };
                let s = sigma * std::f64::consts::SQRT_2;
                let norm = std::f64::consts::PI.sqrt();
                Ok(FieldQuadrature {
                    nodes: x.iter().map(|v| s * v).collect(),
                    weights: w.iter().map(|v| v / norm).collect(),
                })
            }
            FieldDistribution::Binary { h0 } if *h0 == 0.0 => Ok(Self::point()),
            FieldDistribution::Binary { h0 } => Ok(FieldQuadrature {
                nodes: vec![-h0, *h0],
                weights: vec![0.5, 0.5],
            }),
            FieldDistribution::Tabulated { grid, density } => {
                let n = grid.len();
                let mut weights: Vec<f64> = (0..n)
                    .map(|i| {
                        let lo = if i == 0 { grid[0] } else { grid[i - 1] };
                        let hi = if i == n - 1 { grid[n - 1] } else { grid[i + 1] };
                        0.5 * (hi - lo) * density[i]
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(invalid("density", "integrates to zero"));
                }
                weights.iter_mut().for_each(|w| *w /= total);
                Ok(FieldQuadrature {
                    nodes: grid.clone(),
                    weights,
                })
            }
        }
    }

    fn point() -> Self {
        FieldQuadrature {
            nodes: vec![0.0],
            weights: vec![1.0],
        }
    }

    /// `E[f(H)]` under the discrete measure.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        // Pair symmetric nodes so odd integrands cancel exactly.
        let n = self.nodes.len();
        let mut total = 0.0;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            total += self.weights[i] * f(self.nodes[i]) + self.weights[j] * f(self.nodes[j]);
        }
        if n % 2 == 1 {
            total += self.weights[n / 2] * f(self.nodes[n / 2]);
        }
        total
    }

    /// Checks that the averaged slope is even and decreasing on `u > 0`,
    /// which the fixed-point bracketing relies on.
    pub fn check_unimodal(&self) -> Result<()> {
        let mut prev = self.slope(0.0);
        for k in 1..=4000 {
            let s = self.slope(k as f64 * 5e-3);
            if s > prev + 1e-14 {
                return Err(invalid(
                    "field_dist",
                    "averaged response slope must decrease for u > 0 (field atoms too far apart)",
                ));
            }
            prev = s;
        }
        Ok(())
    }
}

impl LocalResponse for FieldQuadrature {
    fn value(&self, u: f64) -> f64 {
        self.expect(|x| (u + x).tanh())
    }

    fn slope(&self, u: f64) -> f64 {
        self.expect(|x| {
            let t = (u + x).tanh();
            1.0 - t * t
        })
    }
}

/// Gauss-Hermite nodes and weights for the weight `exp(-x^2)` from the
/// eigen-decomposition of the Jacobi matrix.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrise against round-off.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Expected magnetization `E_H[tanh(m_eff + h + H)]`.
pub fn rfcw_local_update(m_eff: f64, h: f64, dist: &FieldDistribution) -> Result<f64> {
    if !(m_eff.is_finite() && h.is_finite()) {
        return Err(invalid("m_eff", "effective field must be finite"));
    }
    let v = FieldQuadrature::new(dist)?.value(m_eff + h);
    if v.is_finite() && v.abs() < 1.0 {
        Ok(v)
    } else {
        Err(Error::Domain {
            what: "averaged magnetization",
            value: v,
        })
    }
}

fn response(dist: &FieldDistribution) -> Result<FieldQuadrature> {
    let q = FieldQuadrature::new(dist)?;
    q.check_unimodal()?;
    Ok(q)
}

/// Fixed points of the single random-field system `m = E[tanh(J m + h + H)]`.
pub fn rfcw_fixed_points(coupling: f64, field: f64, dist: &FieldDistribution) -> Result<CwFixedPoints> {
    fixed_points_of(&response(dist)?, coupling, field, DEFAULT_TOL)
}

/// Stable boundary values `(m_-(h), m_+(h))` of the random-field system.
pub fn rfcw_boundary_values(params: &ChainParams, dist: &FieldDistribution) -> Result<(f64, f64)> {
    let fp = rfcw_fixed_points(params.coupling, params.field, dist)?;
    Ok((fp.minus(), fp.plus()))
}

/// Largest Gaussian width at which the single system at zero field is still
/// bistable, from `J E[sech^2(H)] = 1`.
pub fn rfcw_critical_sigma(coupling: f64) -> Result<Option<f64>> {
    if coupling <= 1.0 {
        return Ok(None);
    }
    let excess = |sigma: f64| {
        let q = FieldQuadrature::new(&FieldDistribution::Gaussian { sigma }).expect("valid sigma");
        coupling * q.slope(0.0) - 1.0
    };
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
    }
    Ok(Some(bisect_root(&excess, 0.0, hi)))
}

/// Fixed-point residual `m(z) - E[tanh(J m + (J/4) D2 m + h + H)]`; boundary
/// entries are zero.
pub fn rfcw_residual(profile: &Profile, params: &ChainParams, dist: &FieldDistribution) -> Result<Vec<f64>> {
    let q = FieldQuadrature::new(dist)?;
    let m = profile.values();
    if m.len() != params.len() || profile.width() != params.width {
        return Err(Error::Contract("profile does not match chain parameters".into()));
    }
    let n = m.len();
    let w = params.width;
    Ok((0..n)
        .map(|z| {
            if z < w || z >= n - w {
                return 0.0;
            }
            let d2 = (1..=w).map(|k| m[z - k] + m[z + k]).sum::<f64>() / w as f64 - 2.0 * m[z];
            let u = params.coupling * m[z] + 0.25 * params.coupling * d2 + params.field;
            m[z] - q.value(u)
        })
        .collect())
}

/// Damped fixed-point solve of the averaged chain equations.
pub fn solve_rfcw_profile(params: &ChainParams, dist: &FieldDistribution, init: &Profile) -> Result<Profile> {
    solve_rfcw_profile_with(params, dist, init, SolveOptions::default())
}

pub fn solve_rfcw_profile_with(
    params: &ChainParams,
    dist: &FieldDistribution,
    init: &Profile,
    opts: SolveOptions,
) -> Result<Profile> {
    chain::solve_profile_of(&response(dist)?, params, init, opts)
}

/// Van der Waals curve of the averaged chain, solving for `h` at each mean.
pub fn rfcw_vdw_curve(params: &ChainParams, dist: &FieldDistribution, m_bar_grid: &[f64]) -> Result<VdwCurve> {
    let mut curve = chain::trace_curve_of(&response(dist)?, params, m_bar_grid, NewtonOptions::default())?;
    curve.metadata.extend(dist.describe());
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{average_magnetization, boundary_values, solve_profile, trace_vdw_curve};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gauss_hermite_moments() {
        let q = FieldQuadrature::new(&FieldDistribution::gaussian(0.7).unwrap()).unwrap();
        assert_eq!(q.nodes.len(), 64);
        assert_abs_diff_eq!(q.expect(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(q.expect(|x| x * x), 0.49, epsilon = 1e-13);
        assert_abs_diff_eq!(q.expect(|x| x.powi(4)), 3.0 * 0.49 * 0.49, epsilon = 1e-12);
        // E[cos H] = exp(-sigma^2 / 2)
        assert_abs_diff_eq!(q.expect(f64::cos), (-0.245f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn zero_variance_reduces_to_tanh() {
        for dist in [FieldDistribution::gaussian(0.0).unwrap(), FieldDistribution::binary(0.0).unwrap()] {
            for u in [-2.0, -0.3, 0.0, 0.7] {
                assert_eq!(rfcw_local_update(u, 0.1, &dist).unwrap(), (u + 0.1f64).tanh());
            }
        }
    }

    #[test]
    fn binary_is_two_point_average() {
        let d = FieldDistribution::binary(0.4).unwrap();
        let (m, h) = (0.3, -0.05);
        let expected = 0.5 * (m + h + 0.4f64).tanh() + 0.5 * (m + h - 0.4f64).tanh();
        assert_abs_diff_eq!(rfcw_local_update(m, h, &d).unwrap(), expected, epsilon = 1e-15);
        assert_eq!(rfcw_local_update(0.0, 0.0, &d).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_matches_gaussian() {
        let sigma: f64 = 0.3;
        let grid: Vec<f64> = (-600..=600).map(|k| k as f64 * 0.005).collect();
        let density = grid.iter().map(|x| (-x * x / (2.0 * sigma * sigma)).exp()).collect();
        let tab = FieldDistribution::tabulated(grid, density).unwrap();
        let g = FieldDistribution::gaussian(sigma).unwrap();
        assert_abs_diff_eq!(tab.variance(), sigma * sigma, epsilon = 1e-9);
        for u in [-0.5, 0.1, 1.2] {
            assert_abs_diff_eq!(
                rfcw_local_update(u, 0.0, &tab).unwrap(),
                rfcw_local_update(u, 0.0, &g).unwrap(),
                epsilon = 1e-8
            );
        }
        assert!(FieldDistribution::tabulated(vec![-1.0, 0.0, 2.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(FieldDistribution::tabulated(vec![-1.0, 0.0, 1.0], vec![1.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn wide_binary_is_rejected_for_profiles() {
        let d = FieldDistribution::binary(2.0).unwrap();
        assert!(rfcw_fixed_points(1.5, 0.0, &d).is_err());
        assert!(rfcw_fixed_points(1.5, 0.0, &FieldDistribution::binary(0.3).unwrap()).is_ok());
    }

    #[test]
    fn zero_variance_profile_and_curve_match_deterministic_chain() {
        let p = ChainParams::new(12, 1, 1.3, 0.0).unwrap();
        let d = FieldDistribution::gaussian(0.0).unwrap();
        let init = Profile::kink(&p, 0.0).unwrap();
        let a = solve_profile(&p, &init).unwrap();
        let b = solve_rfcw_profile(&p, &d, &init).unwrap();
        assert!(a.max_distance(&b) < 1e-10);

        let grid: Vec<f64> = (-6..=6).map(|k| 0.05 * k as f64).collect();
        let ca = trace_vdw_curve(&p, &grid).unwrap();
        let cb = rfcw_vdw_curve(&p, &d, &grid).unwrap();
        for (x, y) in ca.points.iter().zip(&cb.points) {
            assert_abs_diff_eq!(x.control, y.control, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_kink_plateau_matches_scalar_oracle() {
        let sigma = 0.1;
        let j = 1.1;
        let d = FieldDistribution::gaussian(sigma).unwrap();
        // Independent scalar oracle: plain bisection on m - E[tanh(J m + H)]
        // on (0, 1) with a direct Gauss-Hermite sum.
        let q = FieldQuadrature::new(&d).unwrap();
        let g = |m: f64| m - q.nodes.iter().zip(&q.weights).map(|(x, w)| w * (j * m + x).tanh()).sum::<f64>();
        let (mut lo, mut hi) = (0.05, 0.999);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let p = ChainParams::new(25, 1, j, 0.0).unwrap();
        let (left, right) = rfcw_boundary_values(&p, &d).unwrap();
        assert_abs_diff_eq!(right, lo, epsilon = 1e-12);
        assert_eq!(left, -right);
        let init = Profile::pinned(&p, left, right, |z| right * (0.4 * z as f64).tanh()).unwrap();
        let sol = solve_rfcw_profile(&p, &d, &init).unwrap();
        assert!(sol.values()[1..50].iter().zip(sol.values()[1..50].iter().rev()).all(|(a, b)| (a + b).abs() < 1e-9));
        assert_abs_diff_eq!(sol.values()[49], right, epsilon = 1e-6);
        assert!(rfcw_residual(&sol, &p, &d).unwrap().iter().all(|r| r.abs() < 1e-9));
        assert_abs_diff_eq!(average_magnetization(&sol), 0.0, epsilon = 1e-12);
        // The random field lowers the plateau below the deterministic one.
        assert!(right < boundary_values(&p).unwrap().1);
    }

    #[test]
    fn supercritical_disorder_gives_monotone_curve() {
        let j = 1.1;
        let sc = rfcw_critical_sigma(j).unwrap().unwrap();
        let d = FieldDistribution::gaussian(1.2 * sc).unwrap();
        assert_eq!(rfcw_fixed_points(j, 0.0, &d).unwrap().len(), 1);
        let below = FieldDistribution::gaussian(0.8 * sc).unwrap();
        assert_eq!(rfcw_fixed_points(j, 0.0, &below).unwrap().len(), 3);
        let p = ChainParams::new(20, 1, j, 0.0).unwrap();
        let grid: Vec<f64> = (-16..=16).map(|k| 0.05 * k as f64).collect();
        let c = rfcw_vdw_curve(&p, &d, &grid).unwrap();
        assert!(c.failure.is_none());
        assert!(c.points.windows(2).all(|w| w[1].control > w[0].control));
        let mid = c.points[16];
        assert!(mid.control.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn odd_and_increasing(u in -3.0f64..3.0, h in -0.5f64..0.5, sigma in 0.0f64..1.0, du in 1e-3f64..0.5) {
            let d = FieldDistribution::gaussian(sigma).unwrap();
            let a = rfcw_local_update(u, h, &d).unwrap();
            let b = rfcw_local_update(-u, -h, &d).unwrap();
            prop_assert!((a + b).abs() < 1e-15);
            prop_assert!(rfcw_local_update(u + du, h, &d).unwrap() > a);
            prop_assert!(rfcw_local_update(u, h + du, &d).unwrap() > a);
        }

        #[test]
        fn doubling_nodes_is_converged(u in -3.0f64..3.0, sigma in 0.0f64..0.8) {
            let d = FieldDistribution::gaussian(sigma).unwrap();
            let a = FieldQuadrature::with_order(&d, 64).unwrap().value(u);
            let b = FieldQuadrature::with_order(&d, 128).unwrap().value(u);
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
