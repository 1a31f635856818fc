//! Survey-propagation message updates and the entropic parametrization.

use crate::error::{Error, Result};

/// `φ = −ln(1−η)`. Infinite for `η = 1`.
pub fn eta_to_phi(eta: f64) -> f64 {
    -(-eta).ln_1p()
}

/// `η = 1 − e^{−φ}`.
pub fn phi_to_eta(phi: f64) -> f64 {
    -(-phi).exp_m1()
}

/// Entropic coordinates of a set of warnings. `phi[i] = −ln(1−η_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropicView {
    pub phi: Vec<f64>,
}

impl EntropicView {
    pub fn from_eta(eta: &[f64]) -> Result<Self> {
        for &e in eta {
            check_unit("eta", e)?;
        }
        Ok(EntropicView {
            phi: eta.iter().map(|&e| eta_to_phi(e)).collect(),
        })
    }

    pub fn to_eta(&self) -> Vec<f64> {
        self.phi.iter().map(|&p| phi_to_eta(p)).collect()
    }

    /// `x = −ln Π(1−η) = Σ φ`.
    pub fn x(&self) -> f64 {
        self.phi.iter().sum()
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} = {value} is outside [0, 1]")))
    }
}

/// Variable-to-clause messages `(π⁺, π⁻)`: the probabilities that no
/// supporting (resp. impeding) warning reaches the variable.
pub fn sp_update_variable(supporting: &[f64], impeding: &[f64]) -> Result<(f64, f64)> {
    let mut plus = 1.0;
    for &e in supporting {
        check_unit("eta", e)?;
        plus *= 1.0 - e;
    }
    let mut minus = 1.0;
    for &e in impeding {
        check_unit("eta", e)?;
        minus *= 1.0 - e;
    }
    Ok((plus, minus))
}

/// Result of a clause update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClauseUpdate {
    pub eta: f64,
    /// Number of neighbors with `π⁺ = π⁻ = 0`. Their factor is taken as 1.
    pub degenerate: usize,
}

/// Factor contributed by one neighbor. The degenerate case returns `(1, true)`.
#[inline]
pub(crate) fn clause_factor(plus: f64, minus: f64) -> (f64, bool) {
    let den = plus + minus - plus * minus;
    if den <= 0.0 {
        (1.0, true)
    } else {
        ((plus * (1.0 - minus) / den).clamp(0.0, 1.0), false)
    }
}

/// Clause-to-variable warning `η = Π_j π⁺(1−π⁻)/(π⁺+π⁻−π⁺π⁻)`.
pub fn sp_update_clause(neighbor_pis: &[(f64, f64)]) -> Result<ClauseUpdate> {
    let mut eta = 1.0;
    let mut degenerate = 0;
    for &(p, m) in neighbor_pis {
        check_unit("pi_plus", p)?;
        check_unit("pi_minus", m)?;
        let (f, d) = clause_factor(p, m);
        eta *= f;
        degenerate += d as usize;
    }
    Ok(ClauseUpdate { eta, degenerate })
}
