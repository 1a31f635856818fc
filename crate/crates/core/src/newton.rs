use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Max-norm of the residual at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 60,
        }
    }
}

pub(crate) fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Damped Newton with step halving. A trial point is accepted when it is
/// `valid` and lowers the max-norm residual.
pub(crate) fn solve<R, J, V>(
    x: &mut DVector<f64>,
    residual: R,
    jacobian: J,
    valid: V,
    opts: NewtonOptions,
) -> Result<usize>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    V: Fn(&DVector<f64>) -> bool,
{
    let mut r = residual(x)?;
    let mut norm = max_norm(&r);
    for it in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok(it);
        }
        let jac = jacobian(x)?;
        let step = jac.lu().solve(&(-&r)).ok_or(Error::NoConvergence {
            iterations: it,
            residual: norm,
        })?;
        let mut t = 1.0;
        loop {
            let trial = &*x + &step * t;
            if valid(&trial) {
                if let Ok(rt) = residual(&trial) {
                    let nt = max_norm(&rt);
                    if nt < norm || nt < opts.tol {
                        *x = trial;
                        r = rt;
                        norm = nt;
                        break;
                    }
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: norm,
                });
            }
        }
    }
    if norm < opts.tol {
        Ok(opts.max_iter)
    } else {
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
            residual: norm,
        })
    }
}
