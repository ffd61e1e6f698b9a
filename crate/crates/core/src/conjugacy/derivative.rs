//! Closed forms that exist only when there is no unstable part (`P = I`):
//! `G(k, v) = Phi(k,0) y(0,k,v)`, `H(k, v) = y(k, 0, x(0,k,v))`, and the
//! Jacobian of `G` via the variational equation.

use super::{ConjugacyPair, MapValue};
use crate::algebra::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::trajectories::linear_solution;

#[derive(Debug, Clone, PartialEq)]
pub struct ShortcutValue {
    pub g_short: MapValue,
    pub h_short: MapValue,
}

impl ConjugacyPair {
    fn require_contraction(&self) -> Result<()> {
        if self.pair.projectors().is_contraction_case() {
            Ok(())
        } else {
            Err(Error::NotContractionCase)
        }
    }

    /// Both maps through the initial time, without any series.
    pub fn shortcut_maps(&self, k: usize, v: &Vector) -> Result<ShortcutValue> {
        self.require_contraction()?;
        self.check_index(k)?;
        // backward continuation to 0, then the linear push
        let (y, y_err) = self.nonlinear_orbit(k, v, 0.0, k)?;
        let (gx, gx_err) = self.linear_orbit(0, &y[0], y_err[0])?;
        // linear pull-back to 0, then the nonlinear push
        let (x, x_err) = self.linear_orbit(k, v, 0.0)?;
        let (hy, hy_err) = self.nonlinear_orbit(0, &x[0], x_err[0], k)?;
        Ok(ShortcutValue {
            g_short: MapValue {
                value: gx[k].clone(),
                err: gx_err[k],
            },
            h_short: MapValue {
                value: hy[k].clone(),
                err: hy_err[k],
            },
        })
    }

    /// `dG/deta (k, eta) = Phi(k,0) Z(0)`, where `Z(k) = I` and
    /// `Z(n) = (A(n) + Df(n, y(n,k,eta)))^-1 Z(n+1)` along the backward orbit.
    pub fn d_g(&self, k: usize, eta: &Vector) -> Result<Matrix> {
        self.require_contraction()?;
        self.check_index(k)?;
        let d = self.pair.dim();
        let (y, _) = self.nonlinear_orbit(k, eta, 0.0, k)?;
        let mut z = Matrix::identity(d, d);
        for n in (0..k).rev() {
            let jac = self.pair.a(n)?.as_ref() + self.pair.spec().perturbation.f.jacobian(n, &y[n])?;
            z = jac.lu().solve(&z).ok_or(Error::SingularCoefficient { index: n, rcond: 0.0 })?;
        }
        let cols = (0..d)
            .map(|c| linear_solution(&self.pair, k, 0, &z.column(c).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_columns(&cols))
    }
}
