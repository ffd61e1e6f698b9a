use crate::error::{Error, Result};

/// Finite-horizon surrogate for the infinite series and fixed points.
///
/// Series run over `j <= series_horizon`; whatever lies past it is covered by
/// the certified tail envelopes and reported inside every error bound. Maps
/// are evaluated for `k <= window`, which must stay below the series horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub series_horizon: usize,
    /// The fixed-point iteration stops once the sup-norm change drops below `fixed_point_tol * (1 - q)`.
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    /// Tolerance for each implicit backward step.
    pub backward_tol: f64,
    pub window: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            series_horizon: 60,
            fixed_point_tol: 1e-12,
            max_iters: 500,
            backward_tol: 1e-15,
            window: 50,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.window >= self.series_horizon {
            return Err(Error::InvalidConfig(format!(
                "evaluation window {} must be below the series horizon {}",
                self.window, self.series_horizon
            )));
        }
        if !(self.fixed_point_tol > 0.0 && self.fixed_point_tol.is_finite()) {
            return Err(Error::InvalidConfig("fixed-point tolerance must be positive".into()));
        }
        if !(self.backward_tol > 0.0 && self.backward_tol.is_finite()) {
            return Err(Error::InvalidConfig("backward tolerance must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("iteration budget must be positive".into()));
        }
        Ok(())
    }
}
