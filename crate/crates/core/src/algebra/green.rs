use crate::algebra::linalg::{Matrix, Vector};
use crate::algebra::projector::ProjectorPair;
use crate::algebra::transition::TransitionCache;
use crate::error::{Error, Result};

/// Green's function of the dichotomy:
/// `Phi(k,n) P(n)` for `k >= n`, `-Phi(k,n) Q(n)` for `k < n`.
pub fn green_kernel(
    cache: &TransitionCache,
    proj: &ProjectorPair,
    k: usize,
    n: usize,
) -> Result<Matrix> {
    let phi = cache.transition(k, n)?;
    if k >= n {
        Ok(phi * proj.p(n)?)
    } else {
        Ok(-(phi * proj.q(n)?))
    }
}

/// Applies the truncated Green operator
/// `g -> (sum_{j=0}^{K} G(k, j+1) g_j)_{k=0..K}` in `O(K)` work.
///
/// The stable part is accumulated forward with
/// `S_P(k+1) = P(k+1) (A(k) S_P(k) + g_k)` and the unstable part backward
/// with `S_Q(k) = Q(k) A(k)^-1 (S_Q(k+1) + g_k)`, `S_Q(K+1) = 0`. The
/// re-projection is exact in exact arithmetic (projector invariance) and
/// keeps rounding from leaking into the growing directions.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    horizon: usize,
    a: Vec<Matrix>,
    a_inv: Vec<Matrix>,
    p: Vec<Matrix>,
    q: Vec<Matrix>,
    contraction: bool,
}

impl GreenOperator {
    /// Needs the cache and projectors on `[0, series_horizon + 1]`.
    pub fn new(cache: &TransitionCache, proj: &ProjectorPair, series_horizon: usize) -> Result<Self> {
        let need = series_horizon + 1;
        if cache.horizon() < need || proj.horizon() < need {
            return Err(Error::OutOfHorizon {
                index: need,
                horizon: cache.horizon().min(proj.horizon()),
            });
        }
        let a = (0..=series_horizon)
            .map(|j| cache.a(j).cloned())
            .collect::<Result<_>>()?;
        let a_inv = (0..=series_horizon)
            .map(|j| cache.a_inv(j).cloned())
            .collect::<Result<_>>()?;
        let p = (0..=need).map(|j| proj.p(j).cloned()).collect::<Result<_>>()?;
        let q = (0..=need).map(|j| proj.q(j).cloned()).collect::<Result<_>>()?;
        Ok(GreenOperator {
            horizon: series_horizon,
            a,
            a_inv,
            p,
            q,
            contraction: proj.is_contraction_case(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `g` must have length `K + 1`; the result has the same length.
    pub fn apply(&self, g: &[Vector]) -> Vec<Vector> {
        assert_eq!(g.len(), self.horizon + 1, "green operator input length");
        let d = g[0].len();
        let k_max = self.horizon;
        let mut out = Vec::with_capacity(k_max + 1);
        let mut sp = Vector::zeros(d);
        out.push(sp.clone());
        #[allow(clippy::needless_range_loop)] // walks p, a and g in step
        for k in 0..k_max {
            sp = &self.p[k + 1] * (&self.a[k] * &sp + &g[k]);
            out.push(sp.clone());
        }
        if !self.contraction {
            let mut sq = Vector::zeros(d);
            for k in (0..=k_max).rev() {
                sq = &self.q[k] * (&self.a_inv[k] * (&sq + &g[k]));
                out[k] -= &sq;
            }
        }
        out
    }
}
