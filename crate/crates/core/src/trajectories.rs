//! Solutions of the linear system `x(k+1) = A(k) x(k)` and of its perturbation
//! `y(k+1) = A(k) y(k) + f(k, y(k))`, forward in time and, for the perturbed
//! system, backward by solving one implicit step at a time.

use std::borrow::Cow;

use crate::algebra::{op_norm, Matrix, ProjectorPair, TransitionCache, Vector};
use crate::dichotomy::{certify, Certified, CertifyOptions, DichotomyCertificate, SystemSpec};
use crate::error::{Error, Result};

/// Forward iterates larger than this raise [`Error::Overflow`] in [`nonlinear_forward`].
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Iteration budget for one implicit backward step.
pub const BACKWARD_MAX_ITERS: usize = 10_000;

/// Allowance for rounding in one step `A y + f(y)`, in units of `|A||y| + |f(y)|`.
pub(crate) fn step_rounding(d: usize) -> f64 {
    16.0 * (d as f64 + 2.0) * f64::EPSILON
}

/// A linear system, its perturbation, and the certificate issued for the pair.
#[derive(Debug, Clone)]
pub struct SystemPair {
    spec: SystemSpec,
    cache: TransitionCache,
    projectors: ProjectorPair,
    certificate: DichotomyCertificate,
    a_norm: Vec<f64>,
    a_inv_norm: Vec<f64>,
    gamma: Vec<f64>,
}

impl SystemPair {
    /// Certifies `spec` and binds the result to it.
    pub fn certify(spec: SystemSpec, opts: &CertifyOptions) -> Result<Self> {
        let certified = certify(&spec, opts)?;
        SystemPair::from_certified(spec, certified)
    }

    /// Binds an existing certification run; fails if it was issued for another system.
    pub fn from_certified(spec: SystemSpec, certified: Certified) -> Result<Self> {
        if certified.certificate.fingerprint != spec.fingerprint()
            || certified.cache.sequence() != &spec.linear
            || certified.projectors.family() != &spec.projector
        {
            return Err(Error::CertificateMismatch);
        }
        let n = certified.cache.horizon();
        let mut a_norm = Vec::with_capacity(n);
        let mut a_inv_norm = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        for j in 0..n {
            a_norm.push(op_norm(certified.cache.a(j)?));
            a_inv_norm.push(op_norm(certified.cache.a_inv(j)?));
            gamma.push(spec.perturbation.gamma.at(j)?);
        }
        Ok(SystemPair {
            spec,
            cache: certified.cache,
            projectors: certified.projectors,
            certificate: certified.certificate,
            a_norm,
            a_inv_norm,
            gamma,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn certificate(&self) -> &DichotomyCertificate {
        &self.certificate
    }

    pub fn cache(&self) -> &TransitionCache {
        &self.cache
    }

    pub fn projectors(&self) -> &ProjectorPair {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Horizon of the stored tables (coefficients are available for `j < horizon`).
    pub fn horizon(&self) -> usize {
        self.cache.horizon()
    }

    pub fn a(&self, j: usize) -> Result<Cow<'_, Matrix>> {
        match self.cache.a(j) {
            Ok(m) => Ok(Cow::Borrowed(m)),
            Err(_) => Ok(Cow::Owned(self.spec.linear.matrix(j)?)),
        }
    }

    pub fn a_inv(&self, j: usize) -> Result<Cow<'_, Matrix>> {
        match self.cache.a_inv(j) {
            Ok(m) => Ok(Cow::Borrowed(m)),
            Err(_) => Ok(Cow::Owned(self.spec.linear.inverse(j)?)),
        }
    }

    pub fn a_norm(&self, j: usize) -> Result<f64> {
        match self.a_norm.get(j) {
            Some(v) => Ok(*v),
            None => Ok(op_norm(&self.spec.linear.matrix(j)?)),
        }
    }

    pub fn a_inv_norm(&self, j: usize) -> Result<f64> {
        match self.a_inv_norm.get(j) {
            Some(v) => Ok(*v),
            None => Ok(op_norm(&self.spec.linear.inverse(j)?)),
        }
    }

    pub fn gamma(&self, j: usize) -> Result<f64> {
        match self.gamma.get(j) {
            Some(v) => Ok(*v),
            None => self.spec.perturbation.gamma.at(j),
        }
    }

    pub fn f(&self, j: usize, y: &Vector) -> Result<Vector> {
        self.spec.perturbation.f.eval(j, y)
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// `x(k, m, xi) = Phi(k, m) xi`, stepping factor by factor in either direction.
pub fn linear_solution(pair: &SystemPair, k: usize, m: usize, xi: &Vector) -> Result<Vector> {
    pair.check_dim(xi)?;
    let mut x = xi.clone();
    if k >= m {
        for j in m..k {
            x = pair.a(j)?.as_ref() * x;
        }
    } else {
        for j in (k..m).rev() {
            x = pair.a_inv(j)?.as_ref() * x;
        }
    }
    Ok(x)
}

/// One forward step `A(j) y + f(j, y)`.
pub fn forward_step(pair: &SystemPair, j: usize, y: &Vector) -> Result<Vector> {
    Ok(pair.a(j)?.as_ref() * y + pair.f(j, y)?)
}

/// `y(k, m, eta)` for `k >= m`. Fails with `Overflow` once an iterate exceeds `1e12`.
pub fn nonlinear_forward(pair: &SystemPair, k: usize, m: usize, eta: &Vector) -> Result<Vector> {
    pair.check_dim(eta)?;
    if k < m {
        return Err(Error::InvalidConfig(format!(
            "forward iteration needs k >= m (got k = {k}, m = {m})"
        )));
    }
    let mut y = eta.clone();
    for j in m..k {
        y = forward_step(pair, j, &y)?;
        let n = y.norm();
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN norms must fail too
        if !(n <= OVERFLOW_GUARD) {
            return Err(Error::Overflow { index: j + 1, norm: n });
        }
    }
    Ok(y)
}

/// A backward-continued state with a bound on its numerical error.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPoint {
    pub value: Vector,
    pub err: f64,
    /// Total fixed-point iterations over all steps.
    pub iterations: usize,
}

/// Solves `u = A(j)^-1 (eta - f(j, u))`, starting from `A(j)^-1 eta`.
///
/// Returns the solution, an a-posteriori bound on its distance to the exact
/// fixed point, and the iteration count.
pub(crate) fn backward_step(
    pair: &SystemPair,
    j: usize,
    eta: &Vector,
    tol: f64,
) -> Result<(Vector, f64, usize)> {
    let inv = pair.a_inv(j)?;
    let inv = inv.as_ref();
    let c = pair.a_inv_norm(j)? * pair.gamma(j)?;
    if c >= 1.0 {
        return Err(Error::P6Violated { index: j, factor: c });
    }
    let d = pair.dim();
    let mut u = inv * eta;
    for it in 1..=BACKWARD_MAX_ITERS {
        let fu = pair.f(j, &u)?;
        let next = inv * (eta - &fu);
        let change = (&next - &u).norm();
        let scale = next.norm().max(1.0);
        let target = tol.max(4.0 * f64::EPSILON) * (1.0 - c) * scale;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow {
                index: j,
                norm: next.norm(),
            });
        }
        if change <= target {
            let fp = if c > 0.0 { c / (1.0 - c) * change } else { 0.0 };
            let round = step_rounding(d) * pair.a_inv_norm(j)? * (eta.norm() + fu.norm()) / (1.0 - c);
            return Ok((next, fp + round, it));
        }
        u = next;
    }
    Err(Error::NoConvergence {
        context: format!("backward step at index {j}"),
        iterations: BACKWARD_MAX_ITERS,
    })
}

/// `y(n, k, eta)` for `n <= k`, continued backward one implicit step at a time.
///
/// Each step stops once successive iterates differ by less than
/// `tol * (1 - c) * max(1, |u|)`, `c = |A^-1| gamma`; the reported error
/// propagates the per-step bounds through the backward Lipschitz factors.
pub fn nonlinear_backward(
    pair: &SystemPair,
    n: usize,
    k: usize,
    eta: &Vector,
    tol: f64,
) -> Result<BackwardPoint> {
    let orbit = backward_orbit(pair, n, k, eta, 0.0, tol)?;
    let first = orbit.values.into_iter().next().expect("orbit is nonempty");
    Ok(BackwardPoint {
        value: first,
        err: orbit.errs[0],
        iterations: orbit.iterations,
    })
}

/// Backward orbit `y(j, k, eta)` for `j = n..=k`, with per-point error bounds
/// that include an initial error `eta_err` in `eta`.
#[derive(Debug, Clone)]
pub struct BackwardOrbit {
    /// `values[i] = y(n + i, k, eta)`.
    pub values: Vec<Vector>,
    pub errs: Vec<f64>,
    pub iterations: usize,
}

pub fn backward_orbit(
    pair: &SystemPair,
    n: usize,
    k: usize,
    eta: &Vector,
    eta_err: f64,
    tol: f64,
) -> Result<BackwardOrbit> {
    pair.check_dim(eta)?;
    if n > k {
        return Err(Error::InvalidConfig(format!(
            "backward continuation needs n <= k (got n = {n}, k = {k})"
        )));
    }
    let len = k - n + 1;
    let mut values = vec![Vector::zeros(0); len];
    let mut errs = vec![0.0; len];
    values[len - 1] = eta.clone();
    errs[len - 1] = eta_err;
    let mut iterations = 0;
    for j in (n..k).rev() {
        let i = j - n;
        let (u, e, it) = backward_step(pair, j, &values[i + 1], tol)?;
        iterations += it;
        let c = pair.a_inv_norm(j)? * pair.gamma(j)?;
        errs[i] = pair.a_inv_norm(j)? / (1.0 - c) * errs[i + 1] + e;
        values[i] = u;
    }
    Ok(BackwardOrbit {
        values,
        errs,
        iterations,
    })
}

/// Forward orbit `y(j, m, eta)` for `j = m..=upto`, with a running bound on the
/// error caused by an initial error `eta_err` and by rounding in each step.
///
/// Only non-finite values are rejected; large iterates are legitimate along
/// unstable directions.
pub fn forward_orbit(
    pair: &SystemPair,
    m: usize,
    upto: usize,
    eta: &Vector,
    eta_err: f64,
) -> Result<(Vec<Vector>, Vec<f64>)> {
    pair.check_dim(eta)?;
    let d = pair.dim();
    let mut ys = Vec::with_capacity(upto.saturating_sub(m) + 1);
    let mut errs = Vec::with_capacity(ys.capacity());
    ys.push(eta.clone());
    errs.push(eta_err);
    for j in m..upto {
        let y = ys.last().expect("nonempty");
        let fy = pair.f(j, y)?;
        let an = pair.a_norm(j)?;
        let next = pair.a(j)?.as_ref() * y + &fy;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow {
                index: j + 1,
                norm: next.norm(),
            });
        }
        let e = (an + pair.gamma(j)?) * errs.last().expect("nonempty")
            + step_rounding(d) * (an * y.norm() + fy.norm());
        ys.push(next);
        errs.push(e);
    }
    Ok((ys, errs))
}
