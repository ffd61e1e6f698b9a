//! The maps `w*`, `z*`, `H`, `G` relating solutions of the linear system to
//! solutions of its perturbation, with an explicit error bound on every value.
//!
//! With the Green kernel `G(k, n)` of the dichotomy,
//!
//! * `z*(k; (m, xi))` is the fixed point of `phi -> sum_j G(k, j+1) f(j, x(j,m,xi) + phi(j))`,
//! * `w*(k; (m, eta)) = -sum_j G(k, j+1) f(j, y(j,m,eta))`,
//! * `H(k, xi) = xi + z*(k; (k, xi))` and `G(k, eta) = eta + w*(k; (k, eta))`.
//!
//! Sums are truncated at the policy's series horizon `K`. Each error bound
//! adds the fixed-point error `q/(1-q)` times the last change, a certified
//! bound on the discarded tail, the propagated error of the orbit the series
//! is evaluated along, and an allowance for floating-point rounding.

mod derivative;
mod policy;
mod verify;

pub use derivative::ShortcutValue;
pub use policy::TruncationPolicy;
pub use verify::{
    draw_samples, verify_all, verify_conjugacy, verify_identities, ConjugacyReport, ConjugacyRow,
    IdentityReport, IdentityRow, Sample, Verification,
};

use crate::algebra::{GreenOperator, Matrix, Vector};
use crate::dichotomy::{series_table, KernelNorms};
use crate::error::{Error, Result};
use crate::trajectories::{backward_orbit, forward_orbit, linear_solution, step_rounding, SystemPair};

/// A computed vector together with a bound on its distance to the exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct MapValue {
    pub value: Vector,
    pub err: f64,
}

/// `G(k, eta)` from the series, with the alternative form
/// `Phi(k,0) (y(0,k,eta) + w*(0; (k,eta)))` as a cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct GValue {
    pub value: Vector,
    pub err: f64,
    pub alternative: Vector,
    pub discrepancy: f64,
}

/// A single value of `z*` with the diagnostics of the fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ZValue {
    pub value: Vector,
    pub err: f64,
    pub iterations: usize,
    pub apriori_bound: f64,
    pub contraction_ratio: f64,
}

/// `z*(j; (m, xi))` for every `j <= K`, along the linear orbit through `(m, xi)`.
#[derive(Debug, Clone)]
pub struct ZTable {
    pub base: usize,
    /// `x(j, m, xi)`.
    pub x: Vec<Vector>,
    pub x_err: Vec<f64>,
    pub z: Vec<Vector>,
    pub err: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of the last iteration.
    pub last_change: f64,
    /// `q^n / (1-q) |z_1 - z_0|` after `n` iterations.
    pub apriori_bound: f64,
    /// Largest observed ratio of successive changes (0 when not measurable).
    pub contraction_ratio: f64,
}

/// `w*(j; (m, eta))` for every `j <= K`, along the nonlinear orbit through `(m, eta)`.
#[derive(Debug, Clone)]
pub struct WTable {
    pub base: usize,
    /// `y(j, m, eta)`.
    pub y: Vec<Vector>,
    pub y_err: Vec<f64>,
    pub w: Vec<Vector>,
    pub err: Vec<f64>,
}

/// The conjugacy maps for one certified system pair under a truncation policy.
#[derive(Debug, Clone)]
pub struct ConjugacyPair {
    pair: SystemPair,
    policy: TruncationPolicy,
    green: GreenOperator,
    norms: KernelNorms,
    gamma: Vec<f64>,
    p: f64,
    q: f64,
    mu_tail: Vec<f64>,
    e_tail: Vec<f64>,
    resolvent: Resolvent,
    lip_z: Vec<Vec<f64>>,
    lip_w: Vec<Vec<f64>>,
    proj_scale: f64,
}

/// Upper bounds on solutions of `e = t + N e`, `N(l, j) = |G(l, j+1)| gamma(j)`,
/// whose row sums are at most `q < 1`.
///
/// Holds `R_n = I + N + ... + N^n`; the remainder `N^(n+1) (I - N)^-1` has row
/// sums at most `q^(n+1) / (1-q)`, which is charged as `slack * sup t`.
#[derive(Debug, Clone)]
struct Resolvent {
    kernel: Matrix,
    r: Matrix,
    slack: f64,
}

impl Resolvent {
    fn new(norms: &KernelNorms, gamma: &[f64], q: f64) -> Self {
        let n = gamma.len();
        let kernel = Matrix::from_fn(n, n, |l, j| norms.get(l, j) * gamma[j]);
        let id = Matrix::identity(n, n);
        let mut r = id.clone();
        let mut slack = q / (1.0 - q);
        let mut steps = 0;
        while slack > 1e-30 && steps < 5000 {
            r = &id + &kernel * &r;
            slack *= q;
            steps += 1;
        }
        Resolvent { kernel, r, slack }
    }

    fn bound(&self, t: &[f64]) -> Vec<f64> {
        let sup = t.iter().copied().fold(0.0, f64::max);
        let v = &self.r * Vector::from_column_slice(t);
        v.iter().map(|e| e + self.slack * sup).collect()
    }
}

fn sup_norm(vs: &[Vector]) -> f64 {
    vs.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

impl ConjugacyPair {
    pub fn new(pair: SystemPair, policy: TruncationPolicy) -> Result<Self> {
        policy.validate()?;
        let cert = pair.certificate();
        if !cert.all_hold() {
            return Err(Error::Uncertified(format!(
                "hypotheses failing: {}",
                cert.failures().join(", ")
            )));
        }
        let k = policy.series_horizon;
        if pair.horizon() < k + 1 {
            return Err(Error::Uncertified(format!(
                "certificate grid [0, {}] does not cover the series horizon {k} + 1",
                pair.horizon()
            )));
        }
        let spec = pair.spec();
        let contraction = pair.projectors().is_contraction_case();
        let green = GreenOperator::new(pair.cache(), pair.projectors(), k)?;
        let norms = KernelNorms::new(pair.cache(), pair.projectors(), k + 1, k)?;
        let n_mu = series_table(&norms, &spec.rates, &spec.perturbation.mu, contraction)?;
        let n_gamma = series_table(&norms, &spec.rates, &spec.perturbation.gamma, contraction)?;
        let (p, q) = (n_mu.sup, n_gamma.sup);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN constants must fail too
        if !(q < 1.0) || !p.is_finite() {
            return Err(Error::Uncertified(format!(
                "series constants p = {p}, q = {q} at horizon {k}"
            )));
        }
        let gamma = spec.perturbation.gamma.table(k)?;
        let resolvent = Resolvent::new(&norms, &gamma, q);
        let e_tail = resolvent.bound(&n_mu.tails);

        // sensitivity tables for the evaluation window
        let w = policy.window;
        let mut lip_z = Vec::with_capacity(w + 1);
        let mut lip_w = Vec::with_capacity(w + 1);
        for m in 0..=w {
            let phi: Vec<f64> = (0..=k)
                .map(|i| Ok(crate::algebra::op_norm(&pair.cache().transition(i, m)?)))
                .collect::<Result<_>>()?;
            let a: Vec<f64> = (0..=k)
                .map(|j| norms.row(j).iter().zip(&gamma).zip(&phi).map(|((g, c), f)| g * c * f).sum())
                .collect();
            lip_z.push(resolvent.bound(&a));

            let mut ly = vec![1.0; k + 1];
            for j in (0..m).rev() {
                let c = pair.a_inv_norm(j)? * pair.gamma(j)?;
                ly[j] = ly[j + 1] * pair.a_inv_norm(j)? / (1.0 - c);
            }
            for j in m..k {
                ly[j + 1] = ly[j] * (pair.a_norm(j)? + pair.gamma(j)?);
            }
            lip_w.push(
                (0..=w)
                    .map(|l| norms.row(l).iter().zip(&gamma).zip(&ly).map(|((g, c), y)| g * c * y).sum())
                    .collect(),
            );
        }
        let proj_scale = 1.0 + cert.projector.sup_norm_p;
        log::debug!("conjugacy pair: K = {k}, p = {p:.6e}, q = {q:.6e}");
        Ok(ConjugacyPair {
            pair,
            policy,
            green,
            norms,
            gamma,
            p,
            q,
            mu_tail: n_mu.tails,
            e_tail,
            resolvent,
            lip_z,
            lip_w,
            proj_scale,
        })
    }

    pub fn pair(&self) -> &SystemPair {
        &self.pair
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    /// `sup_l N(l, mu)` at the policy's horizon (value + tail).
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `sup_l N(l, gamma)` at the policy's horizon (value + tail).
    pub fn q(&self) -> f64 {
        self.q
    }

    fn k_ser(&self) -> usize {
        self.policy.series_horizon
    }

    /// Per-index bound on `|z*(l) - z_K(l)|` caused by truncating the series at `K`.
    pub fn tail_error(&self, l: usize) -> f64 {
        self.e_tail[l]
    }

    /// Bound on the Lipschitz constant of `xi -> z*(k; (m, xi))` (truncated maps), `m <= window`.
    pub fn lip_z(&self, m: usize, k: usize) -> f64 {
        self.lip_z[m][k]
    }

    /// Bound on the Lipschitz constant of `eta -> w*(k; (m, eta))`, `m, k <= window`.
    pub fn lip_w(&self, m: usize, k: usize) -> f64 {
        self.lip_w[m][k]
    }

    /// Lipschitz bound of `H(k, .)`.
    pub fn lip_h(&self, k: usize) -> f64 {
        1.0 + self.lip_z[k][k]
    }

    /// Lipschitz bound of `G(k, .)`.
    pub fn lip_g(&self, k: usize) -> f64 {
        1.0 + self.lip_w[k][k]
    }

    pub(crate) fn fp(&self) -> f64 {
        step_rounding(self.pair.dim())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k > self.k_ser() {
            return Err(Error::OutOfHorizon {
                index: k,
                horizon: self.k_ser(),
            });
        }
        Ok(())
    }

    fn check_window(&self, k: usize) -> Result<()> {
        if k > self.policy.window {
            return Err(Error::OutOfHorizon {
                index: k,
                horizon: self.policy.window,
            });
        }
        Ok(())
    }

    /// Rounding allowance for one application of the truncated Green operator
    /// to data whose responses are bounded by `scale`.
    fn green_rounding(&self, scale: f64) -> f64 {
        self.fp() * (self.k_ser() as f64 + 2.0) * self.proj_scale * scale
    }

    /// `x(j, m, xi)` for `j <= K`, with running rounding bounds on top of `xi_err`.
    pub fn linear_orbit(&self, m: usize, xi: &Vector, xi_err: f64) -> Result<(Vec<Vector>, Vec<f64>)> {
        self.check_index(m)?;
        let k = self.k_ser();
        let fp = self.fp();
        let mut x = vec![Vector::zeros(0); k + 1];
        let mut e = vec![0.0; k + 1];
        x[m] = xi.clone();
        e[m] = xi_err;
        for j in m..k {
            let a = self.pair.a_norm(j)?;
            x[j + 1] = self.pair.a(j)?.as_ref() * &x[j];
            e[j + 1] = a * e[j] + fp * a * x[j].norm();
        }
        for j in (0..m).rev() {
            let a = self.pair.a_inv_norm(j)?;
            x[j] = self.pair.a_inv(j)?.as_ref() * &x[j + 1];
            e[j] = a * e[j + 1] + fp * a * x[j + 1].norm();
        }
        Ok((x, e))
    }

    /// Nonlinear orbit `y(j, m, eta)` for `j <= upto`, starting with error `eta_err`.
    pub fn nonlinear_orbit(
        &self,
        m: usize,
        eta: &Vector,
        eta_err: f64,
        upto: usize,
    ) -> Result<(Vec<Vector>, Vec<f64>)> {
        let back = backward_orbit(&self.pair, 0, m, eta, eta_err, self.policy.backward_tol)?;
        let mut y = back.values;
        let mut e = back.errs;
        if upto > m {
            let (fy, fe) = forward_orbit(&self.pair, m, upto, eta, eta_err)?;
            y.extend(fy.into_iter().skip(1));
            e.extend(fe.into_iter().skip(1));
        } else {
            y.truncate(upto + 1);
            e.truncate(upto + 1);
        }
        Ok((y, e))
    }

    /// Solves for `z*(.; (m, xi))` on `[0, K]` by iterating from zero.
    pub fn z_table(&self, m: usize, xi: &Vector) -> Result<ZTable> {
        let k = self.k_ser();
        let (x, x_err) = self.linear_orbit(m, xi, 0.0)?;
        let d = self.pair.dim();
        let q = self.q;
        let target = self.policy.fixed_point_tol * (1.0 - q);
        let mut phi = vec![Vector::zeros(d); k + 1];
        let fp = self.fp();
        // Rounding of the orbit inside f moves entry l of each iterate by up to
        // noise(l); an entry has settled once its change is below the tolerance
        // plus that level, and only changes well above it count towards the
        // measured contraction ratio. The error bound below is entrywise.
        let x_norms = Vector::from_iterator(k + 1, x.iter().map(|v| fp * v.norm()));
        let noise = &self.resolvent.kernel * x_norms;
        let mut delta = vec![0.0; k + 1];
        let mut first = 0.0;
        let mut prev = 0.0;
        let mut prev_excess = f64::INFINITY;
        let mut ratio = 0.0f64;
        let mut iterations = 0;
        loop {
            iterations += 1;
            if iterations > self.policy.max_iters {
                return Err(Error::NoConvergence {
                    context: format!("z* fixed point through (m = {m})"),
                    iterations: self.policy.max_iters,
                });
            }
            let g = (0..=k)
                .map(|j| self.pair.f(j, &(&x[j] + &phi[j])))
                .collect::<Result<Vec<_>>>()?;
            let next = self.green.apply(&g);
            for (dl, (a, b)) in delta.iter_mut().zip(next.iter().zip(&phi)) {
                *dl = (a - b).norm();
            }
            let change = delta.iter().copied().fold(0.0, f64::max);
            if !change.is_finite() {
                return Err(Error::Overflow {
                    index: m,
                    norm: change,
                });
            }
            let level = fp * sup_norm(&next).max(1.0);
            if iterations == 1 {
                first = change;
            } else if prev > 1e3 * level {
                // each entry of the new change is at most q times the whole previous one
                let above = delta
                    .iter()
                    .zip(noise.iter())
                    .filter(|(d, n)| **d > 1e3 * (**n + level))
                    .map(|(d, _)| *d)
                    .fold(0.0, f64::max);
                ratio = ratio.max(above / prev);
            }
            let excess = delta
                .iter()
                .zip(noise.iter())
                .map(|(d, n)| d / (target + n))
                .fold(0.0, f64::max);
            // an excess that stops decreasing is rounding noise, not progress
            let stalled = iterations >= 3 && excess >= prev_excess;
            phi = next;
            prev = change;
            prev_excess = excess;
            // with q = 0 the map is constant, so one application reaches the fixed point
            if q == 0.0 || excess <= 1.0 || stalled {
                break;
            }
        }
        // With rho the rounding defect of one computed application and
        // delta = phi_n - phi_(n-1), the error e = |phi_n - z*| satisfies
        // e <= N e + N delta + rho entrywise, so e <= (I - N)^-1 (N delta + rho).
        // rho collects the propagated orbit error, the rounding of x + phi
        // inside f, the rounding of the Green sums and the discarded tail.
        let green_round = self.green_rounding(self.p + sup_norm(&phi));
        let local: Vec<f64> = (0..=k)
            .map(|j| x_err[j] + fp * (x[j].norm() + phi[j].norm()))
            .collect();
        let kernel = &self.resolvent.kernel;
        let pushed = kernel * Vector::from_iterator(k + 1, local.iter().zip(&delta).map(|(a, b)| a + b));
        let defect: Vec<f64> = (0..=k)
            .map(|l| green_round + self.mu_tail[l] + pushed[l])
            .collect();
        let err = self.resolvent.bound(&defect);
        Ok(ZTable {
            base: m,
            x,
            x_err,
            z: phi,
            err,
            iterations,
            last_change: prev,
            apriori_bound: q.powi(iterations as i32) / (1.0 - q) * first,
            contraction_ratio: ratio,
        })
    }

    /// `w*(.; (m, eta))` on `[0, K]`.
    pub fn w_table(&self, m: usize, eta: &Vector) -> Result<WTable> {
        self.check_index(m)?;
        let k = self.k_ser();
        let (y, y_err) = self.nonlinear_orbit(m, eta, 0.0, k)?;
        let g = (0..=k)
            .map(|j| self.pair.f(j, &y[j]))
            .collect::<Result<Vec<_>>>()?;
        let w: Vec<Vector> = self.green.apply(&g).into_iter().map(|v| -v).collect();
        let round = self.green_rounding(self.p + sup_norm(&w));
        let err = (0..=k)
            .map(|l| {
                let prop: f64 = self
                    .norms
                    .row(l)
                    .iter()
                    .zip(&self.gamma)
                    .zip(&y_err)
                    .map(|((g, c), e)| g * c * e)
                    .sum();
                self.mu_tail[l] + prop + round
            })
            .collect();
        Ok(WTable {
            base: m,
            y,
            y_err,
            w,
            err,
        })
    }

    pub fn z_star(&self, k: usize, m: usize, xi: &Vector) -> Result<ZValue> {
        self.check_index(k)?;
        let t = self.z_table(m, xi)?;
        Ok(ZValue {
            value: t.z[k].clone(),
            err: t.err[k],
            iterations: t.iterations,
            apriori_bound: t.apriori_bound,
            contraction_ratio: t.contraction_ratio,
        })
    }

    pub fn w_star(&self, k: usize, m: usize, eta: &Vector) -> Result<MapValue> {
        self.check_index(k)?;
        let t = self.w_table(m, eta)?;
        Ok(MapValue {
            value: t.w[k].clone(),
            err: t.err[k],
        })
    }

    /// `H(k, xi) = xi + z*(k; (k, xi))`.
    pub fn h_map(&self, k: usize, xi: &Vector) -> Result<MapValue> {
        let t = self.z_table(k, xi)?;
        Ok(self.h_from(&t, k, xi))
    }

    pub(crate) fn h_from(&self, t: &ZTable, k: usize, xi: &Vector) -> MapValue {
        let value = xi + &t.z[k];
        let err = t.err[k] + self.fp() * (xi.norm() + t.z[k].norm());
        MapValue { value, err }
    }

    /// `G(k, eta) = eta + w*(k; (k, eta))`.
    pub fn g_map(&self, k: usize, eta: &Vector) -> Result<GValue> {
        let t = self.w_table(k, eta)?;
        let g = self.g_from(&t, k, eta);
        let alternative = linear_solution(&self.pair, k, 0, &(&t.y[0] + &t.w[0]))?;
        let discrepancy = (&alternative - &g.value).norm();
        Ok(GValue {
            value: g.value,
            err: g.err,
            alternative,
            discrepancy,
        })
    }

    pub(crate) fn g_from(&self, t: &WTable, k: usize, eta: &Vector) -> MapValue {
        let value = eta + &t.w[k];
        let err = t.err[k] + self.fp() * (eta.norm() + t.w[k].norm());
        MapValue { value, err }
    }
}

#[cfg(test)]
mod tests;
