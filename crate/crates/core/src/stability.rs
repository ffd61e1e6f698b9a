//! Equilibria of the perturbed system in the contraction case, and checks
//! that the conjugacy maps carry them where they should: `H(k, 0) -> y*`,
//! `G(k, y*) = Phi(k, 0) y*`, with a Gronwall-type majorant for the rate.

use serde::Serialize;

use crate::algebra::{Matrix, Vector};
use crate::conjugacy::{ConjugacyPair, Sample};
use crate::error::{Error, Result};
use crate::trajectories::{step_rounding, SystemPair};

/// Agreement required between multistart solutions to call the equilibrium unique.
pub const UNIQUENESS_TOL: f64 = 1e-8;
/// Decay factor the probe asks of every sampled deviation by the end of the horizon.
pub const DECAY_FACTOR: f64 = 0.1;

const STARTS: usize = 8;
const MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumMethod {
    /// Plain iteration of `y -> A(0) y + f(0, y)`, a contraction.
    FixedPoint,
    /// Damped Newton on `y - A(0) y - f(0, y)` over the sampling box.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub y_star: Vec<f64>,
    /// `max_n |y* - A(n) y* - f(n, y*)|` over the certificate grid.
    pub residual: f64,
    pub unique_flag: bool,
    /// `rho(0) |y*| h(k) prod_{j<k} (1 + gamma(j) rho(j+1) h(j) / h(j+1))`.
    pub rate_bound: Vec<f64>,
    pub method: EquilibriumMethod,
    /// Solutions reached from each start (`None` where the start failed).
    pub solutions: Vec<Option<Vec<f64>>>,
}

impl EquilibriumResult {
    pub fn y(&self) -> Vector {
        Vector::from_column_slice(&self.y_star)
    }
}

fn starts(d: usize, radius: f64) -> Vec<Vector> {
    // origin plus a low-discrepancy spread over the box
    (0..STARTS)
        .map(|i| {
            Vector::from_fn(d, |c, _| {
                if i == 0 {
                    0.0
                } else {
                    let t = (i as f64 * 0.618_033_988_749_895 + c as f64 * 0.414_213_562_373_095).fract();
                    radius * (2.0 * t - 1.0)
                }
            })
        })
        .collect()
}

fn stationary_residual(pair: &SystemPair, n: usize, y: &Vector) -> Result<f64> {
    let fy = pair.f(n, y)?;
    Ok((y - pair.a(n)?.as_ref() * y - fy).norm())
}

fn fixed_point_solve(pair: &SystemPair, start: &Vector, tol: f64) -> Result<Option<Vector>> {
    let a = pair.a(0)?.into_owned();
    let mut y = start.clone();
    for _ in 0..MAX_STEPS {
        let next = &a * &y + pair.f(0, &y)?;
        let change = (&next - &y).norm();
        y = next;
        if change <= tol {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

fn newton_solve(pair: &SystemPair, start: &Vector, tol: f64, radius: f64) -> Result<Option<Vector>> {
    let d = pair.dim();
    let a = pair.a(0)?.into_owned();
    let id = Matrix::identity(d, d);
    let residual = |y: &Vector| -> Result<Vector> { Ok(y - &a * y - pair.f(0, y)?) };
    let mut y = start.clone();
    let mut r = residual(&y)?;
    for _ in 0..200 {
        if r.norm() <= tol {
            return Ok(Some(y));
        }
        let jac = &id - &a - pair.spec().perturbation.f.jacobian(0, &y)?;
        let Some(step) = jac.lu().solve(&(-&r)) else {
            return Ok(None);
        };
        let mut alpha = 1.0;
        loop {
            let trial = &y + alpha * &step;
            let rt = residual(&trial)?;
            if rt.norm() < r.norm() {
                y = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                // no descent: either converged to rounding level or stuck
                return Ok((r.norm() <= tol.max(1e3 * f64::EPSILON * y.norm())).then_some(y));
            }
        }
        if y.amax() > 2.0 * radius {
            return Ok(None);
        }
    }
    Ok((r.norm() <= tol).then_some(y))
}

/// Finds the equilibrium of the perturbed system from several starts and
/// checks that it is fixed at every index of the certificate grid.
pub fn find_equilibrium(pair: &SystemPair, tol: f64) -> Result<EquilibriumResult> {
    let cert = pair.certificate();
    if !cert.contraction_case {
        return Err(Error::NotContractionCase);
    }
    if !cert.contraction_hypotheses_hold() {
        return Err(Error::Uncertified(format!(
            "hypotheses failing: {}",
            cert.failures().join(", ")
        )));
    }
    let rates = &pair.spec().rates;
    let radius = pair.spec().perturbation.sample_box;
    let contraction = rates.rho(0)? * rates.h(1)? + cert.q;
    let method = if contraction < 1.0 {
        EquilibriumMethod::FixedPoint
    } else {
        EquilibriumMethod::Newton
    };
    let mut solutions = Vec::with_capacity(STARTS);
    for s in starts(pair.dim(), radius) {
        let sol = match method {
            EquilibriumMethod::FixedPoint => fixed_point_solve(pair, &s, tol)?,
            EquilibriumMethod::Newton => newton_solve(pair, &s, tol, radius)?,
        };
        solutions.push(sol);
    }
    let mut best: Option<(Vector, f64)> = None;
    for sol in solutions.iter().flatten() {
        let r = stationary_residual(pair, 0, sol)?;
        if best.as_ref().is_none_or(|(_, rb)| r < *rb) {
            best = Some((sol.clone(), r));
        }
    }
    let Some((y, r0)) = best else {
        return Err(Error::NoEquilibrium {
            residual: f64::INFINITY,
        });
    };
    let floor = tol.max(step_rounding(pair.dim()) * (1.0 + y.norm()));
    if r0 > floor {
        return Err(Error::NoEquilibrium { residual: r0 });
    }
    let mut residual = r0;
    for n in 1..=cert.horizon {
        let r = stationary_residual(pair, n, &y)?;
        if r > floor {
            return Err(Error::NotStationary { index: n, residual: r });
        }
        residual = residual.max(r);
    }
    let unique_flag = solutions
        .iter()
        .all(|s| s.as_ref().is_some_and(|s| (s - &y).norm() <= UNIQUENESS_TOL));
    let scale = rates.rho(0)? * y.norm();
    let rate_bound = cert.s4.s.iter().map(|s| scale * s).collect();
    log::info!(
        "equilibrium {:?} via {method:?}, residual {residual:.3e}, unique = {unique_flag}",
        y.as_slice()
    );
    Ok(EquilibriumResult {
        y_star: y.as_slice().to_vec(),
        residual,
        unique_flag,
        rate_bound,
        method,
        solutions: solutions
            .into_iter()
            .map(|s| s.map(|v| v.as_slice().to_vec()))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub k: usize,
    /// `|H(k, 0) - y*|`
    pub h_k0_dev: f64,
    pub h_err: f64,
    /// Gronwall majorant for `h_k0_dev`.
    pub majorant: f64,
    /// `|G(k, y*)|`
    pub g_kystar_norm: f64,
    pub g_err: f64,
    /// `rho(0) h(k) |y*|`
    pub rho0_h_bound: f64,
    /// `|G(k, y*) - Phi(k, 0) y*|`
    pub g_linear_dev: f64,
}

impl StabilityRow {
    pub fn within_bounds(&self) -> bool {
        self.h_k0_dev <= self.majorant + self.h_err
            && self.g_kystar_norm <= self.rho0_h_bound + self.g_err
            && self.g_linear_dev <= self.g_err
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub y_star: Vec<f64>,
    pub rows: Vec<StabilityRow>,
    pub all_within_bounds: bool,
    /// `|H(horizon, 0) - y*| < majorant(horizon)` and the majorant shrinks on the last quarter.
    pub consistent_limit: bool,
}

/// Compares `H(k, 0)` and `G(k, y*)` with their predicted values for `k <= horizon`.
pub fn verify_stability_preservation(
    cp: &ConjugacyPair,
    eq: &EquilibriumResult,
    horizon: usize,
) -> Result<StabilityReport> {
    let pair = cp.pair();
    let rates = &pair.spec().rates;
    if horizon >= eq.rate_bound.len() {
        return Err(Error::OutOfHorizon {
            index: horizon,
            horizon: eq.rate_bound.len() - 1,
        });
    }
    let y = eq.y();
    let zero = Vector::zeros(pair.dim());
    let fp = step_rounding(pair.dim());
    let mut rows = Vec::with_capacity(horizon + 1);
    let mut phi_y = y.clone();
    for k in 0..=horizon {
        if k > 0 {
            phi_y = pair.a(k - 1)?.as_ref() * &phi_y;
        }
        let h = cp.h_map(k, &zero)?;
        let g = cp.g_map(k, &y)?;
        let h_k0_dev = (&h.value - &y).norm();
        let g_norm = g.value.norm();
        rows.push(StabilityRow {
            k,
            h_k0_dev,
            h_err: h.err + fp * (h.value.norm() + y.norm()),
            majorant: eq.rate_bound[k],
            g_kystar_norm: g_norm,
            g_err: g.err + fp * (k as f64 + 2.0) * (g_norm + phi_y.norm()),
            rho0_h_bound: rates.rho(0)? * rates.h(k)? * y.norm(),
            g_linear_dev: (&g.value - &phi_y).norm(),
        });
    }
    let all_within_bounds = rows.iter().all(StabilityRow::within_bounds);
    let last = &rows[horizon];
    let tail = horizon - horizon / 4;
    let consistent_limit = last.h_k0_dev <= last.majorant + last.h_err
        && eq.rate_bound[tail..=horizon].windows(2).all(|w| w[1] <= w[0]);
    Ok(StabilityReport {
        y_star: eq.y_star.clone(),
        rows,
        all_within_bounds,
        consistent_limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub sample: usize,
    pub j: usize,
    pub k: usize,
    /// `|y(k, j, eta) - y*|`
    pub dev: f64,
    /// `max_{i >= k} dev(i)` over the horizon.
    pub envelope: f64,
    /// `|H(k, x(k, j, xi)) - H(k, 0)| + |H(k, 0) - y*|` with `xi = G(j, eta)`.
    pub split_bound: f64,
    pub split_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// First `k` at which each sample's envelope is below `DECAY_FACTOR` times its initial deviation.
    pub decay_index: Vec<Option<usize>>,
    pub all_decay: bool,
    pub split_holds: bool,
}

/// Follows perturbed orbits from sampled `(j, eta)` and measures their approach to `y*`.
pub fn asymptotic_stability_probe(
    cp: &ConjugacyPair,
    eq: &EquilibriumResult,
    samples: &[Sample],
    horizon: usize,
) -> Result<ProbeReport> {
    if horizon > cp.policy().window {
        return Err(Error::OutOfHorizon {
            index: horizon,
            horizon: cp.policy().window,
        });
    }
    let y_star = eq.y();
    let fp = step_rounding(cp.pair().dim());
    let zero = Vector::zeros(cp.pair().dim());
    let h0 = (0..=horizon)
        .map(|k| cp.h_map(k, &zero))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut decay_index = Vec::with_capacity(samples.len());
    let mut split_holds = true;
    for (s, sample) in samples.iter().enumerate() {
        let j = sample.m;
        if j > horizon {
            return Err(Error::OutOfHorizon { index: j, horizon });
        }
        let (y, y_err) = cp.nonlinear_orbit(j, &sample.u, 0.0, horizon)?;
        let g = cp.g_map(j, &sample.u)?;
        let (x, x_err) = cp.linear_orbit(j, &g.value, g.err)?;
        let devs: Vec<f64> = (j..=horizon).map(|k| (&y[k] - &y_star).norm()).collect();
        let mut envelope = devs.clone();
        for i in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        let initial = devs[0];
        decay_index.push(
            envelope
                .iter()
                .position(|e| *e <= DECAY_FACTOR * initial)
                .map(|i| i + j),
        );
        for k in j..=horizon {
            let t = cp.z_table(k, &x[k])?;
            let hx = &x[k] + &t.z[k];
            let hx_err = t.err[k] + cp.lip_z(k, k) * x_err[k] + fp * (x[k].norm() + t.z[k].norm());
            let split_bound = (&hx - &h0[k].value).norm() + (&h0[k].value - &y_star).norm();
            let split_err = hx_err + 2.0 * h0[k].err + y_err[k] + fp * (hx.norm() + y_star.norm());
            let dev = devs[k - j];
            split_holds &= dev <= split_bound + split_err;
            rows.push(ProbeRow {
                sample: s,
                j,
                k,
                dev,
                envelope: envelope[k - j],
                split_bound,
                split_err,
            });
        }
    }
    let all_decay = decay_index.iter().all(Option::is_some);
    Ok(ProbeReport {
        rows,
        decay_index,
        all_decay,
        split_holds,
    })
}
