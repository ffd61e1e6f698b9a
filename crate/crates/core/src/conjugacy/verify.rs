use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ConjugacyPair, WTable, ZTable};
use crate::algebra::Vector;
use crate::error::{Error, Result};

/// A base time and a point, used both as `xi` (linear side) and `eta` (nonlinear side).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub m: usize,
    pub u: Vector,
}

/// `count` samples with `m` uniform in `[0, max_m]` and `u` uniform in the box `[-radius, radius]^d`.
pub fn draw_samples(count: usize, seed: u64, max_m: usize, radius: f64, dim: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(0..=max_m);
            let u = Vector::from_fn(dim, |_, _| rng.random_range(-radius..=radius));
            Sample { m, u }
        })
        .collect()
}

/// Residuals of the conjugacy relations at one `(sample, k)`, each with its budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyRow {
    pub sample: usize,
    pub m: usize,
    pub k: usize,
    /// `|H(k, x(k,m,u)) - y(k, m, H(m,u))|`
    pub res_h: f64,
    pub budget_h: f64,
    /// `|G(k, y(k,m,u)) - Phi(k,m) G(m,u)|`
    pub res_g: f64,
    pub budget_g: f64,
    /// `|H(k, G(k,u)) - u|`
    pub res_hg: f64,
    pub budget_hg: f64,
    /// `|G(k, H(k,u)) - u|`
    pub res_gh: f64,
    pub budget_gh: f64,
}

impl ConjugacyRow {
    pub fn within_budget(&self) -> bool {
        self.res_h <= self.budget_h
            && self.res_g <= self.budget_g
            && self.res_hg <= self.budget_hg
            && self.res_gh <= self.budget_gh
    }
}

/// Residuals of the identities between `w*` and `z*` at one `(sample, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub sample: usize,
    pub m: usize,
    pub k: usize,
    /// `|w*(k; (m,u)) + z*(k; (m, G(m,u)))|`
    pub res_wz: f64,
    pub budget_wz: f64,
    /// `|z*(k; (m,u)) + w*(k; (m, H(m,u)))|`
    pub res_zw: f64,
    pub budget_zw: f64,
    /// `|G(k,u) - u + z*(k; (k, G(k,u)))|`
    pub res_g_fixed: f64,
    pub budget_g_fixed: f64,
    /// `|H(k,u) - u + w*(k; (k, H(k,u)))|`
    pub res_h_fixed: f64,
    pub budget_h_fixed: f64,
    /// `|z*(k; (m,u)) - z*(k; (k, x(k,m,u)))|`
    pub res_flow: f64,
    pub budget_flow: f64,
}

impl IdentityRow {
    pub fn within_budget(&self) -> bool {
        self.res_wz <= self.budget_wz
            && self.res_zw <= self.budget_zw
            && self.res_g_fixed <= self.budget_g_fixed
            && self.res_h_fixed <= self.budget_h_fixed
            && self.res_flow <= self.budget_flow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyReport {
    pub rows: Vec<ConjugacyRow>,
    pub max_res_h: f64,
    pub max_res_g: f64,
    pub max_res_hg: f64,
    pub max_res_gh: f64,
    pub all_within_budget: bool,
    /// Largest ratio of successive fixed-point changes seen in any solve.
    pub max_contraction_ratio: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
    pub max_res_wz: f64,
    pub max_res_zw: f64,
    pub max_res_fixed: f64,
    pub max_res_flow: f64,
    pub all_within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub conjugacy: ConjugacyReport,
    pub identities: IdentityReport,
}

#[derive(Default)]
struct SolveStats {
    ratio: f64,
    iterations: usize,
}

impl SolveStats {
    fn z(&mut self, cp: &ConjugacyPair, m: usize, xi: &Vector) -> Result<ZTable> {
        let t = cp.z_table(m, xi)?;
        self.ratio = self.ratio.max(t.contraction_ratio);
        self.iterations = self.iterations.max(t.iterations);
        Ok(t)
    }
}

fn max_of<T>(rows: &[T], f: impl Fn(&T) -> f64) -> f64 {
    rows.iter().map(f).fold(0.0, f64::max)
}

/// Evaluates every conjugacy relation and identity for each sample and each `k <= window`.
pub fn verify_all(cp: &ConjugacyPair, samples: &[Sample], window: usize) -> Result<Verification> {
    cp.check_window(window)?;
    let fp = cp.fp();
    let mut stats = SolveStats::default();
    let mut conj = Vec::new();
    let mut ident = Vec::new();
    for (s, sample) in samples.iter().enumerate() {
        let (m, u) = (sample.m, &sample.u);
        if m > window {
            return Err(Error::OutOfHorizon {
                index: m,
                horizon: window,
            });
        }
        // data anchored at m
        let zt_m = stats.z(cp, m, u)?;
        let wt_m: WTable = cp.w_table(m, u)?;
        let h_m = cp.h_from(&zt_m, m, u);
        let g_m = cp.g_from(&wt_m, m, u);
        let (y_h, y_h_err) = cp.nonlinear_orbit(m, &h_m.value, h_m.err, window)?;
        let (x_g, x_g_err) = cp.linear_orbit(m, &g_m.value, g_m.err)?;
        let zt_g = stats.z(cp, m, &g_m.value)?;
        let wt_h = cp.w_table(m, &h_m.value)?;

        for k in 0..=window {
            let x_k = &zt_m.x[k];
            let y_k = &wt_m.y[k];

            // H along the linear orbit vs the nonlinear orbit through H(m,u)
            let zt_xk = stats.z(cp, k, x_k)?;
            let h_xk = cp.h_from(&zt_xk, k, x_k);
            let res_h = (&h_xk.value - &y_h[k]).norm();
            let budget_h = h_xk.err + cp.lip_h(k) * zt_m.x_err[k] + y_h_err[k] + fp * y_h[k].norm();

            // G along the nonlinear orbit vs the linear orbit through G(m,u)
            let wt_yk = cp.w_table(k, y_k)?;
            let g_yk = cp.g_from(&wt_yk, k, y_k);
            let res_g = (&g_yk.value - &x_g[k]).norm();
            let budget_g = g_yk.err + cp.lip_g(k) * wt_m.y_err[k] + x_g_err[k] + fp * x_g[k].norm();

            // H o G and G o H at time k
            let wt_ku = cp.w_table(k, u)?;
            let g_ku = cp.g_from(&wt_ku, k, u);
            let zt_g_ku = stats.z(cp, k, &g_ku.value)?;
            let hg = cp.h_from(&zt_g_ku, k, &g_ku.value);
            let res_hg = (&hg.value - u).norm();
            let budget_hg = hg.err + cp.lip_h(k) * g_ku.err + fp * u.norm();

            let zt_ku = stats.z(cp, k, u)?;
            let h_ku = cp.h_from(&zt_ku, k, u);
            let wt_h_ku = cp.w_table(k, &h_ku.value)?;
            let gh = cp.g_from(&wt_h_ku, k, &h_ku.value);
            let res_gh = (&gh.value - u).norm();
            let budget_gh = gh.err + cp.lip_g(k) * h_ku.err + fp * u.norm();

            conj.push(ConjugacyRow {
                sample: s,
                m,
                k,
                res_h,
                budget_h,
                res_g,
                budget_g,
                res_hg,
                budget_hg,
                res_gh,
                budget_gh,
            });

            let sum_round = |a: &Vector, b: &Vector| fp * (a.norm() + b.norm());
            let res_wz = (&wt_m.w[k] + &zt_g.z[k]).norm();
            let budget_wz = wt_m.err[k]
                + zt_g.err[k]
                + cp.lip_z(m, k) * g_m.err
                + sum_round(&wt_m.w[k], &zt_g.z[k]);
            let res_zw = (&zt_m.z[k] + &wt_h.w[k]).norm();
            let budget_zw = zt_m.err[k]
                + wt_h.err[k]
                + cp.lip_w(m, k) * h_m.err
                + sum_round(&zt_m.z[k], &wt_h.w[k]);
            let res_g_fixed = (&g_ku.value - u + &zt_g_ku.z[k]).norm();
            let budget_g_fixed = zt_g_ku.err[k]
                + cp.lip_z(k, k) * g_ku.err
                + g_ku.err
                + fp * (g_ku.value.norm() + u.norm() + zt_g_ku.z[k].norm());
            let res_h_fixed = (&h_ku.value - u + &wt_h_ku.w[k]).norm();
            let budget_h_fixed = wt_h_ku.err[k]
                + cp.lip_w(k, k) * h_ku.err
                + h_ku.err
                + fp * (h_ku.value.norm() + u.norm() + wt_h_ku.w[k].norm());
            let res_flow = (&zt_m.z[k] - &zt_xk.z[k]).norm();
            let budget_flow = zt_m.err[k]
                + zt_xk.err[k]
                + cp.lip_z(k, k) * zt_m.x_err[k]
                + sum_round(&zt_m.z[k], &zt_xk.z[k]);
            ident.push(IdentityRow {
                sample: s,
                m,
                k,
                res_wz,
                budget_wz,
                res_zw,
                budget_zw,
                res_g_fixed,
                budget_g_fixed,
                res_h_fixed,
                budget_h_fixed,
                res_flow,
                budget_flow,
            });
        }
    }
    let conjugacy = ConjugacyReport {
        max_res_h: max_of(&conj, |r| r.res_h),
        max_res_g: max_of(&conj, |r| r.res_g),
        max_res_hg: max_of(&conj, |r| r.res_hg),
        max_res_gh: max_of(&conj, |r| r.res_gh),
        all_within_budget: conj.iter().all(ConjugacyRow::within_budget),
        max_contraction_ratio: stats.ratio,
        max_iterations: stats.iterations,
        rows: conj,
    };
    let identities = IdentityReport {
        max_res_wz: max_of(&ident, |r| r.res_wz),
        max_res_zw: max_of(&ident, |r| r.res_zw),
        max_res_fixed: max_of(&ident, |r| r.res_g_fixed.max(r.res_h_fixed)),
        max_res_flow: max_of(&ident, |r| r.res_flow),
        all_within_budget: ident.iter().all(IdentityRow::within_budget),
        rows: ident,
    };
    log::info!(
        "verified {} samples on [0, {window}]: conjugacy max residual {:.3e}, identities max residual {:.3e}",
        samples.len(),
        conjugacy.max_res_h.max(conjugacy.max_res_g),
        identities.max_res_wz.max(identities.max_res_zw)
    );
    Ok(Verification {
        conjugacy,
        identities,
    })
}

pub fn verify_conjugacy(cp: &ConjugacyPair, samples: &[Sample], window: usize) -> Result<ConjugacyReport> {
    Ok(verify_all(cp, samples, window)?.conjugacy)
}

pub fn verify_identities(cp: &ConjugacyPair, samples: &[Sample], window: usize) -> Result<IdentityReport> {
    Ok(verify_all(cp, samples, window)?.identities)
}
