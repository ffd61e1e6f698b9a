//! Certification of the dichotomy and perturbation hypotheses on a finite grid,
//! the series constants `p`, `q`, and the Lipschitz / Gronwall diagnostics.
//!
//! Everything here is finite-horizon: the certificate records the grid it was
//! checked on and the series horizon used for `p` and `q`, whose tails are
//! bounded by closed-form envelopes of the declared rate and weight families.

mod certify;
mod perturbation;
mod rates;

pub use certify::{
    backward_lipschitz_product, certify_p1, certify_p2, certify_p6, certify_s4,
    check_unstable_step, forward_gronwall_product, forward_lipschitz_product, series_constant,
    series_table, tail_envelope, BackwardContraction, DecayTrend, DichotomyCertificate,
    GrowthBound, HypothesisStatus, KernelNorms, SeriesBound, SeriesValue, P2_TOL, PROJECTOR_TOL,
};
pub use perturbation::{Activation, Component, Perturbation, PerturbationSpec, SampleReport, Term};
pub use rates::{DecayProfile, RatePair, RhoProfile, WeightSeq};

use crate::algebra::{MatrixSequence, ProjectorFamily, ProjectorPair, TransitionCache};
use crate::error::{Error, Result};

/// Everything that describes a linear system and its perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub linear: MatrixSequence,
    pub projector: ProjectorFamily,
    pub rates: RatePair,
    pub perturbation: PerturbationSpec,
}

impl SystemSpec {
    pub fn new(
        linear: MatrixSequence,
        projector: ProjectorFamily,
        rates: RatePair,
        perturbation: PerturbationSpec,
    ) -> Result<Self> {
        if perturbation.dim() != linear.dim() {
            return Err(Error::DimensionMismatch {
                expected: linear.dim(),
                found: perturbation.dim(),
            });
        }
        Ok(SystemSpec {
            linear,
            projector,
            rates,
            perturbation,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    /// FNV-1a hash of the full description; ties certificates to systems.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "{:?}|{:?}|{:?}|{:?}",
            self.linear, self.projector, self.rates, self.perturbation
        );
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Grid sizes and sampling for a certification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Grid for the dichotomy inequalities; raised to `series_horizon + 1` if smaller.
    pub horizon: usize,
    pub series_horizon: usize,
    /// Number of random points for the Lipschitz / bound spot-checks.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            horizon: 60,
            series_horizon: 60,
            samples: 1000,
            seed: 0,
        }
    }
}

/// A certificate together with the tables it was computed from.
#[derive(Debug, Clone)]
pub struct Certified {
    pub cache: TransitionCache,
    pub projectors: ProjectorPair,
    pub certificate: DichotomyCertificate,
}

/// Runs every check on `[0, max(horizon, series_horizon + 1)]`.
pub fn certify(spec: &SystemSpec, opts: &CertifyOptions) -> Result<Certified> {
    let k_ser = opts.series_horizon;
    let n = opts.horizon.max(k_ser + 1);
    let cache = TransitionCache::new(&spec.linear, n)?;
    let projectors = ProjectorPair::build(spec.projector.clone(), &cache)?;
    let projector = projectors.check(&cache)?;
    let contraction = projectors.is_contraction_case();

    let p1 = certify_p1(&spec.linear, n)?;
    let p2 = certify_p2(&cache, &projectors, &spec.rates, n)?;
    let samples = spec.perturbation.check_samples(n, opts.samples, opts.seed)?;
    let p3 = HypothesisStatus {
        holds: samples.lipschitz.holds && samples.bound.holds,
        worst_violation: samples
            .lipschitz
            .worst_violation
            .max(samples.bound.worst_violation),
        witness: if samples.lipschitz.worst_violation >= samples.bound.worst_violation {
            samples.lipschitz.witness
        } else {
            samples.bound.witness
        },
    };

    let norms = KernelNorms::new(&cache, &projectors, k_ser + 1, k_ser)?;
    let pert = &spec.perturbation;
    let n_mu = series_table(&norms, &spec.rates, &pert.mu, contraction)?;
    let n_gamma = series_table(&norms, &spec.rates, &pert.gamma, contraction)?;
    let p = n_mu.sup;
    let q = n_gamma.sup;
    let p4 = HypothesisStatus {
        holds: p.is_finite(),
        worst_violation: if p.is_finite() { -1.0 } else { f64::INFINITY },
        witness: Some(vec![n_mu.argmax]),
    };
    let p5 = HypothesisStatus {
        holds: q < 1.0,
        worst_violation: q - 1.0,
        witness: Some(vec![n_gamma.argmax]),
    };
    let b = certify_p6(&spec.linear, pert, n)?;
    let p6 = HypothesisStatus {
        holds: b.holds,
        worst_violation: -b.margin,
        witness: Some(vec![b.witness]),
    };
    let unstable_step = check_unstable_step(&cache, &projectors, &pert.gamma, q, k_ser)?;
    let s4 = certify_s4(&spec.rates, pert, n)?;

    let sum = |s: &SeriesBound| -> Vec<f64> {
        s.values.iter().zip(&s.tails).map(|(v, t)| v + t).collect()
    };
    let certificate = DichotomyCertificate {
        fingerprint: spec.fingerprint(),
        horizon: n,
        series_horizon: k_ser,
        growth_constant: p1.m,
        contraction_case: contraction,
        projector_holds: projector.holds(PROJECTOR_TOL),
        projector,
        p,
        q,
        p_tail: n_mu.tails.iter().copied().fold(0.0, f64::max),
        q_tail: n_gamma.tails.iter().copied().fold(0.0, f64::max),
        p6_margin: b.margin,
        p1: HypothesisStatus {
            holds: p1.holds,
            worst_violation: if p1.holds { -1.0 } else { f64::INFINITY },
            witness: None,
        },
        p2,
        p3,
        p4,
        p5,
        p6,
        unstable_step,
        s4,
        n_mu: sum(&n_mu),
        n_gamma: sum(&n_gamma),
    };
    log::info!(
        "certified on [0, {n}]: M = {}, p = {p:.6e}, q = {q:.6e}, P6 margin = {:.6}",
        certificate.growth_constant,
        certificate.p6_margin
    );
    Ok(Certified {
        cache,
        projectors,
        certificate,
    })
}

#[cfg(test)]
mod tests;
