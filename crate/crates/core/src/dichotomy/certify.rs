use serde::Serialize;

use crate::algebra::{op_norm, Matrix, MatrixSequence, ProjectorPair, ProjectorReport, TransitionCache};
use crate::dichotomy::perturbation::PerturbationSpec;
use crate::dichotomy::rates::{DecayProfile, RatePair, WeightSeq};
use crate::error::{Error, Result};

/// Outcome of one hypothesis check.
///
/// `worst_violation` is the largest `lhs / rhs - 1` seen (non-positive when the
/// inequality holds everywhere); `witness` holds the indices where it occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisStatus {
    pub holds: bool,
    pub worst_violation: f64,
    pub witness: Option<Vec<usize>>,
}

impl HypothesisStatus {
    pub fn pass(worst_violation: f64) -> Self {
        HypothesisStatus {
            holds: true,
            worst_violation,
            witness: None,
        }
    }

    fn from_ratio(holds: bool, worst_violation: f64, witness: Vec<usize>) -> Self {
        HypothesisStatus {
            holds,
            worst_violation,
            witness: Some(witness),
        }
    }
}

/// Tolerance on `lhs / rhs - 1` for the dichotomy inequalities on the grid.
pub const P2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBound {
    pub m: f64,
    pub holds: bool,
}

/// Growth constant `M = max(sup |A(k)|, sup |A(k)^-1|)` over `k <= horizon`, at least 1.
pub fn certify_p1(seq: &MatrixSequence, horizon: usize) -> Result<GrowthBound> {
    let m = seq.growth_constant(horizon)?;
    Ok(GrowthBound {
        m,
        holds: m.is_finite(),
    })
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs - 1.0
    } else if lhs == 0.0 {
        -1.0
    } else {
        f64::INFINITY
    }
}

/// Checks `|Phi(k,n) P(n)| <= rho(n) h(k)/h(n)` for `k >= n` and
/// `|Phi(k,n) Q(n)| <= rho(n) h(n)/h(k)` for `k <= n` on `[0, horizon]^2`.
pub fn certify_p2(
    cache: &TransitionCache,
    proj: &ProjectorPair,
    rates: &RatePair,
    horizon: usize,
) -> Result<HypothesisStatus> {
    let h = rates.h_table(horizon)?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = vec![0, 0];
    for n in 0..=horizon {
        let rho = rates.rho(n)?;
        for k in 0..=horizon {
            let phi = cache.transition(k, n)?;
            let mut check = |lhs: f64, rhs: f64| {
                let r = ratio(lhs, rhs);
                if r > worst {
                    worst = r;
                    witness = vec![k, n];
                }
            };
            if k >= n {
                check(op_norm(&(&phi * proj.p(n)?)), rho * h[k] / h[n]);
            }
            if k <= n {
                check(op_norm(&(&phi * proj.q(n)?)), rho * h[n] / h[k]);
            }
        }
    }
    Ok(HypothesisStatus::from_ratio(worst <= P2_TOL, worst, witness))
}

/// Table of kernel norms `|G(l, j+1)|` for `l <= rows - 1`, `j <= series_horizon`.
#[derive(Debug, Clone)]
pub struct KernelNorms {
    series_horizon: usize,
    rows: usize,
    data: Vec<f64>,
}

impl KernelNorms {
    /// Needs the cache and projectors on `[0, series_horizon + 1]`.
    pub fn new(
        cache: &TransitionCache,
        proj: &ProjectorPair,
        rows: usize,
        series_horizon: usize,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * (series_horizon + 1));
        for l in 0..rows {
            for j in 0..=series_horizon {
                let n = j + 1;
                let g: Matrix = if l >= n {
                    cache.transition(l, n)? * proj.p(n)?
                } else if proj.is_contraction_case() {
                    Matrix::zeros(cache.dim(), cache.dim())
                } else {
                    cache.transition(l, n)? * proj.q(n)?
                };
                data.push(op_norm(&g));
            }
        }
        Ok(KernelNorms {
            series_horizon,
            rows,
            data,
        })
    }

    pub fn series_horizon(&self) -> usize {
        self.series_horizon
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `|G(l, j+1)|`.
    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.data[l * (self.series_horizon + 1) + j]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let w = self.series_horizon + 1;
        &self.data[l * w..(l + 1) * w]
    }

    /// `sum_{j <= K} |G(l, j+1)| w(j)`.
    pub fn weighted_sum(&self, l: usize, w: &[f64]) -> f64 {
        self.row(l).iter().zip(w).map(|(g, w)| g * w).sum()
    }
}

/// Truncated series `N(l, w)` with certified tail bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesBound {
    /// `sum_{j <= K} |G(l, j+1)| w(j)` per `l`.
    pub values: Vec<f64>,
    /// Upper bound on `sum_{j > K} |G(l, j+1)| w(j)` per `l`.
    pub tails: Vec<f64>,
    /// `max_l (value + tail)`.
    pub sup: f64,
    /// Index attaining `sup`.
    pub argmax: usize,
}

/// Upper bound on `sum_{j > K} |G(l, j+1)| w(j)` from the declared families.
///
/// Past the series horizon only the unstable part of the kernel contributes,
/// and `|Phi(l, j+1) Q(j+1)| <= rho(j+1) h(j+1)/h(l)`. Whichever of the
/// following envelopes apply, the smallest is returned:
/// a summable weight with `h(j+1) <= h(K+1)`; a geometric `h` with a bounded
/// weight; a generalized profile with a declared positive minorant of `u`.
pub fn tail_envelope(
    rates: &RatePair,
    weight: &WeightSeq,
    contraction: bool,
    series_horizon: usize,
    l: usize,
    h: &[f64],
) -> Result<f64> {
    if contraction {
        return Ok(0.0);
    }
    let k = series_horizon;
    let rho = rates.rho_sup();
    let h_ratio = h[k + 1] / h[l];
    let mut best: Option<f64> = None;
    let mut offer = |v: f64| best = Some(best.map_or(v, |b: f64| b.min(v)));
    if let Some(s) = weight.sum_from(k + 1) {
        offer(rho * h_ratio * s);
    }
    if let Some(w) = weight.sup_from(k + 1) {
        match rates.decay() {
            DecayProfile::Geometric(t) => {
                offer(rho * w * t.powi((k + 2 - l) as i32) / (1.0 - t));
            }
            DecayProfile::GeneralizedExp { u_min: Some(m), .. } => {
                let e = (-m).exp();
                offer(rho * w * h_ratio * e / (1.0 - e));
            }
            _ => {}
        }
    }
    best.ok_or_else(|| {
        Error::TailNotSummable(format!(
            "weight {weight:?} with decay {:?} past index {k}",
            rates.decay()
        ))
    })
}

/// `N(l, w)` for every `l <= rows - 1` from a precomputed kernel-norm table.
pub fn series_table(
    norms: &KernelNorms,
    rates: &RatePair,
    weight: &WeightSeq,
    contraction: bool,
) -> Result<SeriesBound> {
    let k = norms.series_horizon();
    let w = weight.table(k)?;
    let h = rates.h_table(k + 1)?;
    let mut values = Vec::with_capacity(norms.rows());
    let mut tails = Vec::with_capacity(norms.rows());
    let (mut sup, mut argmax) = (0.0f64, 0);
    for l in 0..norms.rows() {
        let v = norms.weighted_sum(l, &w);
        let t = tail_envelope(rates, weight, contraction, k, l, &h)?;
        if v + t > sup {
            sup = v + t;
            argmax = l;
        }
        values.push(v);
        tails.push(t);
    }
    Ok(SeriesBound {
        values,
        tails,
        sup,
        argmax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// `N(l, w) = sum_j |G(l, j+1)| w(j)` truncated at `series_horizon`, with a tail bound.
pub fn series_constant(
    cache: &TransitionCache,
    proj: &ProjectorPair,
    rates: &RatePair,
    weight: &WeightSeq,
    l: usize,
    series_horizon: usize,
) -> Result<SeriesValue> {
    let norms = KernelNorms::new(cache, proj, l + 1, series_horizon)?;
    let w = weight.table(series_horizon)?;
    let h = rates.h_table(series_horizon + 1)?;
    Ok(SeriesValue {
        value: norms.weighted_sum(l, &w),
        tail_bound: tail_envelope(
            rates,
            weight,
            proj.is_contraction_case(),
            series_horizon,
            l,
            &h,
        )?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardContraction {
    pub holds: bool,
    /// `1 - max_l |A(l)^-1| gamma(l)`.
    pub margin: f64,
    /// First index attaining the maximum factor.
    pub witness: usize,
}

/// Checks `|A(l)^-1| gamma(l) < 1` for `l <= horizon`.
pub fn certify_p6(
    seq: &MatrixSequence,
    pert: &PerturbationSpec,
    horizon: usize,
) -> Result<BackwardContraction> {
    let (mut worst, mut witness) = (f64::NEG_INFINITY, 0);
    for l in 0..=horizon {
        let c = op_norm(&seq.inverse(l)?) * pert.gamma.at(l)?;
        if c > worst {
            worst = c;
            witness = l;
        }
    }
    Ok(BackwardContraction {
        holds: worst < 1.0,
        margin: 1.0 - worst,
        witness,
    })
}

/// Lipschitz bound of `eta -> y(n, k, eta)` for `n <= k`:
/// `prod_{j=n}^{k-1} |A(j)^-1| / (1 - |A(j)^-1| gamma(j))`.
pub fn backward_lipschitz_product(
    seq: &MatrixSequence,
    pert: &PerturbationSpec,
    n: usize,
    k: usize,
) -> Result<f64> {
    let mut prod = 1.0;
    for j in n..k {
        let a = op_norm(&seq.inverse(j)?);
        let c = a * pert.gamma.at(j)?;
        if c >= 1.0 {
            return Err(Error::P6Violated {
                index: j,
                factor: c,
            });
        }
        prod *= a / (1.0 - c);
    }
    Ok(prod)
}

/// `prod_{p=k}^{j-1} (|A(p) - I| + gamma(p))`, the product appearing in the
/// discrete Gronwall estimate of the forward continuity argument.
///
/// This product drops the identity part of `A(p) = I + (A(p) - I)`, so it is
/// not by itself a Lipschitz bound for the forward flow (for `A = I` it
/// shrinks while the flow is an isometry). Use
/// [`forward_lipschitz_product`] when a bound on difference quotients is needed.
pub fn forward_gronwall_product(
    seq: &MatrixSequence,
    pert: &PerturbationSpec,
    k: usize,
    j: usize,
) -> Result<f64> {
    let mut prod = 1.0;
    for p in k..j {
        let a = seq.matrix(p)?;
        let d = a.nrows();
        prod *= op_norm(&(a - Matrix::identity(d, d))) + pert.gamma.at(p)?;
    }
    Ok(prod)
}

/// Lipschitz bound of `eta -> y(j, k, eta)` for `j >= k`: `prod_{p=k}^{j-1} (|A(p)| + gamma(p))`.
pub fn forward_lipschitz_product(
    seq: &MatrixSequence,
    pert: &PerturbationSpec,
    k: usize,
    j: usize,
) -> Result<f64> {
    let mut prod = 1.0;
    for p in k..j {
        prod *= op_norm(&seq.matrix(p)?) + pert.gamma.at(p)?;
    }
    Ok(prod)
}

/// The sequence `s(k) = h(k) prod_{j<k} (1 + gamma(j) rho(j+1) h(j)/h(j+1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrend {
    pub s: Vec<f64>,
    /// `s` is non-increasing on the last quarter of the horizon and
    /// `s(horizon) < s(0) / 10`. A heuristic: the limit itself is not decidable.
    pub holds_empirically: bool,
}

pub fn certify_s4(rates: &RatePair, pert: &PerturbationSpec, horizon: usize) -> Result<DecayTrend> {
    let h = rates.h_table(horizon)?;
    let mut s = Vec::with_capacity(horizon + 1);
    let mut prod = 1.0;
    s.push(h[0]);
    for k in 1..=horizon {
        let j = k - 1;
        prod *= 1.0 + pert.gamma.at(j)? * rates.rho(j + 1)? * h[j] / h[j + 1];
        s.push(h[k] * prod);
    }
    let tail_start = horizon - horizon / 4;
    let decreasing = s[tail_start..].windows(2).all(|w| w[1] <= w[0]);
    let holds_empirically = decreasing && s[horizon] < s[0] / 10.0;
    Ok(DecayTrend {
        s,
        holds_empirically,
    })
}

/// Checks `|A(l)^-1 Q(l+1)| gamma(l) <= q`, the single-term consequence of
/// the series condition on `gamma`.
pub fn check_unstable_step(
    cache: &TransitionCache,
    proj: &ProjectorPair,
    gamma: &WeightSeq,
    q: f64,
    upto: usize,
) -> Result<HypothesisStatus> {
    let mut worst = f64::NEG_INFINITY;
    let mut witness = 0;
    for l in 0..=upto {
        let lhs = op_norm(&(cache.a_inv(l)? * proj.q(l + 1)?)) * gamma.at(l)?;
        let r = ratio(lhs, q);
        if r > worst {
            worst = r;
            witness = l;
        }
    }
    Ok(HypothesisStatus::from_ratio(worst <= P2_TOL, worst, vec![witness]))
}

/// Summary verdict of the certification, kept alongside the numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyCertificate {
    /// Hash of the system description the certificate was issued for.
    pub fingerprint: String,
    /// Grid on which every check was carried out.
    pub horizon: usize,
    pub series_horizon: usize,
    pub growth_constant: f64,
    pub contraction_case: bool,
    pub projector: ProjectorReport,
    pub projector_holds: bool,
    pub p: f64,
    pub q: f64,
    pub p_tail: f64,
    pub q_tail: f64,
    pub p6_margin: f64,
    pub p1: HypothesisStatus,
    pub p2: HypothesisStatus,
    pub p3: HypothesisStatus,
    pub p4: HypothesisStatus,
    pub p5: HypothesisStatus,
    pub p6: HypothesisStatus,
    pub unstable_step: HypothesisStatus,
    pub s4: DecayTrend,
    /// `N(l, mu)` and `N(l, gamma)` per `l <= series_horizon` (value + tail).
    pub n_mu: Vec<f64>,
    pub n_gamma: Vec<f64>,
}

/// Tolerance for the projector identities, relative to `sup |P|`.
pub const PROJECTOR_TOL: f64 = 1e-9;

impl DichotomyCertificate {
    /// (P1)-(P6) together with the projector identities.
    pub fn all_hold(&self) -> bool {
        self.projector_holds
            && self.p1.holds
            && self.p2.holds
            && self.p3.holds
            && self.p4.holds
            && self.p5.holds
            && self.p6.holds
    }

    /// The contraction-case hypotheses: `P = I` together with the dichotomy
    /// bound and both series conditions.
    pub fn contraction_hypotheses_hold(&self) -> bool {
        self.contraction_case && self.all_hold()
    }

    /// Names of the hypotheses that fail.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, ok) in [
            ("projector", self.projector_holds),
            ("P1", self.p1.holds),
            ("P2", self.p2.holds),
            ("P3", self.p3.holds),
            ("P4", self.p4.holds),
            ("P5", self.p5.holds),
            ("P6", self.p6.holds),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}
