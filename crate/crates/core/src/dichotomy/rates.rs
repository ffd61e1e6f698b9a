use crate::error::{Error, Result};
use crate::exprlang::Expr;

/// The decay profile `h` of a dichotomy: positive, non-increasing, `h(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayProfile {
    /// `h(k) = theta^k`, `0 < theta < 1`.
    Geometric(f64),
    /// `h(k) = exp(-(u(0) + ... + u(k-1)))` with `u(j) > 0`.
    ///
    /// `u_min`, when given, is a declared lower bound on every `u(j)`; it
    /// gives a closed-form envelope for series tails.
    GeneralizedExp { u: Expr, u_min: Option<f64> },
    /// Explicit values `h(0), h(1), ...`; indices past the table are out of horizon.
    Tabulated(Vec<f64>),
}

/// The (possibly index-dependent) dichotomy constant `rho`.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoProfile {
    Constant(f64),
    /// `rho(k)` given by an expression in `k`, with a declared supremum over all `k`.
    Expression { expr: Expr, sup: f64 },
}

/// The pair `(rho, h)` bounding the stable and unstable parts of the linear flow.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePair {
    rho: RhoProfile,
    h: DecayProfile,
}

impl RatePair {
    pub fn new(rho: RhoProfile, h: DecayProfile) -> Result<Self> {
        match &rho {
            RhoProfile::Constant(c) if !(c.is_finite() && *c > 0.0) => {
                return Err(Error::InvalidConfig(format!("rho must be positive, got {c}")))
            }
            RhoProfile::Expression { expr, sup } => {
                if !(sup.is_finite() && *sup > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "declared sup of rho must be positive and finite, got {sup}"
                    )));
                }
                if expr.max_state_index().is_some() {
                    return Err(Error::InvalidConfig("rho may only reference k".into()));
                }
            }
            _ => {}
        }
        match &h {
            DecayProfile::Geometric(t) if !(*t > 0.0 && *t < 1.0) => {
                return Err(Error::InvalidConfig(format!(
                    "geometric decay ratio must lie in (0,1), got {t}"
                )))
            }
            DecayProfile::GeneralizedExp { u, u_min } => {
                if u.max_state_index().is_some() {
                    return Err(Error::InvalidConfig("u may only reference k".into()));
                }
                if let Some(m) = u_min {
                    if !(m.is_finite() && *m > 0.0) {
                        return Err(Error::InvalidConfig(format!(
                            "declared minorant of u must be positive, got {m}"
                        )));
                    }
                }
            }
            DecayProfile::Tabulated(v) => {
                if v.first() != Some(&1.0) {
                    return Err(Error::InvalidConfig("tabulated h must start with h(0) = 1".into()));
                }
                if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::InvalidConfig("tabulated h must be positive".into()));
                }
                if v.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidConfig("tabulated h must be non-increasing".into()));
                }
            }
            _ => {}
        }
        Ok(RatePair { rho, h })
    }

    /// Uniform exponential rates `rho = K`, `h(k) = theta^k`.
    pub fn uniform(k: f64, theta: f64) -> Result<Self> {
        RatePair::new(RhoProfile::Constant(k), DecayProfile::Geometric(theta))
    }

    pub fn rho_profile(&self) -> &RhoProfile {
        &self.rho
    }

    pub fn decay(&self) -> &DecayProfile {
        &self.h
    }

    pub fn rho(&self, k: usize) -> Result<f64> {
        match &self.rho {
            RhoProfile::Constant(c) => Ok(*c),
            RhoProfile::Expression { expr, sup } => {
                let v = expr.evaluate(k as f64, &[])?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidConfig(format!("rho({k}) = {v} is not positive")));
                }
                if v > *sup {
                    return Err(Error::InvalidConfig(format!(
                        "rho({k}) = {v} exceeds its declared sup {sup}"
                    )));
                }
                Ok(v)
            }
        }
    }

    /// Supremum of `rho` over all indices (declared or constant).
    pub fn rho_sup(&self) -> f64 {
        match &self.rho {
            RhoProfile::Constant(c) => *c,
            RhoProfile::Expression { sup, .. } => *sup,
        }
    }

    /// `h(0), ..., h(n)`.
    pub fn h_table(&self, n: usize) -> Result<Vec<f64>> {
        match &self.h {
            DecayProfile::Geometric(t) => Ok((0..=n).map(|k| t.powi(k as i32)).collect()),
            DecayProfile::GeneralizedExp { u, u_min } => {
                let mut out = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                out.push(1.0);
                for j in 0..n {
                    let uj = u.evaluate(j as f64, &[])?;
                    if !(uj.is_finite() && uj > 0.0) {
                        return Err(Error::InvalidConfig(format!("u({j}) = {uj} is not positive")));
                    }
                    if let Some(m) = u_min {
                        if uj < *m {
                            return Err(Error::InvalidConfig(format!(
                                "u({j}) = {uj} is below its declared minorant {m}"
                            )));
                        }
                    }
                    acc += uj;
                    out.push((-acc).exp());
                }
                Ok(out)
            }
            DecayProfile::Tabulated(v) => {
                if n >= v.len() {
                    return Err(Error::OutOfHorizon {
                        index: n,
                        horizon: v.len() - 1,
                    });
                }
                Ok(v[..=n].to_vec())
            }
        }
    }

    pub fn h(&self, k: usize) -> Result<f64> {
        Ok(self.h_table(k)?[k])
    }
}

/// A nonnegative weight sequence, used for the Lipschitz sequence `gamma` and the bound `mu`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSeq {
    Constant(f64),
    /// `scale * ratio^k`.
    Geometric { scale: f64, ratio: f64 },
    /// Explicit values; `cutoff` (at most the table length) declares the weight zero from there on.
    Tabulated { values: Vec<f64>, cutoff: Option<usize> },
}

impl WeightSeq {
    pub fn zero() -> Self {
        WeightSeq::Constant(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| !(v.is_finite() && v >= 0.0);
        match self {
            WeightSeq::Constant(c) if bad(*c) => {
                Err(Error::InvalidConfig(format!("weight must be nonnegative, got {c}")))
            }
            WeightSeq::Geometric { scale, ratio } if bad(*scale) || bad(*ratio) => Err(
                Error::InvalidConfig(format!("invalid geometric weight {scale} * {ratio}^k")),
            ),
            WeightSeq::Tabulated { values, cutoff } => {
                if values.iter().any(|v| bad(*v)) {
                    return Err(Error::InvalidConfig("tabulated weight must be nonnegative".into()));
                }
                if cutoff.is_some_and(|c| c > values.len()) {
                    return Err(Error::InvalidConfig(
                        "weight cutoff lies past the end of the table".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, k: usize) -> Result<f64> {
        match self {
            WeightSeq::Constant(c) => Ok(*c),
            WeightSeq::Geometric { scale, ratio } => Ok(scale * ratio.powi(k as i32)),
            WeightSeq::Tabulated { values, cutoff } => {
                if cutoff.is_some_and(|c| k >= c) {
                    return Ok(0.0);
                }
                values.get(k).copied().ok_or(Error::OutOfHorizon {
                    index: k,
                    horizon: values.len().saturating_sub(1),
                })
            }
        }
    }

    pub fn table(&self, n: usize) -> Result<Vec<f64>> {
        (0..=n).map(|k| self.at(k)).collect()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            WeightSeq::Constant(c) => *c == 0.0,
            WeightSeq::Geometric { scale, .. } => *scale == 0.0,
            WeightSeq::Tabulated { values, cutoff } => {
                values[..cutoff.unwrap_or(values.len())].iter().all(|v| *v == 0.0)
                    && cutoff.is_some()
            }
        }
    }

    /// `sup_{j >= from} weight(j)`, if finite and known.
    pub fn sup_from(&self, from: usize) -> Option<f64> {
        match self {
            WeightSeq::Constant(c) => Some(*c),
            WeightSeq::Geometric { scale, ratio } => {
                if *scale == 0.0 {
                    Some(0.0)
                } else if *ratio <= 1.0 {
                    Some(scale * ratio.powi(from as i32))
                } else {
                    None
                }
            }
            WeightSeq::Tabulated { values, cutoff } => {
                let c = (*cutoff)?;
                Some(values[from.min(c)..c].iter().copied().fold(0.0, f64::max))
            }
        }
    }

    /// `sum_{j >= from} weight(j)`, if it has a closed form.
    pub fn sum_from(&self, from: usize) -> Option<f64> {
        match self {
            WeightSeq::Constant(c) => (*c == 0.0).then_some(0.0),
            WeightSeq::Geometric { scale, ratio } => {
                if *scale == 0.0 {
                    Some(0.0)
                } else if *ratio < 1.0 {
                    Some(scale * ratio.powi(from as i32) / (1.0 - ratio))
                } else {
                    None
                }
            }
            WeightSeq::Tabulated { values, cutoff } => {
                let c = (*cutoff)?;
                Some(values[from.min(c)..c].iter().sum())
            }
        }
    }
}
