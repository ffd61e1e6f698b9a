use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{Matrix, Vector};
use crate::dichotomy::rates::WeightSeq;
use crate::dichotomy::HypothesisStatus;
use crate::error::{Error, Result};
use crate::exprlang::{BinOp, Expr, Func, Var};

/// Scalar nonlinearities with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sin,
    Tanh,
    /// `clamp(x, -1, 1)`.
    Saturated,
}

impl Activation {
    fn value(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sin => x.sin(),
            Activation::Tanh => x.tanh(),
            Activation::Saturated => x.clamp(-1.0, 1.0),
        }
    }

    fn slope(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sin => x.cos(),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Saturated => {
                if x.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `coeff * act(slope * y[state] + offset)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub act: Activation,
    pub slope: f64,
    pub offset: f64,
    pub state: usize,
}

/// One component of a builtin perturbation: a constant plus a sum of terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Component {
    pub constant: f64,
    pub terms: Vec<Term>,
}

/// The nonlinearity `f(k, y)` of the perturbed system.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Time-independent sums of sine / tanh / saturated / linear ridge terms,
    /// with an exact Jacobian.
    Builtin(Vec<Component>),
    /// One expression per component; Jacobian by central differences.
    Expression(Vec<Expr>),
}

impl Perturbation {
    /// `f = 0` in dimension `d`.
    pub fn zero(d: usize) -> Self {
        Perturbation::Builtin(vec![Component::default(); d])
    }

    /// Constant `f(k, y) = c`.
    pub fn constant(c: Vec<f64>) -> Self {
        Perturbation::Builtin(
            c.into_iter()
                .map(|constant| Component {
                    constant,
                    terms: vec![],
                })
                .collect(),
        )
    }

    /// Builds from one expression per component, recognising the builtin
    /// families so that they get exact Jacobians.
    pub fn from_exprs(exprs: Vec<Expr>) -> Result<Self> {
        let d = exprs.len();
        if d == 0 {
            return Err(Error::InvalidConfig("perturbation has no components".into()));
        }
        for e in &exprs {
            if let Some(i) = e.max_state_index() {
                if i >= d {
                    return Err(Error::InvalidConfig(format!(
                        "perturbation references y{i} in dimension {d}"
                    )));
                }
            }
        }
        match exprs.iter().map(recognise).collect::<Option<Vec<_>>>() {
            Some(cs) => Ok(Perturbation::Builtin(cs)),
            None => Ok(Perturbation::Expression(exprs)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Perturbation::Builtin(c) => c.len(),
            Perturbation::Expression(e) => e.len(),
        }
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self, Perturbation::Builtin(_))
    }

    /// True when `f` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Perturbation::Builtin(cs) => cs
                .iter()
                .all(|c| c.constant == 0.0 && c.terms.iter().all(|t| t.coeff == 0.0)),
            Perturbation::Expression(_) => false,
        }
    }

    /// True when `f` does not depend on `k`.
    pub fn is_autonomous(&self) -> bool {
        match self {
            Perturbation::Builtin(_) => true,
            Perturbation::Expression(es) => !es.iter().any(Expr::uses_k),
        }
    }

    pub fn eval(&self, k: usize, y: &Vector) -> Result<Vector> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        match self {
            Perturbation::Builtin(cs) => Ok(Vector::from_iterator(
                cs.len(),
                cs.iter().map(|c| {
                    c.terms.iter().fold(c.constant, |acc, t| {
                        acc + t.coeff * t.act.value(t.slope * y[t.state] + t.offset)
                    })
                }),
            )),
            Perturbation::Expression(es) => {
                let ys = y.as_slice();
                let mut out = Vector::zeros(es.len());
                for (i, e) in es.iter().enumerate() {
                    out[i] = e.evaluate(k as f64, ys)?;
                }
                Ok(out)
            }
        }
    }

    /// `D_y f(k, y)`.
    pub fn jacobian(&self, k: usize, y: &Vector) -> Result<Matrix> {
        let d = self.dim();
        match self {
            Perturbation::Builtin(cs) => {
                let mut j = Matrix::zeros(d, d);
                for (i, c) in cs.iter().enumerate() {
                    for t in &c.terms {
                        j[(i, t.state)] +=
                            t.coeff * t.slope * t.act.slope(t.slope * y[t.state] + t.offset);
                    }
                }
                Ok(j)
            }
            Perturbation::Expression(_) => {
                let mut j = Matrix::zeros(d, d);
                for s in 0..d {
                    let step = 1e-6 * y[s].abs().max(1.0);
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[s] += step;
                    ym[s] -= step;
                    let col = (self.eval(k, &yp)? - self.eval(k, &ym)?) / (yp[s] - ym[s]);
                    j.set_column(s, &col);
                }
                Ok(j)
            }
        }
    }
}

// ---- recognition of builtin families ----

/// `slope * y[state] + offset`, or a constant when `state` is `None`.
#[derive(Debug, Clone, Copy)]
struct Affine {
    slope: f64,
    state: Option<usize>,
    offset: f64,
}

fn affine(e: &Expr) -> Option<Affine> {
    match e {
        Expr::Num(v) => Some(Affine {
            slope: 0.0,
            state: None,
            offset: *v,
        }),
        Expr::Var(Var::Y(s)) => Some(Affine {
            slope: 1.0,
            state: Some(*s),
            offset: 0.0,
        }),
        Expr::Var(Var::K) => None,
        Expr::Neg(x) => affine(x).map(|a| Affine {
            slope: -a.slope,
            state: a.state,
            offset: -a.offset,
        }),
        Expr::Binary(op, l, r) => {
            let (a, b) = (affine(l)?, affine(r)?);
            match op {
                BinOp::Add | BinOp::Sub => {
                    let sign = if *op == BinOp::Add { 1.0 } else { -1.0 };
                    let state = match (a.state, b.state) {
                        (Some(x), Some(y)) if x != y => return None,
                        (x, y) => x.or(y),
                    };
                    Some(Affine {
                        slope: a.slope + sign * b.slope,
                        state,
                        offset: a.offset + sign * b.offset,
                    })
                }
                BinOp::Mul => match (a.state, b.state) {
                    (None, _) => Some(scale(b, a.offset)),
                    (_, None) => Some(scale(a, b.offset)),
                    _ => None,
                },
                BinOp::Div if b.state.is_none() && b.offset != 0.0 => Some(scale(a, 1.0 / b.offset)),
                BinOp::Pow if a.state.is_none() && b.state.is_none() => Some(Affine {
                    slope: 0.0,
                    state: None,
                    offset: a.offset.powf(b.offset),
                }),
                _ => None,
            }
        }
        Expr::Call(..) => constant(e).map(|v| Affine {
            slope: 0.0,
            state: None,
            offset: v,
        }),
    }
}

fn scale(a: Affine, c: f64) -> Affine {
    Affine {
        slope: a.slope * c,
        state: a.state,
        offset: a.offset * c,
    }
}

fn constant(e: &Expr) -> Option<f64> {
    if e.uses_k() || e.max_state_index().is_some() {
        return None;
    }
    e.evaluate(0.0, &[]).ok().filter(|v| v.is_finite())
}

fn is_literal(e: &Expr, v: f64) -> bool {
    constant(e) == Some(v)
}

/// `act(inner)` with the inner affine argument.
fn activation(e: &Expr) -> Option<(Activation, Affine)> {
    match e {
        Expr::Call(Func::Sin, args) => Some((Activation::Sin, affine(&args[0])?)),
        Expr::Call(Func::Tanh, args) => Some((Activation::Tanh, affine(&args[0])?)),
        Expr::Call(outer @ (Func::Min | Func::Max), args) if args.len() == 2 => {
            let (bound, inner_fn) = match outer {
                Func::Min => (1.0, Func::Max),
                _ => (-1.0, Func::Min),
            };
            let (lit, rest) = if is_literal(&args[0], bound) {
                (&args[0], &args[1])
            } else {
                (&args[1], &args[0])
            };
            if !is_literal(lit, bound) {
                return None;
            }
            match rest {
                Expr::Call(f, inner) if *f == inner_fn && inner.len() == 2 => {
                    let x = if is_literal(&inner[0], -bound) {
                        &inner[1]
                    } else if is_literal(&inner[1], -bound) {
                        &inner[0]
                    } else {
                        return None;
                    };
                    Some((Activation::Saturated, affine(x)?))
                }
                _ => None,
            }
        }
        _ => None,
    }
}

fn summands(e: &Expr, sign: f64, out: &mut Vec<(f64, Expr)>) {
    match e {
        Expr::Binary(BinOp::Add, l, r) => {
            summands(l, sign, out);
            summands(r, sign, out);
        }
        Expr::Binary(BinOp::Sub, l, r) => {
            summands(l, sign, out);
            summands(r, -sign, out);
        }
        Expr::Neg(x) => summands(x, -sign, out),
        _ => out.push((sign, e.clone())),
    }
}

fn recognise(e: &Expr) -> Option<Component> {
    let mut parts = Vec::new();
    summands(e, 1.0, &mut parts);
    let mut comp = Component::default();
    for (sign, s) in parts {
        if let Some(a) = affine(&s) {
            comp.constant += sign * a.offset;
            if let Some(state) = a.state {
                comp.terms.push(Term {
                    coeff: sign,
                    act: Activation::Identity,
                    slope: a.slope,
                    offset: 0.0,
                    state,
                });
            }
            continue;
        }
        let (coeff, act) = match &s {
            Expr::Binary(BinOp::Mul, l, r) => match (constant(l), constant(r)) {
                (Some(c), None) => (c, activation(r)?),
                (None, Some(c)) => (c, activation(l)?),
                _ => return None,
            },
            Expr::Binary(BinOp::Div, l, r) => (1.0 / constant(r)?, activation(l)?),
            other => (1.0, activation(other)?),
        };
        let (act, inner) = act;
        match inner.state {
            Some(state) => comp.terms.push(Term {
                coeff: sign * coeff,
                act,
                slope: inner.slope,
                offset: inner.offset,
                state,
            }),
            None => comp.constant += sign * coeff * act.value(inner.offset),
        }
    }
    Some(comp)
}

// ---- declared bounds ----

/// Sampling report for the declared Lipschitz and bound sequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub lipschitz: HypothesisStatus,
    pub bound: HypothesisStatus,
    pub samples: usize,
}

/// `f` together with its declared Lipschitz sequence `gamma` and bound `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub f: Perturbation,
    pub gamma: WeightSeq,
    pub mu: WeightSeq,
    /// Half-width of the box `[-r, r]^d` used by the sampling checks.
    pub sample_box: f64,
}

/// Relative slack allowed in the sampled inequalities for rounding in `f`.
const SAMPLE_SLACK: f64 = 1e-12;

impl PerturbationSpec {
    pub fn new(f: Perturbation, gamma: WeightSeq, mu: WeightSeq, sample_box: f64) -> Result<Self> {
        gamma.validate()?;
        mu.validate()?;
        if !(sample_box.is_finite() && sample_box > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample box half-width must be positive, got {sample_box}"
            )));
        }
        Ok(PerturbationSpec {
            f,
            gamma,
            mu,
            sample_box,
        })
    }

    /// `f = 0` with `gamma = mu = 0`.
    pub fn zero(d: usize) -> Self {
        PerturbationSpec {
            f: Perturbation::zero(d),
            gamma: WeightSeq::zero(),
            mu: WeightSeq::zero(),
            sample_box: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Spot-checks `|f(k,y) - f(k,y~)| <= gamma(k) |y - y~|` and `|f(k,y)| <= mu(k)`
    /// on `samples` seeded random points with `k <= horizon`. Half of the pairs
    /// are close together to probe the local slope.
    pub fn check_samples(&self, horizon: usize, samples: usize, seed: u64) -> Result<SampleReport> {
        let d = self.dim();
        let r = self.sample_box;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lip = Worst::default();
        let mut bnd = Worst::default();
        for i in 0..samples {
            let k = rng.random_range(0..=horizon);
            let y = Vector::from_fn(d, |_, _| rng.random_range(-r..=r));
            let yt = if i % 2 == 0 {
                Vector::from_fn(d, |_, _| rng.random_range(-r..=r))
            } else {
                let dir = Vector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
                &y + dir * (1e-4 * r)
            };
            let fy = self.f.eval(k, &y)?;
            let fyt = self.f.eval(k, &yt)?;
            let dy = (&y - &yt).norm();
            if dy > 0.0 {
                let lhs = (&fy - &fyt).norm();
                lip.push(lhs, self.gamma.at(k)? * dy, k);
            }
            bnd.push(fy.norm(), self.mu.at(k)?, k);
        }
        Ok(SampleReport {
            lipschitz: lip.status(),
            bound: bnd.status(),
            samples,
        })
    }
}

#[derive(Default)]
struct Worst {
    violation: Option<(f64, usize)>,
}

impl Worst {
    fn push(&mut self, lhs: f64, rhs: f64, k: usize) {
        let v = if lhs <= rhs * (1.0 + SAMPLE_SLACK) {
            if rhs > 0.0 {
                lhs / rhs - 1.0
            } else {
                -1.0
            }
        } else if rhs > 0.0 {
            lhs / rhs - 1.0
        } else {
            f64::INFINITY
        };
        if self.violation.is_none_or(|(w, _)| v > w) {
            self.violation = Some((v, k));
        }
    }

    fn status(&self) -> HypothesisStatus {
        match self.violation {
            None => HypothesisStatus::pass(-1.0),
            Some((v, k)) => HypothesisStatus {
                holds: v <= SAMPLE_SLACK,
                worst_violation: v,
                witness: Some(vec![k]),
            },
        }
    }
}
