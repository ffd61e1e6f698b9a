use std::fmt;

use thiserror::Error;

/// A variable that an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// The time index `k`.
    K,
    /// State component `y{i}`.
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Builtin functions. `min` and `max` take two or more arguments, the rest exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Min,
        Func::Max,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

/// Abstract syntax tree of an arithmetic expression.
///
/// Literals produced by the parser are always finite and non-negative; a
/// leading minus sign is represented by [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluates the expression at time index `k` and state `y`.
    pub fn evaluate(&self, k: f64, y: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::K) => Ok(k),
            Expr::Var(Var::Y(i)) => y
                .get(*i)
                .copied()
                .ok_or_else(|| EvalError::UnboundVariable(format!("y{i}"))),
            Expr::Neg(e) => Ok(-e.evaluate(k, y)?),
            Expr::Binary(op, l, r) => {
                let a = l.evaluate(k, y)?;
                let b = r.evaluate(k, y)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::Domain(format!("division of {a} by zero")))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() && !a.is_nan() && !b.is_nan() {
                            Err(EvalError::Domain(format!("{a}^{b} is not real")))
                        } else {
                            Ok(v)
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.evaluate(k, y))
                    .collect::<Result<Vec<_>, _>>()?;
                let x = vals[0];
                match f {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Tanh => Ok(x.tanh()),
                    Func::Exp => Ok(x.exp()),
                    Func::Abs => Ok(x.abs()),
                    Func::Log => {
                        if x <= 0.0 {
                            Err(EvalError::Domain(format!("log of non-positive {x}")))
                        } else {
                            Ok(x.ln())
                        }
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(EvalError::Domain(format!("sqrt of negative {x}")))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Min => Ok(vals.iter().copied().fold(f64::INFINITY, f64::min)),
                    Func::Max => Ok(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                }
            }
        }
    }

    /// Largest state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Var(Var::K) => None,
            Expr::Var(Var::Y(i)) => Some(*i),
            Expr::Neg(e) => e.max_state_index(),
            Expr::Binary(_, l, r) => l.max_state_index().max(r.max_state_index()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_state_index).max(),
        }
    }

    /// True if the expression references `k`.
    pub fn uses_k(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::Y(_)) => false,
            Expr::Var(Var::K) => true,
            Expr::Neg(e) => e.uses_k(),
            Expr::Binary(_, l, r) => l.uses_k() || r.uses_k(),
            Expr::Call(_, args) => args.iter().any(Expr::uses_k),
        }
    }
}

/// Prints a fully parenthesised form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::K) => write!(f, "k"),
            Expr::Var(Var::Y(i)) => write!(f, "y{i}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
