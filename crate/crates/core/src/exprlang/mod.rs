//! A small arithmetic language used by configuration files to describe
//! coefficient entries `A(k)` and perturbation components `f(k, y)`.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Variables are `k` and `y0`, `y1`, ...; functions are `sin cos tanh exp
//! log abs min max sqrt`.

mod ast;
mod parse;

pub use ast::{BinOp, EvalError, Expr, Func, Var};
pub use parse::{parse, ParseError};
