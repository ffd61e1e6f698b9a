use crate::algebra::linalg::{inverse_with_rcond, op_norm, Matrix, SINGULAR_RCOND};
use crate::error::{Error, Result};
use crate::exprlang::Expr;

/// How the coefficient map `k -> A(k)` is described.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFamily {
    /// `A(k) = A` for every `k`.
    Constant(Matrix),
    /// `A(k) = diag(rates)` for every `k`.
    DiagonalGeometric(Vec<f64>),
    /// Explicit `A(0), ..., A(K_tab - 1)`; indices past the table are out of horizon.
    Tabulated(Vec<Matrix>),
    /// One expression in `k` per entry, row-major.
    Expression(Vec<Expr>),
}

/// The coefficient sequence of the linear system `x_{k+1} = A(k) x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSequence {
    dim: usize,
    family: MatrixFamily,
}

impl MatrixSequence {
    pub fn new(dim: usize, family: MatrixFamily) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let check = |m: &Matrix| {
            if m.shape() != (dim, dim) {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows().max(m.ncols()),
                })
            } else if m.iter().any(|v| !v.is_finite()) {
                Err(Error::InvalidConfig("non-finite coefficient entry".into()))
            } else {
                Ok(())
            }
        };
        match &family {
            MatrixFamily::Constant(m) => check(m)?,
            MatrixFamily::DiagonalGeometric(r) => {
                if r.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: r.len(),
                    });
                }
            }
            MatrixFamily::Tabulated(ms) => {
                if ms.is_empty() {
                    return Err(Error::InvalidConfig("empty coefficient table".into()));
                }
                ms.iter().try_for_each(check)?;
            }
            MatrixFamily::Expression(es) => {
                if es.len() != dim * dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim * dim,
                        found: es.len(),
                    });
                }
                if es.iter().any(|e| e.max_state_index().is_some()) {
                    return Err(Error::InvalidConfig(
                        "coefficient expressions may only reference k".into(),
                    ));
                }
            }
        }
        Ok(MatrixSequence { dim, family })
    }

    pub fn constant(a: Matrix) -> Result<Self> {
        MatrixSequence::new(a.nrows(), MatrixFamily::Constant(a))
    }

    pub fn diagonal(rates: Vec<f64>) -> Result<Self> {
        MatrixSequence::new(rates.len(), MatrixFamily::DiagonalGeometric(rates))
    }

    /// Scalar system `x_{k+1} = a x_k`.
    pub fn scalar(a: f64) -> Result<Self> {
        MatrixSequence::diagonal(vec![a])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &MatrixFamily {
        &self.family
    }

    /// Number of available coefficients, if finite.
    pub fn table_len(&self) -> Option<usize> {
        match &self.family {
            MatrixFamily::Tabulated(ms) => Some(ms.len()),
            _ => None,
        }
    }

    /// True when `A(k)` does not depend on `k`.
    pub fn is_autonomous(&self) -> bool {
        match &self.family {
            MatrixFamily::Constant(_) | MatrixFamily::DiagonalGeometric(_) => true,
            MatrixFamily::Tabulated(ms) => ms.windows(2).all(|w| w[0] == w[1]),
            MatrixFamily::Expression(es) => !es.iter().any(Expr::uses_k),
        }
    }

    pub fn matrix(&self, k: usize) -> Result<Matrix> {
        match &self.family {
            MatrixFamily::Constant(m) => Ok(m.clone()),
            MatrixFamily::DiagonalGeometric(r) => Ok(Matrix::from_diagonal(
                &nalgebra::DVector::from_column_slice(r),
            )),
            MatrixFamily::Tabulated(ms) => ms.get(k).cloned().ok_or(Error::OutOfHorizon {
                index: k,
                horizon: ms.len().saturating_sub(1),
            }),
            MatrixFamily::Expression(es) => {
                let mut m = Matrix::zeros(self.dim, self.dim);
                for (idx, e) in es.iter().enumerate() {
                    let v = e.evaluate(k as f64, &[])?;
                    if !v.is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "coefficient entry {idx} is not finite at k = {k}"
                        )));
                    }
                    m[(idx / self.dim, idx % self.dim)] = v;
                }
                Ok(m)
            }
        }
    }

    /// `A(k)` together with its inverse; fails with `SingularCoefficient`
    /// when the reciprocal condition estimate is below `1e-12`.
    pub fn matrix_and_inverse(&self, k: usize) -> Result<(Matrix, Matrix)> {
        let a = self.matrix(k)?;
        match inverse_with_rcond(&a) {
            Some((inv, rcond)) if rcond >= SINGULAR_RCOND => Ok((a, inv)),
            Some((_, rcond)) => Err(Error::SingularCoefficient { index: k, rcond }),
            None => Err(Error::SingularCoefficient {
                index: k,
                rcond: 0.0,
            }),
        }
    }

    pub fn inverse(&self, k: usize) -> Result<Matrix> {
        Ok(self.matrix_and_inverse(k)?.1)
    }

    /// `max(sup |A(k)|, sup |A(k)^-1|)` over `0 <= k <= horizon`, clamped below by 1.
    pub fn growth_constant(&self, horizon: usize) -> Result<f64> {
        let mut m = 1.0f64;
        for k in 0..=horizon {
            let (a, inv) = self.matrix_and_inverse(k)?;
            m = m.max(op_norm(&a)).max(op_norm(&inv));
        }
        Ok(m)
    }
}
