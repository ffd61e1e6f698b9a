use crate::algebra::linalg::{Matrix, Vector};
use crate::algebra::sequence::MatrixSequence;
use crate::error::{Error, Result};

/// Relative tolerance that the memoised fast path must meet against direct products.
const FAST_PATH_TOL: f64 = 1e-8;

/// Transition matrix `Phi(k, n)` by direct multiplication of the coefficients:
/// `A(k-1)...A(n)` for `k > n`, `I` for `k = n`, `A(k)^-1...A(n-1)^-1` for `k < n`.
pub fn transition(seq: &MatrixSequence, k: usize, n: usize) -> Result<Matrix> {
    let d = seq.dim();
    let mut phi = Matrix::identity(d, d);
    if k > n {
        for j in n..k {
            phi = seq.matrix(j)? * phi;
        }
    } else {
        for j in k..n {
            phi *= seq.inverse(j)?;
        }
    }
    Ok(phi)
}

/// Eagerly built coefficient and transition tables on `[0, horizon]`.
///
/// Stores `A(j)`, `A(j)^-1` for `j < horizon` and the one-sided products
/// `Phi(k, 0)`, `Phi(0, k)`. Queries use `Phi(k,0) Phi(0,n)` only when that
/// route was checked against direct products at build time.
#[derive(Debug, Clone)]
pub struct TransitionCache {
    seq: MatrixSequence,
    horizon: usize,
    a: Vec<Matrix>,
    a_inv: Vec<Matrix>,
    to_zero: Vec<Matrix>,
    from_zero: Vec<Matrix>,
    fast: bool,
}

impl TransitionCache {
    pub fn new(seq: &MatrixSequence, horizon: usize) -> Result<Self> {
        let d = seq.dim();
        let mut a = Vec::with_capacity(horizon);
        let mut a_inv = Vec::with_capacity(horizon);
        for j in 0..horizon {
            let (m, inv) = seq.matrix_and_inverse(j)?;
            a.push(m);
            a_inv.push(inv);
        }
        let mut from_zero = vec![Matrix::identity(d, d)];
        let mut to_zero = vec![Matrix::identity(d, d)];
        for j in 0..horizon {
            from_zero.push(&a[j] * &from_zero[j]);
            to_zero.push(&to_zero[j] * &a_inv[j]);
        }
        let mut cache = TransitionCache {
            seq: seq.clone(),
            horizon,
            a,
            a_inv,
            to_zero,
            from_zero,
            fast: false,
        };
        cache.fast = cache.fast_path_agrees();
        if !cache.fast {
            log::debug!("transition cache: fast path disabled, using direct products");
        }
        Ok(cache)
    }

    fn fast_path_agrees(&self) -> bool {
        let d = self.seq.dim();
        let id = Matrix::identity(d, d);
        for k in 0..=self.horizon {
            if (&self.from_zero[k] * &self.to_zero[k] - &id).amax() > FAST_PATH_TOL {
                return false;
            }
        }
        let stride = (self.horizon / 8).max(1);
        let mut k = 0;
        while k <= self.horizon {
            let mut n = 0;
            while n <= self.horizon {
                let direct = self.direct(k, n);
                let fast = &self.from_zero[k] * &self.to_zero[n];
                let scale = direct.amax().max(f64::MIN_POSITIVE);
                if (fast - &direct).amax() > FAST_PATH_TOL * scale {
                    return false;
                }
                n += stride;
            }
            k += stride;
        }
        true
    }

    fn direct(&self, k: usize, n: usize) -> Matrix {
        let d = self.seq.dim();
        let mut phi = Matrix::identity(d, d);
        if k > n {
            for j in n..k {
                phi = &self.a[j] * phi;
            }
        } else {
            for j in k..n {
                phi *= &self.a_inv[j];
            }
        }
        phi
    }

    fn check(&self, idx: usize) -> Result<()> {
        if idx > self.horizon {
            Err(Error::OutOfHorizon {
                index: idx,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    pub fn sequence(&self) -> &MatrixSequence {
        &self.seq
    }

    pub fn dim(&self) -> usize {
        self.seq.dim()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn uses_fast_path(&self) -> bool {
        self.fast
    }

    /// `A(j)` for `j < horizon`.
    pub fn a(&self, j: usize) -> Result<&Matrix> {
        self.a.get(j).ok_or(Error::OutOfHorizon {
            index: j,
            horizon: self.horizon,
        })
    }

    /// `A(j)^-1` for `j < horizon`.
    pub fn a_inv(&self, j: usize) -> Result<&Matrix> {
        self.a_inv.get(j).ok_or(Error::OutOfHorizon {
            index: j,
            horizon: self.horizon,
        })
    }

    /// `Phi(k, n)` for `k, n <= horizon`.
    pub fn transition(&self, k: usize, n: usize) -> Result<Matrix> {
        self.check(k)?;
        self.check(n)?;
        if k == n {
            let d = self.seq.dim();
            return Ok(Matrix::identity(d, d));
        }
        if self.fast {
            Ok(&self.from_zero[k] * &self.to_zero[n])
        } else {
            Ok(self.direct(k, n))
        }
    }

    /// `Phi(k, n) v`, stepping factor by factor.
    pub fn apply(&self, k: usize, n: usize, v: &Vector) -> Result<Vector> {
        self.check(k)?;
        self.check(n)?;
        let mut x = v.clone();
        if k > n {
            for j in n..k {
                x = &self.a[j] * x;
            }
        } else {
            for j in (k..n).rev() {
                x = &self.a_inv[j] * x;
            }
        }
        Ok(x)
    }
}
