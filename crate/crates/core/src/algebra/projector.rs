use crate::algebra::linalg::{op_norm, Matrix};
use crate::algebra::transition::TransitionCache;
use crate::error::{Error, Result};

/// How the dichotomy projector `P(k)` is specified. `Q(k) = I - P(k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectorFamily {
    /// `P(k) = I`: the contraction case.
    Identity,
    /// `P(k) = P` for every `k`; invariant only when `P` commutes with every `A(k)`.
    Constant(Matrix),
    /// `P(k) = Phi(k,0) P0 Phi(0,k)`, invariant by construction.
    Transported(Matrix),
}

/// Projector pair tabulated on the horizon of a transition cache.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    family: ProjectorFamily,
    p: Vec<Matrix>,
    q: Vec<Matrix>,
    contraction: bool,
}

/// Measured defects of the projector invariants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProjectorReport {
    /// `max |P + Q - I| / max(1, sup|P|)`.
    pub complement_defect: f64,
    /// `max(|P^2 - P|, |Q^2 - Q|) / max(1, sup|P|)^2`.
    pub idempotence_defect: f64,
    /// `max |P(k+1) A(k) - A(k) P(k)| / (|A(k)| max(1, sup|P|))`.
    pub invariance_defect: f64,
    /// `sup_k |P(k)|`, reported as a diagnostic.
    pub sup_norm_p: f64,
}

impl ProjectorReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.complement_defect <= tol && self.idempotence_defect <= tol && self.invariance_defect <= tol
    }
}

impl ProjectorPair {
    pub fn build(family: ProjectorFamily, cache: &TransitionCache) -> Result<Self> {
        let d = cache.dim();
        let id = Matrix::identity(d, d);
        let p: Vec<Matrix> = match &family {
            ProjectorFamily::Identity => vec![id.clone(); cache.horizon() + 1],
            ProjectorFamily::Constant(p0) => {
                check_shape(p0, d)?;
                vec![p0.clone(); cache.horizon() + 1]
            }
            ProjectorFamily::Transported(p0) => {
                check_shape(p0, d)?;
                (0..=cache.horizon())
                    .map(|k| -> Result<Matrix> {
                        Ok(cache.transition(k, 0)? * p0 * cache.transition(0, k)?)
                    })
                    .collect::<Result<_>>()?
            }
        };
        let q: Vec<Matrix> = p.iter().map(|pk| &id - pk).collect();
        let contraction = q.iter().all(|qk| qk.amax() == 0.0);
        Ok(ProjectorPair {
            family,
            p,
            q,
            contraction,
        })
    }

    pub fn family(&self) -> &ProjectorFamily {
        &self.family
    }

    pub fn horizon(&self) -> usize {
        self.p.len() - 1
    }

    pub fn p(&self, k: usize) -> Result<&Matrix> {
        self.p.get(k).ok_or(Error::OutOfHorizon {
            index: k,
            horizon: self.horizon(),
        })
    }

    pub fn q(&self, k: usize) -> Result<&Matrix> {
        self.q.get(k).ok_or(Error::OutOfHorizon {
            index: k,
            horizon: self.horizon(),
        })
    }

    /// True when `Q(k)` is exactly zero on the whole horizon.
    pub fn is_contraction_case(&self) -> bool {
        self.contraction
    }

    pub fn check(&self, cache: &TransitionCache) -> Result<ProjectorReport> {
        let d = cache.dim();
        let id = Matrix::identity(d, d);
        let mut rep = ProjectorReport {
            complement_defect: 0.0,
            idempotence_defect: 0.0,
            invariance_defect: 0.0,
            sup_norm_p: 0.0,
        };
        for pk in &self.p {
            rep.sup_norm_p = rep.sup_norm_p.max(op_norm(pk));
        }
        let scale = rep.sup_norm_p.max(1.0);
        for (pk, qk) in self.p.iter().zip(&self.q) {
            rep.complement_defect = rep.complement_defect.max((pk + qk - &id).amax() / scale);
            rep.idempotence_defect = rep
                .idempotence_defect
                .max((pk * pk - pk).amax() / (scale * scale))
                .max((qk * qk - qk).amax() / (scale * scale));
        }
        for k in 0..self.horizon().min(cache.horizon()) {
            let a = cache.a(k)?;
            let defect = (&self.p[k + 1] * a - a * &self.p[k]).amax();
            rep.invariance_defect = rep.invariance_defect.max(defect / (op_norm(a) * scale));
        }
        Ok(rep)
    }
}

fn check_shape(m: &Matrix, d: usize) -> Result<()> {
    if m.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::sequence::{MatrixFamily, MatrixSequence};

    #[test]
    fn constant_diagonal_projector_is_invariant_for_diagonal_system() {
        let seq = MatrixSequence::diagonal(vec![0.5, 2.0]).unwrap();
        let cache = TransitionCache::new(&seq, 20).unwrap();
        let pp = ProjectorPair::build(
            ProjectorFamily::Constant(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
            &cache,
        )
        .unwrap();
        let rep = pp.check(&cache).unwrap();
        assert!(rep.holds(0.0));
        assert_eq!(rep.sup_norm_p, 1.0);
        assert!(!pp.is_contraction_case());
        for k in 0..=20 {
            for n in 0..=20 {
                let phi = cache.transition(k, n).unwrap();
                assert_eq!(pp.p(k).unwrap() * &phi, &phi * pp.p(n).unwrap());
            }
        }
    }

    #[test]
    fn constant_projector_not_commuting_is_flagged() {
        let a = Matrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 2.0]);
        let seq = MatrixSequence::constant(a).unwrap();
        let cache = TransitionCache::new(&seq, 10).unwrap();
        let pp = ProjectorPair::build(
            ProjectorFamily::Constant(Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])),
            &cache,
        )
        .unwrap();
        assert!(!pp.check(&cache).unwrap().holds(1e-10));
    }

    #[test]
    fn transported_projector_is_invariant() {
        let ms: Vec<Matrix> = (0..12)
            .map(|j| {
                Matrix::from_row_slice(2, 2, &[0.5, 0.1 * (j as f64).sin(), 0.0, 1.8])
            })
            .collect();
        let seq = MatrixSequence::new(2, MatrixFamily::Tabulated(ms)).unwrap();
        let cache = TransitionCache::new(&seq, 11).unwrap();
        let pp = ProjectorPair::build(
            ProjectorFamily::Transported(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
            &cache,
        )
        .unwrap();
        let rep = pp.check(&cache).unwrap();
        assert!(rep.holds(1e-10), "{rep:?}");
        for k in 0..=11 {
            for n in 0..=11 {
                let phi = cache.transition(k, n).unwrap();
                let lhs = pp.p(k).unwrap() * &phi;
                let rhs = &phi * pp.p(n).unwrap();
                assert!((&lhs - &rhs).amax() <= 1e-10 * lhs.amax().max(1.0));
            }
        }
    }

    #[test]
    fn identity_family_is_contraction_case() {
        let seq = MatrixSequence::scalar(0.5).unwrap();
        let cache = TransitionCache::new(&seq, 5).unwrap();
        let pp = ProjectorPair::build(ProjectorFamily::Identity, &cache).unwrap();
        assert!(pp.is_contraction_case());
        assert_eq!(pp.q(3).unwrap()[(0, 0)], 0.0);
    }
}
