//! Coefficient sequences, transition matrices, dichotomy projectors and the
//! Green's function of a linear nonautonomous difference system.

mod green;
mod linalg;
mod projector;
mod sequence;
mod transition;

pub use green::{green_kernel, GreenOperator};
pub use linalg::{inverse_with_rcond, is_diagonal, op_norm, vnorm, Matrix, Vector, SINGULAR_RCOND};
pub use projector::{ProjectorFamily, ProjectorPair, ProjectorReport};
pub use sequence::{MatrixFamily, MatrixSequence};
pub use transition::{transition, TransitionCache};
