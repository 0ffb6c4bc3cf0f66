//! Gram-matrix modeling of SOS programs and their lowering to standard-form
//! semidefinite programs by coefficient matching.

mod expr;
mod problem;
mod program;

pub use expr::{LinExpr, PolyExpr};
pub use problem::{PsdBlock, RowOrigin, SdpProblem, SparseRow};
pub use program::{gram_offset, DecisionVar, Identity, PolyVar, SosProgram, SosVar, VarKind};
