//! Sparse and dense linear algebra used by both discretizations.

mod csr;
mod dense;
mod gmres;
mod ilu;
mod rcm;

pub use csr::CsrMatrix;
pub use dense::{SINGULAR_PIVOT, dense_solve, DenseMatrix, LuFactors};
pub use gmres::{gmres, GmresConfig, GmresOutcome, IdentityPreconditioner, Preconditioner};
pub use ilu::Ilu0Factors;
pub use rcm::rcm_reordering;
