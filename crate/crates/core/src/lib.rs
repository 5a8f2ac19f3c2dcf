//! Linear control systems on solvable Lie groups.
//!
//! The crate covers the structural side (structure constants, nilradicals,
//! Jordan decomposition of derivations, generalized kernels), exact group
//! arithmetic on simply connected nilpotent groups through the
//! Baker-Campbell-Hausdorff series, solutions of the affine systems
//! `x' = D(u) x + sum u_j Z_j(x)` and their products with linear systems on a
//! vector space, and sampling-based evidence about control sets: periodic
//! seeds obtained by inverting `x -> x * phi(x)^{-1}`, reachability clouds,
//! shooting searches and fiber checks.

pub mod algebra;
pub mod analysis;
pub mod catalog;
pub mod derivation;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod nilgroup;
pub mod par;
pub mod poly;

pub use algebra::{LieAlgebra, Subspace};
pub use derivation::{Derivation, JordanParts};
pub use error::{Error, ErrorKind, Result};
pub use nilgroup::{GroupAutomorphism, NilGroup};
pub use par::Parallelism;
