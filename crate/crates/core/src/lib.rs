//! Deformed Hermitian-Yang-Mills angle calculus on flat tori and a
//! Perron-type solver for weak geodesics between dHYM potentials.
//!
//! - [`linalg`]: Hermitian / J-invariant real symmetric correspondence and
//!   small dense spectral kernels.
//! - [`angles`]: the Lagrangian angle and the lifted space-time angle.
//! - [`subequations`]: membership, margins, duality and the fuzz suites.
//! - [`geometry`]: torus background, complex Hessians, angle fields, `Z_X`.
//! - [`geodesic`]: barriers, the pointwise Perron update, sweeps, validation.

// NaN-rejecting `!(x <= tol)` checks are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angles;
pub mod error;
pub mod expr;
pub mod fuzz;
pub mod geodesic;
pub mod geometry;
pub mod gridfile;
pub mod linalg;
pub mod literal;
pub mod sampling;
pub mod subequations;

pub use error::{Error, Result};
