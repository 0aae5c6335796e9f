//! Finite-dimensional C*-bases, C*-modules, relative tensor products and
//! spatial fiber products, all realised as dense complex linear algebra.
//!
//! The numerics are generic over the real field through [`Real`]; the
//! aliases at the crate root fix double precision.

pub mod base;
pub mod commutative;
pub mod error;
pub mod fiber;
pub mod kernel;
pub mod module;
pub mod opspace;
pub mod report;
pub mod rtp;
pub mod scalar;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use kernel::{GramCompletion, Tolerance};
pub use scalar::{CMat, CVec, Real, C};

pub type Mat = scalar::CMat<f64>;
pub type Vector = scalar::CVec<f64>;
pub type Tol = kernel::Tolerance<f64>;
