//! Hyperboloid-averaged field operators on a truncated free scalar field:
//! oscillatory integrals and their stationary-phase expansion, smeared
//! field operators on a momentum-lattice Fock space, asymptotic limits and
//! decay estimates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod decay;
pub mod error;
pub mod exec;
pub mod freefield;
pub mod minkowski;
pub mod oscillatory;
pub mod profiles;
pub mod quadrature;

pub use error::{Error, Result};
pub use exec::Execution;
pub use minkowski::{FourVector, HyperboloidPoint, LorentzBoost};
