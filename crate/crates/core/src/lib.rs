//! Exact computations with the Schrödinger and Weil representations of the
//! symplectic group `Sp(2n, Q_p)` acting on Bruhat–Schwartz functions, and the
//! Galois descent of the Weil representation to `Q(√p, √−p)`.
//!
//! Everything is exact. Scalars live in the cyclotomic field `Q(ζ_{4p^N})`
//! ([`cyclo`]), the local field `Q_p` is modelled by rationals with their
//! `p`-adic valuation ([`localfield`]), and Schwartz functions are finite
//! tables over a lattice cell ([`schwartz`]). Operators are built from
//! [`sympl`] group elements by [`rep`], twisted by [`twists`], assembled into
//! the Galois 1-cocycle by [`cocycle`] and split by [`descent`].
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cocycle;
pub mod cyclo;
pub mod descent;
mod error;
pub mod localfield;
pub mod matrix;
pub(crate) mod modular;
pub mod numtheory;
pub mod rational;
pub mod rep;
pub mod schwartz;
pub mod sympl;
pub mod twists;

pub use error::{Error, Result};
pub use cyclo::{CyclotomicNumber, GaloisElement, SqrtTable, Subfield, Tower};
pub use localfield::{AdditiveCharacter, LocalScalar};
pub use rep::{DilationSum, EvalOptions, MeasureData, OperatorExpr, WeilMode, WeilOperator};
pub use schwartz::SchwartzFunction;
pub use sympl::{HeisenbergElement, SiegelDecomposition, SymplecticElement};
pub use twists::{TwistIdentity, TwistReport, Witness};
pub use cocycle::{CocycleData, SigmaDecomposition};
pub use descent::SplittingData;
